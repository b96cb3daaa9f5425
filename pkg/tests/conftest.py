import numpy as np
import pytest

from stabletransfer._accel import HAVE_NUMBA
from stabletransfer.spaces import ComponentDescriptor, FieldKind, SpaceFamily

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def lattice_family(basis=((1,),), q=5, label="L", ncomp=1, metric=None):
    B = np.array(basis, dtype=np.int64)
    d = B.shape[0]
    comps = tuple(ComponentDescriptor(f"{label}{i}", lattice=B) for i in range(ncomp))
    G = np.eye(d) if metric is None else np.asarray(metric, dtype=np.float64)
    return SpaceFamily(FieldKind.non_archimedean(q), d, G, comps, label)


def arch_family(d=1, norms=(0.0,), label="A"):
    comps = tuple(ComponentDescriptor(f"{label}{i}", norm=float(n)) for i, n in enumerate(norms))
    return SpaceFamily(FieldKind.archimedean(), d, np.eye(d), comps, label)
