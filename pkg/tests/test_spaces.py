import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import lattice
from stabletransfer.spaces import (
    ComponentDescriptor, FieldKind, NormRule, SpaceFamily, dual_basis_of, dual_covolume, dual_lattice,
    lattice_covolume, point_family, validate_family,
)

from conftest import arch_family, lattice_family


def test_unit_lattice_valid():
    assert validate_family(lattice_family([[1]])).ok


def test_degenerate_lattice_reported():
    rep = validate_family(lattice_family([[1, 2], [2, 4]]))
    assert not rep.ok
    assert any("degenerate lattice" in m and w == "L0" for w, m in rep.issues)


def test_arch_norms_valid():
    assert validate_family(arch_family(1, (0.0, 1.0, 4.0))).ok


def test_field_invariants():
    bad = SpaceFamily(FieldKind(FieldKind.non_archimedean(1).kind, 1), 1, np.eye(1),
                      (ComponentDescriptor("a", lattice=np.eye(1, dtype=np.int64)),))
    assert not validate_family(bad).ok
    assert "residue" in validate_family(bad).summary()


def test_negative_norm_and_duplicates():
    fam = SpaceFamily(FieldKind.archimedean(), 1, np.eye(1),
                      (ComponentDescriptor("a", norm=-1.0), ComponentDescriptor("a", norm=1.0)))
    rep = validate_family(fam)
    msgs = [m for _, m in rep.issues]
    assert any("non-negative" in m for m in msgs) and any("duplicate" in m for m in msgs)


def _as_float(C):
    return np.array([[float(x) for x in row] for row in C.tolist()])


def test_dual_lattice_examples():
    assert 2 * math.pi * _as_float(dual_lattice(lattice_family([[1]]), "L0"))[0, 0] == pytest.approx(2 * math.pi)
    assert 2 * math.pi * _as_float(dual_lattice(lattice_family([[2]]), "L0"))[0, 0] == pytest.approx(math.pi)
    # columns are the generators; the rows [1, 0] and [1, 2] span the lattice
    fam = lattice_family(np.array([[1, 0], [1, 2]]).T)
    got = 2 * math.pi * _as_float(dual_lattice(fam, "L0")).T
    np.testing.assert_allclose(got, [[2 * math.pi, -math.pi], [0, math.pi]], atol=1e-14)


def test_dual_lattice_errors():
    with pytest.raises(ValueError):
        dual_lattice(arch_family(), "A0")
    with pytest.raises(KeyError):
        dual_lattice(lattice_family(), "nope")


def test_covolume_examples():
    assert lattice_covolume(lattice_family([[1]]), "L0") == pytest.approx(1.0)
    assert lattice_covolume(lattice_family([[2]]), "L0") == pytest.approx(2.0)
    assert lattice_covolume(lattice_family([[1, 0], [0, 1]], metric=np.diag([4.0, 1.0])), "L0") == pytest.approx(2.0)


def test_point_family():
    fam = point_family("P", ["x", "y"], norms=[0, 3])
    assert fam.dim == 0 and fam.ids == ["x", "y"] and fam.norm_of("y") == 3.0
    assert validate_family(fam).ok


def test_norm_rule_generation():
    fam = SpaceFamily(FieldKind.archimedean(), 1, np.eye(1), (ComponentDescriptor("e0", norm=0.0),),
                      "g", NormRule(0.0, 0.5))
    g = fam.with_generated(3)
    assert g.ids == ["e0", "e1", "e2", "e3"] and g.norm_of("e3") == 1.5


@st.composite
def bases(draw):
    d = draw(st.integers(1, 3))
    B = np.array(draw(st.lists(st.lists(st.integers(-4, 4), min_size=d, max_size=d), min_size=d, max_size=d)))
    if round(np.linalg.det(B)) == 0:
        B = B + 7 * np.eye(d, dtype=np.int64)
    if round(np.linalg.det(B)) == 0:
        B = np.eye(d, dtype=np.int64)
    return B


@settings(max_examples=60, deadline=None)
@given(bases())
def test_double_dual_is_unimodular_change(B):
    fam = lattice_family(B)
    C = dual_lattice(fam, "L0")
    back = dual_basis_of(C)
    change = lattice.rat_matmul(lattice.rational_inverse(lattice.rational_matrix(B)), back)
    assert lattice.is_unimodular(change)


@settings(max_examples=60, deadline=None)
@given(bases(), st.floats(0.5, 3.0))
def test_covolume_duality(B, scale):
    d = B.shape[0]
    G = np.eye(d) * scale
    G[0, -1] = G[-1, 0] = 0.1 if d > 1 else G[0, 0]
    fam = lattice_family(B, metric=G)
    assert lattice_covolume(fam, "L0") * dual_covolume(fam, "L0") == pytest.approx((2 * math.pi) ** d, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(bases())
def test_validate_pure_and_idempotent(B):
    fam = lattice_family(B)
    a, b = validate_family(fam), validate_family(fam)
    assert a.ok == b.ok and a.issues == b.issues
    assert np.array_equal(fam.basis("L0"), B)
