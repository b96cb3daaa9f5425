import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import fourier
from stabletransfer.config import load_scenario
from stabletransfer.functions import (
    CompactSupport, FamilyFunction, GridFunction, LatticeFunction, PaleyWiener, TorusFunction,
)
from stabletransfer.verify import fixture_dir

from conftest import arch_family, lattice_family


def lattice_fn(coeffs, fam=None):
    fam = fam or lattice_family([[1]])
    tmp = LatticeFunction(fam, fam.ids[0], coeffs, CompactSupport(math.inf))
    p = LatticeFunction(fam, fam.ids[0], coeffs, CompactSupport(tmp.support_radius()))
    return FamilyFunction(fam, {fam.ids[0]: p}, "Cc", "X")


def gaussian(L, h, a=math.pi):
    fam = arch_family()
    g = GridFunction.from_callable(fam, "A0", lambda x: np.exp(-a * (x ** 2).sum(axis=1)), L, h)
    return FamilyFunction(fam, {"A0": g}, "Schwartz", "X")


def test_delta_goes_to_constant():
    F = fourier.forward(lattice_fn({(0,): 1.0}))
    assert F.pieces["L0"].coeffs == {(0,): 1.0}
    assert F.cls == "PW_f"


def test_single_frequency_sign():
    F = fourier.forward(lattice_fn({(1,): 1.0}))
    p = F.pieces["L0"]
    assert p.coeffs == {(-1,): 1.0}
    # phi(lambda) = e^{-lambda} at lambda = i*0.7
    assert p.eval([[0.7]])[0] == pytest.approx(np.exp(-0.7j))


def test_constant_inverts_to_delta():
    fam = lattice_family([[1]])
    t = TorusFunction(fam, "L0", {(0,): 1.0}, PaleyWiener(0.0))
    back = fourier.inverse(FamilyFunction(fam, {"L0": t}, "PW_f", "Lambda"))
    assert back.pieces["L0"].coeffs == {(0,): 1.0}


def test_gaussian_self_dual(backend):
    g = load_scenario(fixture_dir() / "fourier.yaml").functions["gaussian"]
    F = fourier.forward(g, kernel_2pi=True, backend=backend)
    p = F.pieces["e0"]
    lam = p.nodes()
    assert np.abs(p.samples - np.exp(-math.pi * lam ** 2)).max() < 1e-6


def test_gaussian_roundtrip(backend):
    rep = fourier.roundtrip_report(gaussian(10.0, 0.01), kernel_2pi=True, backend=backend)
    assert rep["finite"] and rep["sup_error"] < 1e-6 and not rep["flagged"]


def test_coarse_grid_flagged():
    rep = fourier.roundtrip_report(gaussian(2.0, 0.5), kernel_2pi=True)
    assert rep["sup_error"] > 1e-2 and rep["flagged"] == ["A0"]


def test_roundtrip_never_raises():
    fam = lattice_family([[1]])
    t = TorusFunction(fam, "L0", {(0,): 1.0}, PaleyWiener(0.0))
    rep = fourier.roundtrip_report(FamilyFunction(fam, {"L0": t}, "PW_f", "Lambda"))
    assert rep["error"] and not rep["finite"]


def test_class_mismatch():
    with pytest.raises(fourier.ClassMismatch):
        fourier.inverse(lattice_fn({(0,): 1.0}))


def test_dual_measure_total_mass():
    fam = lattice_family([[2]])
    rep = fourier.dual_measure_report(fam, "L0")
    assert rep["total_mass"] == 1.0
    assert rep["torus_lebesgue_volume"] == pytest.approx(math.pi)


def test_plancherel_arch():
    rep = fourier.plancherel_report(gaussian(6.0, 0.02, a=1.0))
    assert rep["rel_error"] < 1e-10


lattice_coeffs = st.dictionaries(
    st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
    st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-6),
    min_size=1, max_size=20,
)


@settings(max_examples=60, deadline=None)
@given(lattice_coeffs)
def test_exact_inversion(coeffs):
    fam = lattice_family([[1, 1], [0, 2]])
    f = lattice_fn(coeffs, fam)
    assert fourier.roundtrip_report(f)["sup_error"] <= 1e-12 * (1 + max(map(abs, coeffs.values())))


@settings(max_examples=40, deadline=None)
@given(lattice_coeffs, lattice_coeffs, st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_forward_linear(c1, c2, a, b):
    fam = lattice_family([[1, 0], [0, 1]])
    f, g = lattice_fn(c1, fam), lattice_fn(c2, fam)
    lhs = fourier.forward(f.linear_combination(g, a, b)).pieces["L0"]
    Ff, Fg = fourier.forward(f).pieces["L0"], fourier.forward(g).pieces["L0"]
    xi = np.random.default_rng(1).uniform(-4, 4, (25, 2))
    scale = 1 + sum(map(abs, c1.values())) + sum(map(abs, c2.values()))
    assert np.abs(lhs.eval(xi) - a * Ff.eval(xi) - b * Fg.eval(xi)).max() <= 1e-12 * scale * (1 + abs(a) + abs(b))


@settings(max_examples=40, deadline=None)
@given(lattice_coeffs)
def test_support_equals_type(coeffs):
    fam = lattice_family([[1, 0], [0, 1]])
    f = lattice_fn(coeffs, fam)
    F = fourier.forward(f)
    r = f.pieces["L0"].support_radius()
    assert F.radius == r and F.pieces["L0"].cls.radius == r
    assert F.pieces["L0"].exponential_type == r


@settings(max_examples=40, deadline=None)
@given(lattice_coeffs)
def test_plancherel_nonarch(coeffs):
    f = lattice_fn(coeffs, lattice_family([[1, 0], [0, 1]]))
    rep = fourier.plancherel_report(f)
    assert rep["rel_error"] < 1e-10


def test_arch_forward_direct_sum_agrees_across_backends():
    f = gaussian(3.0, 0.05, a=1.3)
    a = fourier.forward(f, backend="numpy").pieces["A0"].samples
    for b in ("numpy",) + (("numba",) if fourier.kernels.HAVE_NUMBA else ()):
        assert np.abs(fourier.forward(f, backend=b).pieces["A0"].samples - a).max() < 1e-10
