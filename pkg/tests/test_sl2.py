import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import sl2
from stabletransfer.functions import CompactSupport, GridFunction, RapidDecay
from stabletransfer.sl2 import (
    SingularElement, SL2StableTransform, discrete_series_character, elliptic_inner_product_sl2,
    pseudocoefficient_elliptic, spectral_transfer_to_elliptic_torus, stable_character,
    weyl_discriminant_elliptic,
)

regular = st.floats(1e-3, 2 * math.pi - 1e-3).filter(lambda t: abs(math.sin(t)) > 1e-3)


def test_discrete_series_examples():
    assert discrete_series_character(1, 1, math.pi / 2) == pytest.approx(-0.5, abs=1e-15)
    assert discrete_series_character(1, -1, math.pi / 2) == pytest.approx(-0.5, abs=1e-15)


def test_singular_refused():
    with pytest.raises(SingularElement):
        discrete_series_character(2, 1, 1e-13)
    with pytest.raises(SingularElement):
        stable_character(2, math.pi)


def test_stable_character_examples():
    assert stable_character(1, 0.77) == pytest.approx(-1.0, abs=1e-15)
    assert stable_character(2, math.pi / 3) == pytest.approx(-1.0, abs=1e-14)
    assert stable_character(3, math.pi / 2) == pytest.approx(1.0, abs=1e-14)


def test_weyl_discriminant_examples():
    assert weyl_discriminant_elliptic(math.pi / 2) == pytest.approx(4.0)
    assert weyl_discriminant_elliptic(0.0) == 0.0
    assert weyl_discriminant_elliptic(math.pi / 6) == pytest.approx(1.0)


def test_inner_products():
    assert abs(elliptic_inner_product_sl2(2, 2) - 2) < 1e-8
    assert abs(elliptic_inner_product_sl2(2, 3)) < 1e-8
    assert abs(elliptic_inner_product_sl2(3, 3, kind="discrete", signs=(1, 1)) - 1) < 1e-8
    assert abs(elliptic_inner_product_sl2(3, 3, kind="discrete", signs=(1, -1))) < 1e-8
    with pytest.raises(ValueError):
        elliptic_inner_product_sl2(1, 1, Q=32)


def test_pseudocoefficient_examples():
    assert pseudocoefficient_elliptic(1, math.pi / 2) == pytest.approx(-2.0)
    assert abs(pseudocoefficient_elliptic(2, math.pi / 2)) < 1e-15
    assert pseudocoefficient_elliptic(1, math.pi / 2, m_gamma=2.0) == pytest.approx(-1.0)


def test_transfer_delta():
    with pytest.warns(RuntimeWarning, match="k = 0"):
        out = spectral_transfer_to_elliptic_torus(SL2StableTransform({5: 1.0}, CompactSupport(5.0)))
    assert out.coeffs == {(-5,): 1.0, (5,): 1.0}


def test_transfer_zero():
    with pytest.warns(RuntimeWarning):
        out = spectral_transfer_to_elliptic_torus(SL2StableTransform({}, CompactSupport(0.0)), K=3)
    assert out.coeffs == {}


def test_transfer_rapid_decay():
    data = {n: math.exp(-n) for n in range(1, 21)}
    # e^{-n} <= 4! (1+n)^{-4} e^{1}
    cert = RapidDecay(20.0, 24 * math.e, 4)
    with pytest.warns(RuntimeWarning):
        out = spectral_transfer_to_elliptic_torus(SL2StableTransform(data, cert))
    assert all(out.coeffs[(k,)] == pytest.approx(math.exp(-abs(k))) for k in range(-20, 21) if k)
    assert (0,) not in out.coeffs
    assert isinstance(out.decay, RapidDecay) and out.decay.N == 4


def test_transfer_zero_image_from_strand():
    fam = sl2.circle_family()
    lam = np.linspace(-2, 2, 41)
    g = GridFunction(fam, "so2", np.exp(-lam ** 2).astype(complex), 2.0, 0.1, side="Lambda")
    phi = SL2StableTransform({1: 1.0}, CompactSupport(1.0), principal_even=g)
    out = spectral_transfer_to_elliptic_torus(phi, zero_image=("even", 0.0))
    assert out.coeffs[(0,)] == pytest.approx(1.0)


def test_transfer_undefined_component():
    with pytest.raises(ValueError):
        spectral_transfer_to_elliptic_torus(SL2StableTransform({1: 1.0}, CompactSupport(1.0)),
                                            parameter_map=lambda k: ("discrete", 7))


def test_strand_must_be_even():
    fam = sl2.circle_family()
    lam = np.linspace(-1, 1, 21)
    g = GridFunction(fam, "so2", lam.astype(complex), 1.0, 0.1, side="Lambda")
    with pytest.raises(ValueError, match="even"):
        SL2StableTransform({}, CompactSupport(0.0), principal_odd=g)


def test_pipeline_doubles_coefficients():
    res = sl2.gelfand_graev_pipeline({1: 1.0, 3: -0.5}, Q=1024, theta_points=16)
    assert res.stable_transform[1] == pytest.approx(2.0, abs=1e-10)
    assert res.stable_transform[2] == pytest.approx(0.0, abs=1e-10)
    assert res.stable_transform[3] == pytest.approx(-1.0, abs=1e-10)
    th = res.theta
    want = 2 * 2 * np.cos(th) - 2 * np.cos(3 * th)
    np.testing.assert_allclose(res.values, want, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), regular)
def test_stability_identity(n, th):
    total = discrete_series_character(n, 1, th) + discrete_series_character(n, -1, th)
    assert abs(total - stable_character(n, th)) <= 1e-12 * max(1.0, abs(stable_character(n, th)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), regular)
def test_parity_and_swap(n, th):
    assert abs(stable_character(n, -th) - stable_character(n, th)) <= 1e-12 * max(1.0, abs(stable_character(n, th)))
    assert abs(discrete_series_character(n, 1, -th) - discrete_series_character(n, -1, th)) < 1e-11


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 60), st.floats(1e-9, 2 * math.pi - 1e-9).filter(lambda t: abs(math.sin(t)) > 1e-11))
def test_normalized_character_bounded(n, th):
    assert abs(sl2.normalized_character(("phi", n), th)) <= 2 + 1e-9


def test_quadrature_converged():
    labels = sl2.stable_labels(20)
    diff = np.abs(sl2.gram_table(labels, 2048) - sl2.gram_table(labels, 1024)).max()
    assert diff < 1e-10
