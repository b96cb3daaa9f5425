import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import torus
from stabletransfer.samples import random_torus_map
from stabletransfer.torus import (
    SingularPoint, TorusError, TorusIntegrand, TorusMap, TwistCharacter, adjunction_check,
    complex_descent_transfer, fiber_integrate, fibre_basepoint, kernel_decomposition, kernel_sanity,
    xi_singular_locus,
)


def gauss(n, a=1.0, sheet=None):
    def fn(w, u):
        v = np.exp(-a * (np.atleast_2d(u) ** 2).sum(axis=1)).astype(complex)
        if sheet is not None:
            eps = np.rint(2 * np.mod(np.atleast_2d(w), 1.0)).astype(int) % 2
            v = v * np.all(eps == np.array(sheet), axis=1)
        return v
    return TorusIntegrand(fn, ("gauss", 1.0, a))


def test_kernel_square():
    kd = kernel_decomposition(TorusMap([[2]]))
    assert kd.finite_part == [(Fraction(0),), (Fraction(1, 2),)]
    assert kd.connected_part.shape == (1, 0)


def test_kernel_sum():
    kd = kernel_decomposition(TorusMap([[1, 1]]))
    assert kd.order == 2 and (Fraction(1, 2), Fraction(1, 2)) in kd.finite_part
    K = kd.connected_part[:, 0]
    assert abs(int(K[0])) == 1 and K[0] == -K[1]


def test_kernel_identity():
    kd = kernel_decomposition(TorusMap(np.eye(2, dtype=int)))
    assert kd.order == 1 and kd.connected_part.shape == (2, 0)


def test_rank_deficient_rejected():
    with pytest.raises(TorusError):
        TorusMap([[1, 1], [2, 2]])


def test_fiber_square_counting():
    r = fiber_integrate(TorusMap([[2]]), TwistCharacter.trivial(1), gauss(1), [0.0], [2.0], "counting")
    assert r.value == pytest.approx(2 * math.exp(-1), abs=1e-15)


def test_fiber_empty_is_exact_zero():
    r = fiber_integrate(TorusMap([[2]]), TwistCharacter.trivial(1), gauss(1), [0.5], [0.0], "counting")
    assert r.empty and r.value == 0


def test_fiber_sum_gaussian():
    r = fiber_integrate(TorusMap([[1, 1]]), TwistCharacter.trivial(2), gauss(2, sheet=(0, 0)), [0.0], [0.0],
                        "counting")
    assert r.value == pytest.approx(math.sqrt(math.pi / 2), abs=1e-10)


def test_decay_certificate_checked():
    bad = TorusIntegrand(lambda w, u: np.ones(len(np.atleast_2d(u)), dtype=complex), ("gauss", 1.0, 1.0))
    with pytest.raises(torus.DecayError):
        fiber_integrate(TorusMap([[1, 1]]), TwistCharacter.trivial(2), bad, [0.0], [0.0])


def test_adjunction_trivial_character():
    tm = TorusMap([[1, 1]])
    rep = adjunction_check(tm, TwistCharacter.trivial(2), gauss(2), [TwistCharacter.trivial(1)])[0]
    assert rep.abs_error < 1e-8


def test_adjunction_square_lambda_one():
    tm = TorusMap([[2]])
    rep = adjunction_check(tm, TwistCharacter.trivial(1), gauss(1), [TwistCharacter((0,), (1.0,))])[0]
    assert rep.rel_error < 1e-6


def test_adjunction_zero():
    rep = adjunction_check(TorusMap([[2]]), TwistCharacter.trivial(1), TorusIntegrand.zero(1),
                           [TwistCharacter((1,), (0.5,))])[0]
    assert rep.lhs == 0 and rep.rhs == 0


def test_adjunction_discrete_model():
    tm = TorusMap([[2, 1]], "discrete", 3)
    chars = [TwistCharacter((1,), (0.3,)), TwistCharacter((0,), (1.0,))]
    for rep in adjunction_check(tm, TwistCharacter((0, 1), (0.0, 0.2)), gauss(2, 0.3), chars):
        assert rep.rel_error < 1e-12


def test_discrete_basepoint_near_minimal_norm():
    tm = TorusMap([[2, 1]], "discrete", 3)
    base = fibre_basepoint(tm, [0.0], [7.0])
    assert (tm.M @ base.u0)[0] == 7
    assert np.linalg.norm(base.u0 - tm.pinv() @ [7.0]) <= np.linalg.norm(kernel_decomposition(tm).connected_part)


def test_sl2c_locus():
    tm = TorusMap([[2]], "complex")
    pieces = xi_singular_locus(tm, [[2]])
    assert len(pieces) == 1 and pieces[0].translation == (Fraction(0),) and pieces[0].codim(1) == 1
    assert pieces[0].contains([0.0], [0.0]) and not pieces[0].contains([0.25], [0.0])


def test_empty_locus():
    assert xi_singular_locus(TorusMap([[1, 1]], "complex"), [[1, 0], [0, 1]]) == []


def weyl_invariant():
    def fn(w, u):
        w, u = np.atleast_2d(w), np.atleast_2d(u)
        return (np.exp(-u[:, 0] ** 2) * (1.5 + np.cos(2 * math.pi * w[:, 0]))).astype(complex)
    return TorusIntegrand(fn, ("gauss", 2.5, 1.0))


def test_complex_descent_finite_sum():
    tm = TorusMap([[2]], "complex")
    chi = TwistCharacter((1,), (0.4,))
    f = weyl_invariant()
    ws, us = 0.3, 0.8
    got = complex_descent_transfer(tm, [[2]], chi, f, [ws], [us], weyl=[[[-1]]], normalization="counting")
    roots = np.array([[ws / 2, us / 2], [ws / 2 + 0.5, us / 2]])
    want = sum(chi(r[:1], r[1:])[0] * f(r[:1], r[1:])[0] for r in roots)
    assert got == pytest.approx(want, abs=1e-14)


def test_complex_descent_rejects_singular():
    with pytest.raises(SingularPoint, match=r"\{exp"):
        complex_descent_transfer(TorusMap([[2]], "complex"), [[2]], TwistCharacter.trivial(1), weyl_invariant(),
                                 [0.0], [0.0])


def test_complex_descent_zero_and_invariance():
    tm = TorusMap([[2]], "complex")
    assert complex_descent_transfer(tm, [[2]], TwistCharacter.trivial(1), TorusIntegrand.zero(1), [0.2], [0.1]) == 0
    odd = TorusIntegrand(lambda w, u: (np.atleast_2d(u)[:, 0] * np.exp(-np.atleast_2d(u)[:, 0] ** 2)).astype(complex),
                         ("gauss", 1.0, 0.5))
    with pytest.raises(TorusError, match="invariant"):
        complex_descent_transfer(tm, [[2]], TwistCharacter.trivial(1), odd, [0.2], [0.1], weyl=[[[-1]]])


maps = st.builds(
    lambda seed, m, extra, ground: random_torus_map(np.random.default_rng(seed), m, m + extra, ground,
                                                    q=4 if ground == "discrete" else None),
    st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(0, 2), st.sampled_from(["real", "complex", "discrete"]))


@settings(max_examples=60, deadline=None)
@given(maps)
def test_kernel_sanity(tm):
    kd = kernel_decomposition(tm)
    assert kernel_sanity(tm, kd)
    assert kd.order == torus.finite_part_order(tm)


@settings(max_examples=40, deadline=None)
@given(maps.filter(lambda tm: tm.ground == "complex"), st.lists(st.lists(st.integers(-2, 2), min_size=4, max_size=4),
                                                                 min_size=1, max_size=3))
def test_locus_codimension(tm, roots):
    roots = [r[:tm.n] for r in roots if any(r[:tm.n])]
    for p in xi_singular_locus(tm, roots):
        assert p.codim(tm.m) >= 1
        assert p.rank == 0 or np.linalg.matrix_rank(p.sublattice) < tm.m


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_empty_fibre_vanishes(seed):
    rng = np.random.default_rng(seed)
    tm = TorusMap([[2, 0], [0, 2]])
    f = gauss(2)
    u = rng.normal(size=2)
    # a negative coordinate is never a square
    w = np.array([0.5, rng.integers(0, 2) / 2])
    assert fiber_integrate(tm, TwistCharacter.trivial(2), f, w, u).value == 0
