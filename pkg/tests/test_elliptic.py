import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import elliptic
from stabletransfer.elliptic import (
    BlockError, EllipticBlock, change_of_basis, cross_block_zero, finite_abelian_indicator_transform,
    generated_subgroup, pseudo_integral_profile, pseudocoefficient_pairing, unstable_complement,
)

R2 = 1 / math.sqrt(2)


def block(gram, stable=(), label="b", **kw):
    n = len(gram)
    return EllipticBlock(label, [f"t{i}" for i in range(n)], np.array(gram, float), stable, **kw)


def test_complement_one_step():
    U = unstable_complement(block(np.eye(2), [(1, 1)]))
    assert U.shape == (1, 2)
    s = np.sign(U[0, 0].real)
    np.testing.assert_allclose(s * U[0], [R2, -R2], atol=1e-15)


def test_complement_empty_and_full():
    assert unstable_complement(block(np.eye(2), [(1, 0), (0, 1)])).shape == (0, 2)
    G = np.array([[2.0, 0.5], [0.5, 1.0]])
    U = unstable_complement(block(G))
    np.testing.assert_allclose(U @ G @ U.conj().T, np.eye(2), atol=1e-12)


def test_change_of_basis_identity_gram():
    cob = change_of_basis([block(np.eye(2), [(1, 1)])])
    C = cob.c * np.array([[1], [np.sign(cob.c[1, 0].real)]])
    np.testing.assert_allclose(C, [[1, 1], [R2, -R2]], atol=1e-15)
    assert cob.report["identity_error"] < 1e-10


def test_change_of_basis_scaled_gram():
    blk = block(2 * np.eye(2), [(1, 1)])
    assert blk.norm_sq([1, 1]) == 4.0
    cob = change_of_basis([blk])
    # unit vector for gram 2I: (1,-1)/2
    assert np.abs(cob.c[1]).tolist() == pytest.approx([0.5, 0.5])
    np.testing.assert_allclose(cob.c_inv @ cob.c, np.eye(2), atol=1e-12)


def test_two_blocks_exactly_block_diagonal():
    cob = change_of_basis([block(np.eye(2), [(1, 1)], "a"), block([[3.0, 1.0], [1.0, 2.0]], [(2, 1)], "b")])
    assert cross_block_zero(cob)
    assert cob.report["max_block_dim"] == 2 and cob.report["blocks"] == 2


def test_pairing_examples():
    ortho = block([[1.0]], iota=[1.0], weyl_order=[1], orthogonal_mode=True)
    assert pseudocoefficient_pairing(ortho, [1], [1]) == 1
    blk = block(np.eye(2), [(1, 1)])
    assert pseudocoefficient_pairing(blk, [1, 0], [0, 1]) == 0
    assert pseudocoefficient_pairing(blk, [1, 1], [1, 1]) == 2
    with pytest.raises(ValueError):
        pseudocoefficient_pairing(blk, [1], [1, 0])


def test_block_validation():
    with pytest.raises(BlockError, match="positive-definite"):
        block([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(BlockError, match="non-negative"):
        block(np.eye(2), [(1, -1)])
    with pytest.raises(BlockError, match="dependent"):
        block(np.eye(2), [(1, 1), (2, 2)])
    with pytest.raises(BlockError, match="orthogonal-mode"):
        block(np.eye(2), iota=[1.0, 0.5], weyl_order=[1, 1], orthogonal_mode=True)


def test_orthogonal_mode_shape():
    blk = block(np.diag([2.0, 3.0]), iota=[0.5, 1.0], weyl_order=[1, 3], orthogonal_mode=True)
    assert blk.inner([1, 0], [1, 0]) == 2.0 and blk.inner([0, 1], [0, 1]) == 3.0 and blk.inner([1, 0], [0, 1]) == 0


def test_iota_from_matrix():
    # r = -1 on a rank one lattice: |det(1 - r)| = 2
    assert elliptic.iota_from_matrix([[-1]]) == pytest.approx(0.5)


def test_indicator_z4():
    t = finite_abelian_indicator_transform([4], [[2]])
    assert t.ok and t.transform.tolist() == [2, 0, 2, 0]


def test_indicator_whole_and_trivial():
    t = finite_abelian_indicator_transform([2, 3], [[1, 0], [0, 1]])
    assert t.ok and t.transform[0, 0] == 6 and t.transform.sum() == 6
    t = finite_abelian_indicator_transform([2, 3], [])
    assert t.ok and np.all(t.transform == 1)


def test_indicator_reduces_out_of_range_generators():
    assert finite_abelian_indicator_transform([4], [[6]]).transform.tolist() == [2, 0, 2, 0]


def test_profile_examples():
    p = pseudo_integral_profile(2.0, [2], [[1]])
    np.testing.assert_allclose(p.table, [1.0, 1.0])
    assert np.all(pseudo_integral_profile(2.0, [2], [[1]], delta=0.0).table == 0)
    p = pseudo_integral_profile(2.0, [4], [])
    np.testing.assert_allclose(p.table, [2.0, 0, 0, 0])
    assert p.max_discrepancy < 1e-12


def test_profile_rejects_foreign_generator():
    with pytest.raises(ValueError):
        pseudo_integral_profile(1.0, [4], [[5]])


def brute_subgroup(orders, gens):
    n = np.array(orders)
    H = {tuple([0] * len(orders))}
    while True:
        new = {tuple((np.array(h) + g) % n) for h in H for g in gens} | H
        if new == H:
            return H
        H = new


@st.composite
def group_and_gens(draw):
    orders = draw(st.lists(st.integers(1, 12), min_size=1, max_size=3))
    gens = draw(st.lists(st.tuples(*[st.integers(0, o - 1) for o in orders]), max_size=3))
    return orders, gens


@settings(max_examples=150, deadline=None)
@given(group_and_gens())
def test_generated_subgroup_matches_closure(data):
    orders, gens = data
    got = {tuple(int(x) for x in r) for r in generated_subgroup(orders, [np.array(g) for g in gens])}
    assert got == brute_subgroup(orders, [np.array(g) for g in gens])


@settings(max_examples=100, deadline=None)
@given(group_and_gens())
def test_indicator_exact(data):
    orders, gens = data
    assert finite_abelian_indicator_transform(orders, gens).ok


@st.composite
def random_blocks(draw):
    n = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    G = A @ A.conj().T + n * np.eye(n)
    k = draw(st.integers(0, n))
    while True:
        S = rng.integers(0, 4, size=(k, n))
        if k == 0 or (np.all(S.sum(axis=1) > 0) and np.linalg.matrix_rank(S) == k):
            break
    return EllipticBlock("r", [f"t{i}" for i in range(n)], G, [tuple(r) for r in S])


@settings(max_examples=80, deadline=None)
@given(random_blocks())
def test_splitting_reconstruction(blk):
    U = unstable_complement(blk)
    G = blk.gram
    assert len(U) + len(blk.stable_vectors) == blk.dim
    np.testing.assert_allclose(U @ G @ U.conj().T, np.eye(len(U)), atol=1e-10)
    if blk.stable_vectors:
        assert np.abs(blk.stable_matrix() @ G @ U.conj().T).max(initial=0) < 1e-10
    cob = change_of_basis([blk])
    # tau = sum_b c_inv[tau, b] b
    np.testing.assert_allclose(cob.c_inv @ cob.c, np.eye(blk.dim), atol=1e-10)
