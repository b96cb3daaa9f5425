"""Finite elliptic blocks: stable/unstable splitting, change of basis,
pseudocoefficient pairings and the finite abelian indicator identity.

A block is a finite set of labels ``tau`` with a Hermitian positive-definite
Gram matrix ``G[i, j] = <tau_i, tau_j>_el``.  Vectors are coefficient vectors
over the labels and ``<u, v> = u^T G conj(v)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import product

import numpy as np

from . import lattice

DEP_TOL = 1e-12


class BlockError(ValueError):
    pass


@dataclass(frozen=True)
class EllipticBlock:
    label: object
    basis_labels: tuple
    gram: np.ndarray
    stable_vectors: tuple = ()
    iota: tuple | None = None
    weyl_order: tuple | None = None
    orthogonal_mode: bool = False

    def __post_init__(self):
        G = np.asarray(self.gram, dtype=np.complex128)
        G.setflags(write=False)
        object.__setattr__(self, "gram", G)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
        st = tuple(tuple(int(c) for c in v) for v in self.stable_vectors)
        object.__setattr__(self, "stable_vectors", st)
        if self.iota is not None:
            object.__setattr__(self, "iota", tuple(float(x) for x in self.iota))
        if self.weyl_order is not None:
            object.__setattr__(self, "weyl_order", tuple(int(x) for x in self.weyl_order))
        problems = self.problems()
        if problems:
            raise BlockError(f"block {self.label!r}: " + "; ".join(problems))

    @property
    def dim(self) -> int:
        return len(self.basis_labels)

    def stable_matrix(self) -> np.ndarray:
        return np.array(self.stable_vectors, dtype=np.complex128).reshape(len(self.stable_vectors), self.dim)

    def problems(self) -> list[str]:
        out = []
        n = self.dim
        G = self.gram
        if G.shape != (n, n):
            return [f"gram has shape {G.shape}, expected {(n, n)}"]
        if not np.allclose(G, G.conj().T, atol=1e-12, rtol=0):
            out.append("gram is not Hermitian")
        elif n and np.linalg.eigvalsh(G).min() <= 1e-10:
            out.append("gram is not positive-definite")
        for v in self.stable_vectors:
            if len(v) != n:
                out.append(f"stable vector {v} has the wrong length")
            elif any(c < 0 for c in v) or not any(v):
                out.append(f"stable vector {v} must have non-negative integer coefficients, not all zero")
        if self.stable_vectors and not out:
            S = self.stable_matrix()
            if np.linalg.matrix_rank(S, tol=1e-9) < len(self.stable_vectors):
                out.append("stable vectors are linearly dependent")
        for name, vals in (("iota", self.iota), ("weyl_order", self.weyl_order)):
            if vals is not None:
                if len(vals) != n:
                    out.append(f"{name} has length {len(vals)}, expected {n}")
                elif any(x <= 0 for x in vals):
                    out.append(f"{name} entries must be positive")
        if self.orthogonal_mode:
            if self.iota is None or self.weyl_order is None:
                out.append("orthogonal mode needs iota and weyl_order")
            elif not out:
                want = np.diag([w / i for w, i in zip(self.weyl_order, self.iota)])
                if not np.allclose(G, want, atol=1e-12, rtol=0):
                    out.append("orthogonal-mode gram differs from diag(|W| / iota)")
        return out

    def inner(self, u, v) -> complex:
        u = np.asarray(u, dtype=np.complex128)
        v = np.asarray(v, dtype=np.complex128)
        return complex(u @ self.gram @ v.conj())

    def norm_sq(self, u) -> float:
        return self.inner(u, u).real


def unstable_complement(block: EllipticBlock) -> np.ndarray:
    """Gram-orthonormal basis (rows) of the orthogonal complement of the stable span.

    Gram-Schmidt over the standard basis with pivoting: at each step the
    candidate with the largest residual norm is taken (lowest index on ties),
    projected twice against everything accepted so far, and normalized.
    """
    n = block.dim
    G = block.gram

    def ip(u, v):
        return u @ G @ v.conj()

    basis = []  # orthonormal, stable span first
    for v in block.stable_matrix():
        w = v.copy()
        for _ in range(2):
            for q in basis:
                w = w - ip(w, q) * q
        nrm = math.sqrt(max(ip(w, w).real, 0.0))
        if nrm <= DEP_TOL:
            raise BlockError("stable vectors are numerically dependent")
        basis.append(w / nrm)
    n_stable = len(basis)
    remaining = list(range(n))
    unstable = []
    while len(basis) < n and remaining:
        best, best_norm, best_vec = None, -1.0, None
        for i in remaining:
            w = np.zeros(n, dtype=np.complex128)
            w[i] = 1.0
            for q in basis:
                w = w - ip(w, q) * q
            nrm = math.sqrt(max(ip(w, w).real, 0.0))
            if nrm > best_norm + 1e-15:
                best, best_norm, best_vec = i, nrm, w
        remaining.remove(best)
        if best_norm <= DEP_TOL:
            break
        w = best_vec
        for q in basis:  # re-orthogonalization pass
            w = w - ip(w, q) * q
        w = w / math.sqrt(ip(w, w).real)
        basis.append(w)
        unstable.append(w)
    if n_stable + len(unstable) != n:
        raise BlockError("could not complete the stable span to a basis")
    return np.array(unstable, dtype=np.complex128).reshape(len(unstable), n)


@dataclass
class ChangeOfBasis:
    """``b = sum_tau c[b, tau] tau`` and ``tau = sum_b c_inv[tau, b] b``, block-diagonal."""

    c: np.ndarray
    c_inv: np.ndarray
    row_labels: list  # (block label, "stable"/"unstable", index)
    col_labels: list  # (block label, tau)
    offsets: list
    report: dict = field(default_factory=dict)


def change_of_basis(blocks) -> ChangeOfBasis:
    blocks = list(blocks)
    sizes = [b.dim for b in blocks]
    total = sum(sizes)
    c = np.zeros((total, total), dtype=np.complex128)
    c_inv = np.zeros((total, total), dtype=np.complex128)
    rows, cols, offsets = [], [], []
    off = 0
    max_err = 0.0
    for blk in blocks:
        n = blk.dim
        S = blk.stable_matrix()
        U = unstable_complement(blk)
        C = np.vstack([S, U]) if n else np.zeros((0, 0), dtype=np.complex128)
        if n and abs(np.linalg.det(C)) < 1e-14:
            raise BlockError(f"block {blk.label!r}: stable plus unstable vectors are singular")
        Cinv = np.linalg.solve(C, np.eye(n, dtype=np.complex128)) if n else C
        max_err = max(max_err, float(np.abs(C @ Cinv - np.eye(n)).max(initial=0.0)))
        c[off:off + n, off:off + n] = C
        c_inv[off:off + n, off:off + n] = Cinv
        rows += [(blk.label, "stable", i) for i in range(len(S))] + [(blk.label, "unstable", i) for i in range(len(U))]
        cols += [(blk.label, t) for t in blk.basis_labels]
        offsets.append(off)
        off += n
    report = {
        "identity_error": float(np.abs(c @ c_inv - np.eye(total)).max(initial=0.0)),
        "block_identity_error": max_err,
        "max_entry_c": float(np.abs(c).max(initial=0.0)),
        "max_entry_c_inv": float(np.abs(c_inv).max(initial=0.0)),
        "max_block_dim": max(sizes, default=0),
        "blocks": len(blocks),
    }
    return ChangeOfBasis(c, c_inv, rows, cols, offsets, report)


def cross_block_zero(cob: ChangeOfBasis) -> bool:
    """True when every entry outside the diagonal blocks is exactly zero."""
    mask = np.ones(cob.c.shape, dtype=bool)
    bounds = cob.offsets + [cob.c.shape[0]]
    for a, b in zip(bounds[:-1], bounds[1:]):
        mask[a:b, a:b] = False
    return bool(np.all(cob.c[mask] == 0) and np.all(cob.c_inv[mask] == 0))


def pseudocoefficient_pairing(block: EllipticBlock, b, b_prime) -> complex:
    """``f[b](b') = <b, b'>_el``."""
    b = np.asarray(b)
    b_prime = np.asarray(b_prime)
    if b.shape != (block.dim,) or b_prime.shape != (block.dim,):
        raise ValueError(f"vectors must have length {block.dim}")
    return block.inner(b, b_prime)


def elliptic_basis(block: EllipticBlock) -> np.ndarray:
    """Stable vectors followed by the unstable complement (rows)."""
    return np.vstack([block.stable_matrix(), unstable_complement(block)])


def orthogonal_elliptic_basis(block: EllipticBlock) -> np.ndarray:
    """Stable vectors Gram-Schmidt orthogonalized (not normalized), then the unstable complement."""
    out = []
    for v in block.stable_matrix():
        w = v.copy()
        for _ in range(2):
            for q in out:
                w = w - (block.inner(w, q) / block.inner(q, q)) * q
        out.append(w)
    U = unstable_complement(block)
    return np.vstack(out + [U]) if out else U


def duality_table(block: EllipticBlock, basis=None) -> dict:
    """Pairings ``f[b](b')`` over a basis and their distance from ``||b||^2 delta``."""
    B = elliptic_basis(block) if basis is None else np.asarray(basis, dtype=np.complex128)
    P = B @ block.gram @ B.conj().T
    expected = np.diag(np.diag(P).real)
    return {"pairing": P, "norms_sq": np.diag(P).real, "max_error": float(np.abs(P - expected).max(initial=0.0))}


def iota_from_matrix(r) -> float:
    """``|det(1 - r)|^{-1}`` for an integer matrix ``r``, computed exactly."""
    r = np.asarray(r, dtype=np.int64)
    k = r.shape[0]
    det = lattice.rational_det(np.eye(k, dtype=np.int64) - r)
    if det == 0:
        raise ValueError("1 - r is singular; iota is undefined")
    return float(1 / abs(Fraction(det)))


# --- finite abelian groups -----------------------------------------------------

def _lcm(xs):
    return reduce(lambda a, b: a * b // math.gcd(a, b), xs, 1)


def group_elements(orders) -> np.ndarray:
    """All elements of ``prod Z/n_i`` in lexicographic order."""
    orders = [int(n) for n in orders]
    if not orders:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices(orders).reshape(len(orders), -1).T.astype(np.int64)


def generated_subgroup(orders, generators) -> np.ndarray:
    """Elements (rows, sorted) of the subgroup generated by ``generators``; coordinates reduced mod n."""
    n = [int(x) for x in orders]
    mask = np.zeros(n, dtype=bool)
    mask[(0,) * len(n)] = True
    axes = tuple(range(len(n)))
    for g in generators:
        g = np.asarray(g, dtype=np.int64).reshape(len(n)) % np.array(n, dtype=np.int64)
        # doubling: after t rounds the multiples 0 .. 2^t - 1 of g are covered
        # closed under +2^t g already means it holds H + <g>
        step = g.copy()
        while True:
            grown = mask | np.roll(mask, tuple(int(x) for x in step), axis=axes)
            if np.array_equal(grown, mask):
                break
            mask = grown
            step = (2 * step) % np.array(n, dtype=np.int64)
    return np.argwhere(mask).astype(np.int64)


def annihilator_mask(orders, generators) -> np.ndarray:
    """Boolean table over characters ``k``: ``chi_k(g) = 1`` for every generator.

    ``chi_k(a) = exp(2 pi i sum k_i a_i / n_i)``; the test is the exact integer
    congruence ``sum k_i g_i (N / n_i) = 0 mod N`` with ``N = lcm(n)``.
    """
    n = [int(x) for x in orders]
    N = _lcm(n)
    ks = group_elements(n)
    ok = np.ones(len(ks), dtype=bool)
    w = np.array([N // ni for ni in n], dtype=np.int64)
    for g in generators:
        g = np.asarray(g, dtype=np.int64).reshape(len(n)) % np.array(n)
        ok &= ((ks * (g * w)[None, :]).sum(axis=1) % N) == 0
    return ok.reshape(n)


@dataclass
class IndicatorTransform:
    orders: tuple
    subgroup_order: int
    transform: np.ndarray  # rounded integer table over characters
    predicted: np.ndarray  # |B| 1_{B-perp}
    rounding_error: float
    ok: bool


def indicator_transform_from_elements(orders, elements, generators) -> IndicatorTransform:
    n = tuple(int(x) for x in orders)
    ind = np.zeros(n, dtype=np.float64)
    ind[tuple(np.asarray(elements, dtype=np.int64).T)] = 1.0
    # sum_{a in B} chi_k(a)^{-1}; numpy's forward DFT carries exp(-2 pi i k a / n)
    raw = np.fft.fftn(ind)
    rounded = np.rint(raw.real).astype(np.int64)
    err = float(np.abs(raw - rounded).max(initial=0.0))
    predicted = len(elements) * annihilator_mask(n, generators).astype(np.int64)
    ok = err < 1e-6 and np.array_equal(rounded, predicted)
    return IndicatorTransform(n, len(elements), rounded, predicted, err, bool(ok))


def finite_abelian_indicator_transform(orders, generators) -> IndicatorTransform:
    """Character-sum transform of ``1_B`` checked against ``|B| 1_{B-perp}``.

    The transform is computed with an FFT and rounded; it counts as exact when
    the rounding distance is below 1e-6 and the integer table agrees with the
    independently computed annihilator entry by entry.
    """
    n = [int(x) for x in orders]
    gens = [np.asarray(g, dtype=np.int64).reshape(len(n)) % np.array(n, dtype=np.int64) for g in generators]
    elements = generated_subgroup(n, gens)
    return indicator_transform_from_elements(n, elements, gens)


def _divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def subgroups(orders):
    """Yield every subgroup of ``prod Z/n_j`` once, as ``(H, elements)``.

    Subgroups correspond to lattices ``diag(n) Z^r <= L <= Z^r``; each is
    listed by its upper-triangular Hermite normal form ``H`` (columns generate
    ``L``, ``H[j, j] = d_j`` divides ``n_j``, ``0 <= H[i, j] < d_i`` for
    ``i < j``).  Columns are chosen left to right and a branch is cut as soon
    as ``n_j e_j`` fails to lie in the span of the columns chosen so far.
    """
    n = [int(x) for x in orders]
    r = len(n)
    H = np.zeros((r, r), dtype=np.int64)

    def contains_nj(j):
        # back-substitute H c = n_j e_j using columns 0..j
        c = [0] * (j + 1)
        c[j] = n[j] // int(H[j, j])
        for i in range(j - 1, -1, -1):
            acc = 0
            for k in range(i + 1, j + 1):
                acc += int(H[i, k]) * c[k]
            q, rem = divmod(-acc, int(H[i, i]))
            if rem:
                return False
            c[i] = q
        return True

    def rec(j):
        if j == r:
            yield H.copy(), _elements_from_hnf(H, n)
            return
        for d in _divisors(n[j]):
            H[j, j] = d
            ranges = [range(int(H[i, i])) for i in range(j)]
            for off in product(*ranges):
                H[:j, j] = off
                if contains_nj(j):
                    yield from rec(j + 1)
            H[:j, j] = 0
        H[j, j] = 0

    yield from rec(0)


def _elements_from_hnf(H, n):
    r = len(n)
    box = [n[j] // int(H[j, j]) for j in range(r)]
    cs = np.indices(box).reshape(r, -1).T if r else np.zeros((1, 0), dtype=np.int64)
    return (cs @ H.T) % np.array(n, dtype=np.int64)


def check_all_subgroups(orders, chunk: int = 2048) -> dict:
    """Run the indicator identity over every subgroup of ``prod Z/n_j``.

    Same test as :func:`finite_abelian_indicator_transform`, batched: the FFTs
    and the annihilator congruences of up to ``chunk`` subgroups are done in
    one call.
    """
    n = [int(x) for x in orders]
    r = len(n)
    N = _lcm(n)
    w = np.array([N // ni for ni in n], dtype=np.int64)
    ks = group_elements(n)
    count = failures = 0
    max_err = 0.0
    batch_H, batch_ind, batch_size = [], [], []

    def flush():
        nonlocal failures, max_err
        if not batch_H:
            return
        ind = np.stack(batch_ind)
        raw = np.fft.fftn(ind, axes=tuple(range(1, r + 1)))
        rounded = np.rint(raw.real).astype(np.int64)
        err = np.abs(raw - rounded).reshape(len(batch_H), -1).max(axis=1)
        Hs = np.stack(batch_H)  # (S, r, r)
        cong = np.einsum("ai,sij->saj", ks, Hs * w[None, :, None]) % N
        perp = np.all(cong == 0, axis=2)
        predicted = np.array(batch_size, dtype=np.int64)[:, None] * perp
        ok = (err < 1e-6) & np.all(rounded.reshape(len(batch_H), -1) == predicted, axis=1)
        failures += int((~ok).sum())
        max_err = max(max_err, float(err.max()))
        batch_H.clear()
        batch_ind.clear()
        batch_size.clear()

    for H, elems in subgroups(n):
        ind = np.zeros(n)
        ind[tuple(elems.T)] = 1.0
        batch_H.append(H)
        batch_ind.append(ind)
        batch_size.append(len(elems))
        count += 1
        if len(batch_H) >= chunk:
            flush()
    flush()
    return {"orders": tuple(n), "subgroups": count, "failures": failures, "max_rounding_error": max_err}


def abelian_groups_up_to(order: int):
    """Invariant-factor lists ``n_1 | n_2 | ...`` with product <= order.

    The trivial group comes first, written ``[1]``; all other lists have entries > 1.
    """
    out = [[1]]

    def rec(prefix, size):
        last = prefix[-1] if prefix else 1
        for nxt in range(max(2, last), order // size + 1):
            if nxt % last == 0:
                out.append(prefix + [nxt])
                rec(prefix + [nxt], size * nxt)

    rec([], 1)
    return out


# --- pseudo-integral profile ---------------------------------------------------

@dataclass
class PseudoIntegralProfile:
    orders: tuple
    table: np.ndarray  # indexed by cosets X of the quotient
    via_transform: np.ndarray
    max_discrepancy: float


def pseudo_integral_profile(norm_sq: float, orders, stabilizer_generators, delta: float = 1.0) -> PseudoIntegralProfile:
    """``||b||^2 |Q_b|^{-1} delta 1_{Q_b}(X)`` over the finite quotient ``Q``.

    Cross-checked through the character expansion
    ``|Q_b|^{-1} 1_{Q_b} = |Q|^{-1} sum_{chi in Q_b-perp} chi``, where the
    annihilator comes from :func:`annihilator_mask` and the sum is an FFT.
    """
    n = tuple(int(x) for x in orders)
    gens = [np.asarray(g, dtype=np.int64).reshape(len(n)) for g in stabilizer_generators]
    for g in gens:
        if np.any(g < 0) or np.any(g >= np.array(n)):
            raise ValueError(f"stabilizer generator {g.tolist()} is not an element of the quotient")
    elements = generated_subgroup(n, gens)
    ind = np.zeros(n)
    ind[tuple(elements.T)] = 1.0
    table = norm_sq * delta / len(elements) * ind
    perp = annihilator_mask(n, gens).astype(np.float64)
    total = int(np.prod(n)) if n else 1
    # sum_k perp(k) exp(2 pi i k.X / n) = total * ifftn(perp)
    char_sum = np.fft.ifftn(perp) * total if n else perp
    via = (norm_sq * delta / total) * char_sum
    disc = float(np.abs(via - table).max(initial=0.0))
    return PseudoIntegralProfile(n, table, via.real, disc)
