"""Exact integer and rational linear algebra used across the package.

Everything here works on Python ints / :class:`fractions.Fraction` so that
lattice questions (integrality, kernels, saturation) are decided exactly.
Matrices come in as anything convertible to nested lists and go out as
``numpy`` integer arrays (``dtype=object`` for rationals).
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product

import numpy as np


def _to_int_rows(a):
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    rows = []
    for row in arr.tolist():
        out = []
        for x in row:
            if isinstance(x, float) and not x.is_integer():
                raise ValueError(f"non-integer entry {x!r}")
            out.append(int(x))
        rows.append(out)
    return rows, arr.shape[0], arr.shape[1]


def _eye(k):
    return [[int(i == j) for j in range(k)] for i in range(k)]


def smith_normal_form(a):
    """Return ``(D, U, V)`` with ``U @ a @ V == D`` exactly.

    ``U`` and ``V`` are unimodular, ``D`` is diagonal with non-negative entries
    ``d_1 | d_2 | ...``.
    """
    A, m, n = _to_int_rows(a)
    U = _eye(m)
    V = _eye(n)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst += q * row_src
        A[dst] = [x + q * y for x, y in zip(A[dst], A[src])]
        U[dst] = [x + q * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, q):  # col_dst += q * col_src
        for row in A:
            row[dst] += q * row[src]
        for row in V:
            row[dst] += q * row[src]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                for j in range(t, n):
                    if A[i][j] != 0 and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                return _finish(A, U, V)
            swap_rows(t, best[0])
            swap_cols(t, best[1])
            p = A[t][t]
            clean = True
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
                    clean = clean and A[i][t] == 0
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
                    clean = clean and A[t][j] == 0
            if not clean:
                continue
            offender = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if A[i][j] % p),
                None,
            )
            if offender is not None:
                add_row(t, offender, 1)
                continue
            break
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            U[t] = [-x for x in U[t]]
    return _finish(A, U, V)


def _finish(A, U, V):
    return (np.array(A, dtype=np.int64).reshape(len(A), -1),
            np.array(U, dtype=np.int64).reshape(len(U), -1),
            np.array(V, dtype=np.int64).reshape(len(V), -1))


def elementary_divisors(a):
    D, _, _ = smith_normal_form(a)
    return [int(D[i, i]) for i in range(min(D.shape)) if D[i, i] != 0]


def int_rank(a) -> int:
    return len(elementary_divisors(a))


def integer_kernel(a):
    """Basis (as columns) of ``{x in Z^n : a x = 0}``."""
    a = np.asarray(a, dtype=np.int64)
    D, _, V = smith_normal_form(a)
    r = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
    return V[:, r:]


def saturation(columns, ambient_dim=None):
    """Saturate the lattice spanned by ``columns`` inside ``Z^m``.

    Returns ``(basis, annihilator)``: ``basis`` has the saturated lattice as its
    columns, ``annihilator`` has as rows a basis of the integer vectors
    orthogonal to it, normalized so that ``annihilator @ Z^m = Z^(m-r)``.
    """
    cols = np.asarray(columns, dtype=np.int64)
    if cols.ndim == 1:
        cols = cols.reshape(-1, 1)
    m = cols.shape[0] if ambient_dim is None else ambient_dim
    if cols.size == 0:
        return np.zeros((m, 0), dtype=np.int64), np.eye(m, dtype=np.int64)
    D, U, _ = smith_normal_form(cols)
    r = sum(1 for i in range(min(D.shape)) if D[i, i] != 0)
    U_inv = integer_inverse(U)
    return U_inv[:, :r], U[r:, :]


def rational_matrix(a):
    arr = np.asarray(a, dtype=object)
    return np.array([[Fraction(x) if not isinstance(x, float) else Fraction(repr(x)) for x in row]
                     for row in arr.reshape(arr.shape[0], -1).tolist()], dtype=object).reshape(arr.shape)


def rational_inverse(a):
    """Exact inverse of a square rational matrix (object array of Fractions)."""
    M = [list(row) for row in rational_matrix(a).tolist()]
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("matrix is not square")
    aug = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [x * inv_p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return np.array([row[n:] for row in aug], dtype=object)


def rational_det(a):
    M = [list(row) for row in rational_matrix(a).tolist()]
    n = len(M)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] / M[col][col]
            if f:
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def integer_inverse(a):
    inv = rational_inverse(a)
    if any(x.denominator != 1 for x in inv.ravel()):
        raise ValueError("matrix is not unimodular")
    return np.array([[int(x) for x in row] for row in inv.tolist()], dtype=np.int64)


def is_integral(a) -> bool:
    return all(Fraction(x).denominator == 1 for x in np.asarray(a, dtype=object).ravel())


def is_unimodular(a) -> bool:
    a = rational_matrix(a)
    return is_integral(a) and abs(rational_det(a)) == 1


def rat_matmul(a, b):
    a = rational_matrix(a)
    b = rational_matrix(b)
    return np.array([[sum((a[i, k] * b[k, j] for k in range(a.shape[1])), Fraction(0))
                      for j in range(b.shape[1])] for i in range(a.shape[0])], dtype=object)


# --- linear algebra over F_2 --------------------------------------------------

def _rref_mod2(rows, ncols):
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                rows[i] = [x ^ y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    return rows[:r], pivots


def rank_mod2(a) -> int:
    a = np.asarray(a, dtype=np.int64) % 2
    rows, _ = _rref_mod2(a.tolist(), a.shape[1])
    return len(rows)


def nullspace_mod2(a):
    """Basis (rows) of ``{x in F_2^n : a x = 0}``, lexicographic pivot order."""
    a = np.asarray(a, dtype=np.int64) % 2
    n = a.shape[1]
    rows, pivots = _rref_mod2(a.tolist(), n)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = [0] * n
        x[f] = 1
        for row, p in zip(rows, pivots):
            x[p] = row[f]
        basis.append(x)
    return np.array(basis, dtype=np.int64).reshape(len(basis), n)


def solve_mod2(a, rhs):
    """Particular solution of ``a x = rhs`` over F_2 (free variables zero), or None."""
    a = np.asarray(a, dtype=np.int64) % 2
    rhs = np.asarray(rhs, dtype=np.int64).reshape(-1) % 2
    n = a.shape[1]
    aug = np.concatenate([a, rhs[:, None]], axis=1).tolist()
    rows, pivots = _rref_mod2(aug, n + 1)
    if n in pivots:
        return None
    x = [0] * n
    for row, p in zip(rows, pivots):
        x[p] = row[n]
    return np.array(x, dtype=np.int64)


def span_mod2(basis):
    """All F_2 combinations of the rows of ``basis`` (lexicographic in coefficients)."""
    basis = np.asarray(basis, dtype=np.int64)
    n = basis.shape[1] if basis.ndim == 2 else 0
    out = []
    for coeffs in product((0, 1), repeat=basis.shape[0]):
        v = np.zeros(n, dtype=np.int64)
        for c, b in zip(coeffs, basis):
            if c:
                v = (v + b) % 2
        out.append(v)
    return np.array(out, dtype=np.int64).reshape(len(out), n)
