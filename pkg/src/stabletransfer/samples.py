"""Seeded random instances for property checks (verification suites and tests)."""
from __future__ import annotations

import numpy as np

from .elliptic import EllipticBlock
from .fourier import forward
from .functions import (
    CompactSupport, FamilyFunction, GridFunction, LatticeFunction, PaleyWiener, TorusFunction,
)
from .pullback import PullbackData
from .spaces import ComponentDescriptor, FieldKind, SpaceFamily
from .torus import TorusMap


def random_unimodular(rng, d, steps=4):
    B = np.eye(d, dtype=np.int64)
    for _ in range(steps if d > 1 else 0):
        i, j = rng.choice(d, size=2, replace=False)
        B[i] += int(rng.integers(-1, 2)) * B[j]
    if d and rng.random() < 0.5:
        B[0] = -B[0]
    return B


def nonarch_family(rng, d, ncomp, label, q=5, basis=None):
    B = random_unimodular(rng, d) if basis is None else basis
    comps = tuple(ComponentDescriptor(f"{label}{i}", lattice=B) for i in range(ncomp))
    return SpaceFamily(FieldKind.non_archimedean(q), d, np.eye(d), comps, label)


def random_lattice_function(rng, d, max_points=50, family=None, q=5):
    """A ``Cc`` function on one component with at most ``max_points`` support points."""
    fam = family or nonarch_family(rng, d, 1, "g", q)
    e = fam.ids[0]
    npts = int(rng.integers(1, max_points + 1))
    coeffs = {}
    for _ in range(npts):
        k = tuple(int(x) for x in rng.integers(-4, 5, d))
        coeffs[k] = complex(rng.normal(), rng.normal())
    p = LatticeFunction(fam, e, coeffs, CompactSupport(np.inf))
    p = LatticeFunction(fam, e, coeffs, CompactSupport(p.support_radius()))
    return FamilyFunction(fam, {e: p}, "Cc", "X")


def _random_torus_piece(rng, fam, e, npts=8, box=3):
    coeffs = {}
    for _ in range(npts):
        k = tuple(int(x) for x in rng.integers(-box, box + 1, fam.dim))
        coeffs[k] = complex(rng.normal(), rng.normal())
    tmp = TorusFunction(fam, e, coeffs, PaleyWiener(np.inf))
    return TorusFunction(fam, e, coeffs, PaleyWiener(tmp.support_radius()))


def random_nonarch_chain(rng, max_dim=3, max_comp=20):
    """``(outer, inner, phi)`` with ``phi`` a PW_f function on ``outer.target``.

    Linear maps are built from random integral ``Z`` (often non-injective),
    so the dual-lattice condition holds by construction.
    """
    d1, d2, d3 = (int(x) for x in rng.integers(1, max_dim + 1, 3))
    n1, n2, n3 = (int(x) for x in rng.integers(1, max_comp + 1, 3))
    F1 = nonarch_family(rng, d1, n1, "a")
    F2 = nonarch_family(rng, d2, n2, "b")
    F3 = nonarch_family(rng, d3, n3, "c")

    def data(S, T, ns, nt):
        B1 = S.basis(S.ids[0]).astype(np.float64)
        B2 = T.basis(T.ids[0]).astype(np.float64)
        Z = rng.integers(-2, 3, (T.dim, S.dim))
        # unimodular B2 keeps the map integral, hence exactly representable
        lin = np.rint(np.linalg.inv(B2.T)) @ Z @ B1.T
        dom = rng.choice(ns, size=int(rng.integers(1, ns + 1)), replace=False)
        pairs = tuple((S.ids[i], T.ids[int(rng.integers(0, nt))]) for i in sorted(dom))
        return PullbackData(S, T, pairs, lin)

    inner = data(F1, F2, n1, n2)
    outer = data(F2, F3, n2, n3)
    have = rng.choice(n3, size=int(rng.integers(1, n3 + 1)), replace=False)
    pieces = {F3.ids[i]: _random_torus_piece(rng, F3, F3.ids[i]) for i in sorted(have)}
    radius = max(p.support_radius() for p in pieces.values())
    return outer, inner, FamilyFunction(F3, pieces, "PW_f", "Lambda", radius)


def arch_family(d, ncomp, label, norm_step=1.0):
    comps = tuple(ComponentDescriptor(f"{label}{i}", norm=norm_step * i) for i in range(ncomp))
    return SpaceFamily(FieldKind.archimedean(), d, np.eye(d), comps, label)


def random_arch_chain(rng, max_dim=3, max_comp=20):
    """Archimedean chain; ``phi`` carries X-side atoms so pullbacks are exact."""
    d1 = int(rng.integers(1, max_dim + 1))
    d2 = int(rng.integers(d1, max_dim + 1))
    d3 = int(rng.integers(d2, max_dim + 1))
    n1, n2, n3 = (int(x) for x in rng.integers(1, max_comp + 1, 3))
    F1, F2, F3 = arch_family(d1, n1, "a"), arch_family(d2, n2, "b"), arch_family(d3, n3, "c")

    def data(S, T, ns, nt):
        while True:
            lin = rng.normal(size=(T.dim, S.dim))
            if np.linalg.svd(lin, compute_uv=False).min() > 0.2:
                break
        # monotone component map keeps ||T_E e|| >= ||e||
        k = int(rng.integers(1, min(ns, nt) + 1))
        src = np.sort(rng.choice(ns, size=k, replace=False))
        tgt = np.sort(rng.choice(np.arange(nt), size=k, replace=False))
        tgt = np.maximum(tgt, src) if nt > ns else tgt
        pairs = tuple((S.ids[i], T.ids[int(min(j, nt - 1))]) for i, j in zip(src, tgt))
        return PullbackData(S, T, pairs, lin)

    inner = data(F1, F2, n1, n2)
    outer = data(F2, F3, n2, n3)
    have = sorted(rng.choice(n3, size=int(rng.integers(1, min(n3, 4) + 1)), replace=False))
    L, h = 1.0, 0.5
    pieces = {}
    for i in have:
        e = F3.ids[int(i)]
        a = float(rng.uniform(0.5, 2.0))
        pieces[e] = GridFunction.from_callable(F3, e, lambda x, a=a: np.exp(-a * (x ** 2).sum(axis=1)), L, h,
                                               support_radius=None)
    X = FamilyFunction(F3, pieces, "Schwartz", "X")
    phi = forward(X, kernel_2pi=True, grid=(1.0, 0.5))
    return outer, inner, phi


def random_block(rng, dim=None, n_stable=None, label="blk"):
    dim = int(rng.integers(1, 31)) if dim is None else dim
    n_stable = int(rng.integers(1, min(5, dim) + 1)) if n_stable is None else n_stable
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    G = A @ A.conj().T / dim + np.eye(dim)
    G = (G + G.conj().T) / 2
    while True:
        S = rng.integers(0, 3, (n_stable, dim))
        S[S.sum(axis=1) == 0, 0] = 1
        if np.linalg.matrix_rank(S) == n_stable:
            break
    return EllipticBlock(label, tuple(f"{label}.{i}" for i in range(dim)), G, tuple(map(tuple, S)))


def random_torus_map(rng, m, n, ground="real", entries=(-1, 2), q=None):
    while True:
        M = rng.integers(entries[0], entries[1] + 1, (m, n))
        if np.linalg.matrix_rank(M) == m:
            return TorusMap(M, ground, q)
