"""Pullback of Lambda-side functions along ``(T_E, T_V)``.

``(T* phi)_{e1}(lambda) = phi_{T_E(e1)}(T_V lambda)`` where ``T_E`` is defined,
and zero elsewhere.

On lattice-type families the map must carry ``Gamma_1^dual`` into
``Gamma_2^dual``; in lattice coordinates that is the integrality of
``Z = B2^T T B1^{-T}``.  A target frequency ``n2`` (coefficient of
``exp(s <lambda, B2 n2>)``) then lands on the source frequency ``n1 = Z^T n2``
because ``<T lambda, B2 n2> = <lambda, T^T B2 n2> = <lambda, B1 Z^T n2>``.
When ``Z^T`` is not injective several target frequencies land on one source
frequency and their coefficients add.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .functions import (
    Atoms, FamilyFunction, GridFunction, PaleyWiener, PointFunction, Schwartz, TorusFunction,
    _lambda_samples, _piece_radius, schwartz_seminorm,
)
from .spaces import SpaceFamily, ValidationReport

SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class PullbackData:
    source: SpaceFamily
    target: SpaceFamily
    component_map: tuple  # pairs (e1, e2)
    linear_map: np.ndarray  # d2 x d1
    growth: tuple | None = None  # (c, M), archimedean only
    label: str = ""

    def __post_init__(self):
        pairs = tuple((str(a), str(b)) for a, b in (
            self.component_map.items() if isinstance(self.component_map, dict) else self.component_map))
        object.__setattr__(self, "component_map", pairs)
        T = np.asarray(self.linear_map, dtype=np.float64).reshape(self.target.dim, self.source.dim)
        T.setflags(write=False)
        object.__setattr__(self, "linear_map", T)

    @property
    def mapping(self) -> dict:
        return dict(self.component_map)


def lattice_change_matrix(pd: PullbackData, e1: str, e2: str) -> np.ndarray:
    """Exact ``Z = B2^T T B1^{-T}`` (rational object array, d2 x d1)."""
    B1 = pd.source.basis(e1)
    B2 = pd.target.basis(e2)
    if pd.source.dim == 0 or pd.target.dim == 0:
        return np.zeros((pd.target.dim, pd.source.dim), dtype=object)
    T = lattice.rational_matrix(pd.linear_map)
    return lattice.rat_matmul(lattice.rat_matmul(B2.T, T), lattice.rational_inverse(B1.T))


def tightest_growth(pd: PullbackData, M: float = 1.0):
    """Largest ``c`` with ``||T_E(e1)|| >= c ||e1||^(1/M)`` on the mapped components."""
    ratios = []
    for e1, e2 in pd.component_map:
        n1 = pd.source.norm_of(e1)
        if n1 > 0:
            ratios.append(pd.target.norm_of(e2) / n1 ** (1.0 / M))
    return min(ratios) if ratios else math.inf


def validate(pd: PullbackData) -> ValidationReport:
    rep = ValidationReport(True)
    if pd.source.field != pd.target.field:
        rep.add(None, "source and target families live over different fields")
        return rep
    src, tgt = set(pd.source.ids), set(pd.target.ids)
    seen = set()
    for e1, e2 in pd.component_map:
        if e1 not in src:
            rep.add(e1, "unknown source component")
        if e2 not in tgt:
            rep.add(e2, "unknown target component")
        if e1 in seen:
            rep.add(e1, "component map is not a function (repeated source)")
        seen.add(e1)
    if not rep.ok:
        return rep
    T = pd.linear_map
    if pd.source.field.is_archimedean:
        if pd.source.dim:
            sv = np.linalg.svd(T, compute_uv=False)
            rep.details["singular_values"] = sv.tolist()
            if pd.target.dim < pd.source.dim or sv.min() <= SINGULAR_TOL:
                rep.add(None, "linear map is not injective")
        M = pd.growth[1] if pd.growth else 1.0
        c = tightest_growth(pd, M)
        rep.details["growth"] = (c, M)
        if pd.growth is not None and pd.growth[0] > c * (1 + 1e-12):
            rep.add(None, f"growth certificate c={pd.growth[0]} fails (tightest c={c:.6g} at M={M})")
    else:
        for e1, e2 in pd.component_map:
            Z = lattice_change_matrix(pd, e1, e2)
            if not lattice.is_integral(Z):
                rep.add(e1, f"dual lattice not preserved (T_V maps Gamma^dual of {e1} outside that of {e2})")
            else:
                rep.details.setdefault("Z", {})[e1] = np.array([[int(x) for x in row] for row in Z.tolist()],
                                                               dtype=np.int64).reshape(Z.shape)
    return rep


class PullbackError(ValueError):
    pass


def _pull_torus(pd: PullbackData, Z: np.ndarray, e1: str, p: TorusFunction) -> TorusFunction:
    Zt = Z.T
    acc = {}
    for n2, v in sorted(p.coeffs.items()):  # lexicographic in the target frequency
        n1 = tuple(int(x) for x in (Zt @ np.array(n2, dtype=np.int64))) if pd.source.dim else ()
        acc[n1] = acc.get(n1, 0j) + v
    acc = {k: v for k, v in sorted(acc.items()) if v != 0}
    pts = np.array(list(acc), dtype=np.int64).reshape(len(acc), pd.source.dim)
    if pd.source.dim:
        norms = pd.source.metric_norm(pts @ pd.source.basis(e1).T.astype(np.float64))
    else:
        norms = np.zeros(len(acc))
    r = float(norms.max(initial=0.0))
    if isinstance(p.cls, PaleyWiener):
        cls = PaleyWiener(r)
    else:
        N = p.cls.N
        vals = np.abs(np.array(list(acc.values()), dtype=np.complex128))
        C = float((vals * (1 + norms) ** N).max()) if len(vals) else 0.0
        cls = Schwartz(r, C * (1 + 1e-12), N)
    return TorusFunction(pd.source, e1, acc, cls, p.kernel_2pi)


def _pull_grid(pd: PullbackData, e1: str, p: GridFunction) -> GridFunction:
    T = pd.linear_map
    if p.atoms is not None:
        atoms = Atoms(p.atoms.points @ T, p.atoms.weights)
        L, h = p.L, p.h
        tmp = GridFunction(pd.source, e1, np.zeros((2 * int(round(L / h)) + 1,) * pd.source.dim), L, h,
                           side="Lambda", atoms=atoms, kernel_2pi=p.kernel_2pi)
        vals = tmp.eval_complex(tmp.node_points()).reshape(tmp.samples.shape)
        return GridFunction(pd.source, e1, vals, L, h, side="Lambda", atoms=atoms, kernel_2pi=p.kernel_2pi)
    # resample phi o T with the interpolation used for evaluation
    rowsum = np.abs(T).sum(axis=1).max()
    k = int(math.floor(p.L / (rowsum * p.h) + 1e-9))
    if k < 2:
        raise PullbackError(f"component {e1}: grid window too small to resample along T_V")
    L = k * p.h
    n = 2 * k + 1
    tmp = GridFunction(pd.source, e1, np.zeros((n,) * pd.source.dim), L, p.h, side="Lambda",
                       kernel_2pi=p.kernel_2pi)
    vals = p.eval(tmp.node_points() @ T.T, exact=False).reshape(tmp.samples.shape)
    return GridFunction(pd.source, e1, vals, L, p.h, side="Lambda", kernel_2pi=p.kernel_2pi)


def pullback(pd: PullbackData, phi: FamilyFunction, check: bool = True) -> FamilyFunction:
    if phi.side != "Lambda":
        raise PullbackError("pullback acts on Lambda-side functions")
    if phi.family != pd.target:
        raise PullbackError("function does not live on the target family")
    if phi.cls not in ("Schwartz", "PW", "PW_f"):
        raise PullbackError(f"class {phi.cls} is not pulled back")
    rep = validate(pd) if check else None
    if rep is not None and not rep.ok:
        raise PullbackError(f"pullback data invalid: {rep.summary()}")
    fibres = {}
    for e1, e2 in pd.component_map:
        fibres.setdefault(e2, []).append(e1)
    pieces = {}
    for e1, e2 in pd.component_map:
        p = phi.pieces.get(e2)
        if p is None:
            continue
        if isinstance(p, PointFunction):
            pieces[e1] = PointFunction(pd.source, e1, p.value)
        elif isinstance(p, TorusFunction):
            Z = rep.details["Z"][e1] if rep is not None else np.array(
                [[int(x) for x in row] for row in lattice_change_matrix(pd, e1, e2).tolist()], dtype=np.int64)
            pieces[e1] = _pull_torus(pd, Z.reshape(pd.target.dim, pd.source.dim), e1, p)
        elif isinstance(p, GridFunction):
            pieces[e1] = _pull_grid(pd, e1, p)
        else:
            raise PullbackError(f"cannot pull back {type(p).__name__}")
    radius = None
    if phi.cls == "PW_f" and phi.radius is not None:
        radii = [_piece_radius(q) for q in pieces.values()]
        radius = max([r for r in radii if r is not None], default=0.0)
    decay = None
    if phi.cls == "Schwartz" and phi.decay is not None and pd.source.field.is_archimedean:
        decay = _derived_decay(pd.source, pieces, phi.decay[1])
    meta = dict(phi.meta)
    meta["fibre_sizes"] = {e2: len(v) for e2, v in fibres.items()}
    meta.pop("x_grids", None)
    return FamilyFunction(pd.source, pieces, phi.cls, "Lambda", radius, decay, meta)


def _derived_decay(family, pieces, N):
    C = 0.0
    for e, p in pieces.items():
        vals, lam = _lambda_samples(p)
        C = max(C, float((np.abs(vals) * (1 + family.norm_of(e) + lam) ** N).max(initial=0.0)))
    return (C * (1 + 1e-12), N)


def compose(outer: PullbackData, inner: PullbackData) -> PullbackData:
    """Data of the composite ``Lambda1 -> Lambda2 -> Lambda3`` (pull back along ``outer`` first)."""
    if inner.target != outer.source:
        raise PullbackError("families do not chain")
    m2 = outer.mapping
    pairs = tuple((e1, m2[e2]) for e1, e2 in inner.component_map if e2 in m2)
    growth = None
    if inner.growth and outer.growth:
        c1, M1 = inner.growth
        c2, M2 = outer.growth
        growth = (c2 * c1 ** (1.0 / M2), M1 * M2)
    return PullbackData(inner.source, outer.target, pairs, outer.linear_map @ inner.linear_map, growth,
                        f"{outer.label}*{inner.label}")


@dataclass
class SeminormBound:
    lhs: float
    best_N: int | None
    ratio: float
    sweep: list = field(default_factory=list)


def seminorm_bound_report(pd: PullbackData, phi: FamilyFunction, D=None, N: int = 0) -> SeminormBound:
    """``||T* phi||_{D,N}`` against ``||phi||_{D,N'}`` for ``N' = N .. N+10``.

    ``best_N`` is the first ``N'`` whose ratio is finite.  A zero function has
    both sides zero; the ratio is then reported as 0.
    """
    pulled = pullback(pd, phi)
    lhs = schwartz_seminorm(pulled, D, N)
    sweep = []
    best_N, best_ratio = None, math.inf
    for Np in range(N, N + 11):
        rhs = schwartz_seminorm(phi, D, Np)
        ratio = 0.0 if lhs == 0 else (lhs / rhs if rhs > 0 else math.inf)
        sweep.append((Np, rhs, ratio))
        if best_N is None and math.isfinite(ratio):
            best_N, best_ratio = Np, ratio
    return SeminormBound(lhs, best_N, best_ratio, sweep)
