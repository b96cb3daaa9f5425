"""Fourier transforms between X-side and Lambda-side representations.

Kernel: ``exp(-s <lambda, x>)`` with ``s = 1`` (default) or ``s = 2 pi``
(``kernel_2pi``).  With ``lambda = i xi`` this is ``exp(-i s xi . x)``.

Measures.  On a lattice ``Gamma_e`` the X-side measure is counting measure.
On the torus ``iV*/Gamma_e^dual`` we use the Haar probability measure; that
is the unique constant for which ``inverse(forward(f)) == f`` (character
orthogonality), and :func:`dual_measure_report` exposes it next to the
Lebesgue volume of the torus.  On ``V`` the measure is Lebesgue ``dx`` in
the global coordinates and on ``iV*`` it is ``(s / 2 pi)^d d xi``.

Archimedean transforms are direct Riemann sums on uniform grids, evaluated
in a fixed order.  Lambda-side grids keep the X-side point masses they were
built from so the entire extension (and exact pullbacks) stay available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import kernels
from .functions import (
    Atoms, CompactSupport, FamilyFunction, GridFunction, LatticeFunction, PaleyWiener, PointFunction,
    RapidDecay, Schwartz, TorusFunction, kernel_scale,
)

TWO_PI = 2.0 * math.pi
DROP_TOL = 1e-13  # relative size below which recovered coefficients count as zero


class ClassMismatch(ValueError):
    pass


# --- per-component transforms ---------------------------------------------------

def lattice_forward(p: LatticeFunction, kernel_2pi: bool = False) -> TorusFunction:
    """``sum_x c(x) exp(-s <lambda, x>)``: the coefficient at ``n`` moves to ``-n``."""
    coeffs = {tuple(-k for k in key): v for key, v in p.coeffs.items()}
    if isinstance(p.decay, CompactSupport):
        cls = PaleyWiener(p.decay.radius)
    else:
        cls = Schwartz(p.decay.radius, p.decay.C, p.decay.N)
    return TorusFunction(p.family, p.component, coeffs, cls, kernel_2pi)


def quadrature_size(p: TorusFunction) -> int:
    """Samples per dimension needed for alias-free coefficient recovery."""
    pts = p.lattice_points()
    maxfreq = int(np.abs(pts).max()) if pts.size else 0
    return 2 * maxfreq + 1


def torus_coefficients(p: TorusFunction, M: int | None = None) -> dict:
    """Recover the Fourier coefficients of ``p`` from ``M^d`` samples.

    Uses ``a(n) = M^-d sum_k phi(xi_k) exp(-2 pi i k.n / M)`` on the grid
    ``xi_k = P k / M`` of :meth:`TorusFunction.fundamental_grid`, i.e. the
    probability Haar measure discretized exactly for trigonometric
    polynomials of degree below ``M / 2``.
    """
    d = p.dim
    M = M or quadrature_size(p)
    if M < quadrature_size(p):
        raise ValueError(f"M={M} is below the alias-free size {quadrature_size(p)}")
    if d == 0:
        val = complex(p.values().sum()) if p.coeffs else 0j
        return {(): val} if val != 0 else {}
    samples = p.eval(p.fundamental_grid(M)).reshape((M,) * d)
    # fundamental_grid lists k in [-M//2, M - M//2) lexicographically; move to FFT order.
    samples = np.fft.ifftshift(samples)
    coeffs = np.fft.fftn(samples) / M ** d
    freqs = np.fft.fftfreq(M, d=1.0 / M).astype(np.int64)
    out = {}
    scale = np.abs(coeffs).max(initial=0.0)
    for idx in product(range(M), repeat=d):
        v = coeffs[idx]
        if abs(v) > DROP_TOL * scale:
            out[tuple(int(freqs[i]) for i in idx)] = complex(v)
    return dict(sorted(out.items()))


def torus_inverse(p: TorusFunction, M: int | None = None) -> LatticeFunction:
    coeffs = torus_coefficients(p, M)
    xs = {tuple(-k for k in key): v for key, v in coeffs.items()}
    if isinstance(p.cls, PaleyWiener):
        decay = CompactSupport(p.cls.radius)
    else:
        decay = RapidDecay(p.cls.radius, p.cls.C * (1 + 1e-9), p.cls.N)
    return LatticeFunction(p.family, p.component, xs, decay)


def default_dual_grid(L: float, h: float, kernel_2pi: bool, to_lambda: bool = True):
    """Grid on the other side: same numbers in units where the kernel is ``exp(-2 pi i .)``."""
    f = TWO_PI / kernel_scale(kernel_2pi)
    return (L * f, h * f) if to_lambda else (L / f, h / f)


def grid_forward(g: GridFunction, kernel_2pi: bool = False, L_out=None, h_out=None, backend=None) -> GridFunction:
    """Riemann sum ``h^d sum_x g(x) exp(-i s xi . x)`` on a Lambda-side grid."""
    if g.side != "X":
        raise ClassMismatch("forward expects an X-side grid")
    s = kernel_scale(kernel_2pi)
    if L_out is None:
        L_out, h_out = default_dual_grid(g.L, g.h, kernel_2pi, to_lambda=True)
    d = g.dim
    flat = g.samples.reshape(-1)
    keep = np.nonzero(flat)[0]
    pts = g.node_points()[keep]
    weights = flat[keep] * g.h ** d
    n = 2 * int(round(L_out / h_out)) + 1
    nodes = -L_out + h_out * np.arange(n)
    xis = np.array(list(product(nodes, repeat=d))).reshape(-1, d)
    vals = kernels.exp_sum(s * xis, pts, weights, sign=-1.0, backend=backend)
    return GridFunction(g.family, g.component, vals.reshape((n,) * d), L_out, h_out, side="Lambda",
                        atoms=Atoms(pts, weights), kernel_2pi=kernel_2pi)


def grid_inverse(g: GridFunction, L_out=None, h_out=None, backend=None) -> GridFunction:
    """Riemann sum ``(s / 2 pi)^d h^d sum_xi phi(xi) exp(i s xi . x)`` on an X-side grid."""
    if g.side != "Lambda":
        raise ClassMismatch("inverse expects a Lambda-side grid")
    s = g.scale
    if L_out is None:
        L_out, h_out = default_dual_grid(g.L, g.h, g.kernel_2pi, to_lambda=False)
    d = g.dim
    xis = g.node_points()
    weights = g.samples.reshape(-1) * (s * g.h / TWO_PI) ** d
    n = 2 * int(round(L_out / h_out)) + 1
    nodes = -L_out + h_out * np.arange(n)
    xs = np.array(list(product(nodes, repeat=d))).reshape(-1, d)
    vals = kernels.exp_sum(xs, s * xis, weights, sign=1.0, backend=backend)
    return GridFunction(g.family, g.component, vals.reshape((n,) * d), L_out, h_out, side="X",
                        kernel_2pi=g.kernel_2pi)


# --- family-level transforms ---------------------------------------------------

def forward(f: FamilyFunction, kernel_2pi: bool = False, grid=None, backend=None) -> FamilyFunction:
    """Transform an X-side family function (class ``Cc`` or ``Schwartz``).

    ``grid`` optionally fixes the Lambda-side ``(L, h)`` for archimedean
    pieces.  A ``Cc`` input of support radius ``r`` lands in ``PW_f`` with the
    same radius, i.e. exponential type ``s r``; ``meta["type_inflation"]``
    records how far the discretized atoms sit beyond ``r`` (zero on a grid,
    since nodes outside ``r`` carry no mass).
    """
    if f.side != "X":
        raise ClassMismatch("forward expects an X-side function")
    if f.cls not in ("Cc", "Schwartz"):
        raise ClassMismatch(f"forward expects class Cc or Schwartz, got {f.cls}")
    pieces = {}
    for e, p in f.pieces.items():
        if isinstance(p, PointFunction):
            pieces[e] = PointFunction(p.family, e, p.value)
        elif isinstance(p, LatticeFunction):
            if f.cls == "Cc" and not isinstance(p.decay, CompactSupport):
                raise ClassMismatch(f"component {e}: Cc family with a rapid-decay piece")
            pieces[e] = lattice_forward(p, kernel_2pi)
        elif isinstance(p, GridFunction):
            if f.cls == "Cc" and p.support_radius is None:
                raise ClassMismatch(f"component {e}: Cc family needs a declared support radius")
            if p.support_radius is not None and p.support_radius > p.L:
                raise ValueError(f"component {e}: support exceeds the grid window")
            L_out, h_out = grid if grid is not None else (None, None)
            pieces[e] = grid_forward(p, kernel_2pi, L_out, h_out, backend)
        else:
            raise ClassMismatch(f"component {e}: {type(p).__name__} is not an X-side representation")
    meta = dict(f.meta)
    meta["kernel_2pi"] = kernel_2pi
    meta["x_grids"] = {e: (p.L, p.h) for e, p in f.pieces.items() if isinstance(p, GridFunction)}
    if f.cls == "Cc":
        radius = f.radius
        if radius is None:
            radii = [_x_radius(p) for p in f.pieces.values()]
            radius = max(radii, default=0.0)
        inflation = 0.0
        for p in pieces.values():
            if isinstance(p, GridFunction) and radius > 0:
                inflation = max(inflation, p.atoms.radius / radius - 1.0)
        meta["type_inflation"] = inflation
        meta["exponential_type"] = kernel_scale(kernel_2pi) * radius * (1 + inflation)
        return FamilyFunction(f.family, pieces, "PW_f", "Lambda", radius * (1 + inflation), None, meta)
    return FamilyFunction(f.family, pieces, "Schwartz", "Lambda", None, None, meta)


def _x_radius(p):
    if isinstance(p, LatticeFunction):
        return p.support_radius()
    if isinstance(p, GridFunction):
        return p.support_radius or 0.0
    return 0.0


def inverse(f: FamilyFunction, grid=None, quad_size: int | None = None, backend=None) -> FamilyFunction:
    """Transform a Lambda-side family function (class ``PW``, ``PW_f`` or ``Schwartz``)."""
    if f.side != "Lambda":
        raise ClassMismatch("inverse expects a Lambda-side function")
    if f.cls not in ("PW", "PW_f", "Schwartz"):
        raise ClassMismatch(f"inverse expects class PW, PW_f or Schwartz, got {f.cls}")
    pieces = {}
    x_grids = f.meta.get("x_grids", {})
    for e, p in f.pieces.items():
        if isinstance(p, PointFunction):
            pieces[e] = PointFunction(p.family, e, p.value)
        elif isinstance(p, TorusFunction):
            pieces[e] = torus_inverse(p, quad_size)
        elif isinstance(p, GridFunction):
            L_out, h_out = grid if grid is not None else x_grids.get(e, (None, None))
            pieces[e] = grid_inverse(p, L_out, h_out, backend)
        else:
            raise ClassMismatch(f"component {e}: {type(p).__name__} is not a Lambda-side representation")
    arch = f.family.field.is_archimedean
    if f.cls in ("PW", "PW_f") and not arch:
        cls, radius = "Cc", f.radius
    else:
        # discretized archimedean inverses do not vanish identically off the support
        cls, radius = "Schwartz", None
    meta = {k: v for k, v in f.meta.items() if k not in ("x_grids",)}
    return FamilyFunction(f.family, pieces, cls, "X", radius, None, meta)


# --- reports -------------------------------------------------------------------

@dataclass
class RoundtripRecord:
    component: str
    sup_error: float
    l2_error: float
    params: dict


def _piece_diff(a, b):
    """Sup and L2 (under the X-side measure) of ``a - b``."""
    if isinstance(a, PointFunction):
        err = abs(a.value - b.value)
        return err, err, {}
    if isinstance(a, LatticeFunction):
        keys = sorted(set(a.coeffs) | set(b.coeffs))
        diff = np.array([a.coeffs.get(k, 0j) - b.coeffs.get(k, 0j) for k in keys])
        if diff.size == 0:
            return 0.0, 0.0, {"points": 0}
        return float(np.abs(diff).max()), float(np.sqrt((np.abs(diff) ** 2).sum())), {"points": len(keys)}
    diff = a.samples - b.samples
    sup = float(np.abs(diff).max())
    l2 = float(np.sqrt((np.abs(diff) ** 2).sum() * a.h ** a.dim))
    return sup, l2, {"L": a.L, "h": a.h}


def roundtrip_report(f: FamilyFunction, kernel_2pi: bool = False, coarse_threshold: float = 1e-2,
                     backend=None) -> dict:
    """Errors of ``f - inverse(forward(f))`` per component; never raises.

    ``flagged`` marks components whose sup error exceeds ``coarse_threshold``
    (discretization or truncation dominates at the chosen ``(L, h)``).
    """
    records = []
    error = None
    try:
        back = inverse(forward(f, kernel_2pi, backend=backend), backend=backend)
        for e, p in f.pieces.items():
            q = back.pieces.get(e)
            sup, l2, params = _piece_diff(p, q)
            params["kernel_2pi"] = kernel_2pi
            records.append(RoundtripRecord(e, sup, l2, params))
    except Exception as exc:  # report-style: surface the failure, do not raise
        error = f"{type(exc).__name__}: {exc}"
    sups = [r.sup_error for r in records]
    finite = all(math.isfinite(x) for x in sups) and error is None
    sup = max(sups, default=0.0) if finite else float("nan")
    l2 = math.sqrt(sum(r.l2_error ** 2 for r in records)) if finite else float("nan")
    return {
        "records": records,
        "sup_error": sup,
        "l2_error": l2,
        "finite": finite,
        "flagged": [r.component for r in records if not (r.sup_error <= coarse_threshold)],
        "error": error,
    }


def x_norm_sq(f: FamilyFunction) -> float:
    total = 0.0
    for p in f.pieces.values():
        if isinstance(p, PointFunction):
            total += abs(p.value) ** 2
        elif isinstance(p, LatticeFunction):
            total += float((np.abs(p.values()) ** 2).sum())
        else:
            total += float((np.abs(p.samples) ** 2).sum()) * p.h ** p.dim
    return total


def lambda_norm_sq(f: FamilyFunction, quad_size: int | None = None) -> float:
    """``||phi||^2`` under the dual measures (probability Haar on tori)."""
    total = 0.0
    for p in f.pieces.values():
        if isinstance(p, PointFunction):
            total += abs(p.value) ** 2
        elif isinstance(p, TorusFunction):
            M = quad_size or quadrature_size(p)
            vals = p.eval(p.fundamental_grid(M))
            total += float((np.abs(vals) ** 2).mean())
        else:
            total += float((np.abs(p.samples) ** 2).sum()) * (p.scale * p.h / TWO_PI) ** p.dim
    return total


def plancherel_report(f: FamilyFunction, kernel_2pi: bool = False) -> dict:
    fhat = forward(f, kernel_2pi)
    x = x_norm_sq(f)
    lam = lambda_norm_sq(fhat)
    return {"x_norm_sq": x, "lambda_norm_sq": lam, "abs_error": abs(x - lam),
            "rel_error": abs(x - lam) / max(x, 1e-300)}


def dual_measure_report(family, e: str, kernel_2pi: bool = False) -> dict:
    """The dual-measure constant fixed by exact inversion on one torus component."""
    from .spaces import lattice_covolume
    d = family.dim
    s = kernel_scale(kernel_2pi)
    cov = lattice_covolume(family, e)
    # Lebesgue volume of iV*/Gamma^dual in xi-coordinates under G^-1
    lebesgue = (TWO_PI / s) ** d / cov
    return {"component": e, "total_mass": 1.0, "torus_lebesgue_volume": lebesgue,
            "density_vs_lebesgue": 1.0 / lebesgue, "kernel_2pi": kernel_2pi}
