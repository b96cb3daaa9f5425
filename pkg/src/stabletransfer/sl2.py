"""SL2(R): elliptic characters, the elliptic inner product and the stable
transfer to the compact torus SO(2).

Elliptic elements are ``t(theta)`` (rotation by ``theta``).  On the regular
elliptic set

* ``Theta_{pi_{+n}} = -e^{i n theta} / (e^{i theta} - e^{-i theta})``,
* ``Theta_{pi_{-n}} = +e^{-i n theta} / (e^{i theta} - e^{-i theta})``,
* ``Theta_{phi_n} = Theta_{pi_{+n}} + Theta_{pi_{-n}} = -sin(n theta) / sin(theta)``,
* ``|D(t(theta))| = |(1 - e^{2 i theta})(1 - e^{-2 i theta})| = 4 sin^2 theta``.

Measure: ``vol(SO(2)) = 1`` (``d theta / 2 pi``) and no rational Weyl
reflection, so ``<pi, pi'>_el = (1/2pi) int |D| Theta_pi conj(Theta_pi') d theta``
and ``m(gamma) = 1`` for elliptic ``gamma``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .functions import (
    CompactSupport, FamilyFunction, GridFunction, LatticeFunction, PointFunction, RapidDecay, TorusFunction,
)
from .pullback import PullbackData, pullback
from .spaces import ComponentDescriptor, FieldKind, SpaceFamily, point_family

REG_TOL = 1e-12
PANEL = 16


class SingularElement(ValueError):
    pass


def _check_regular(theta):
    s = np.sin(np.asarray(theta, dtype=np.float64))
    if np.any(np.abs(s) <= REG_TOL):
        raise SingularElement("t(theta) is singular: |sin theta| <= 1e-12 (the character has a pole)")
    return s


def discrete_series_character(n: int, sign: int, theta):
    """``Theta_{pi_{sign n}}(t(theta))`` for ``sign = +1 / -1``."""
    if n < 1 or sign not in (1, -1):
        raise ValueError("need n >= 1 and sign in {+1, -1}")
    th = np.asarray(theta, dtype=np.float64)
    s = _check_regular(th)
    return -(sign * np.exp(sign * 1j * n * th)) / (2j * s)


def stable_character(n: int, theta):
    if n < 1:
        raise ValueError("need n >= 1")
    th = np.asarray(theta, dtype=np.float64)
    s = _check_regular(th)
    return -np.sin(n * th) / s


def weyl_discriminant_elliptic(theta):
    th = np.asarray(theta, dtype=np.float64)
    return np.abs((1 - np.exp(2j * th)) * (1 - np.exp(-2j * th)))


def normalized_character(label, theta):
    """``|D|^{1/2} Theta`` for ``label = ("phi", n)`` or ``("pi", sign, n)``."""
    root = np.sqrt(weyl_discriminant_elliptic(theta))
    if label[0] == "phi":
        return root * stable_character(label[1], theta)
    return root * discrete_series_character(label[2], label[1], theta)


def gauss_legendre_circle(Q: int):
    """Nodes and weights for ``(1/2pi) int_0^{2pi} . d theta``.

    Composite rule with 16-node panels when ``Q`` is a multiple of 16,
    otherwise one ``Q``-node panel.  Panel edges include 0 and pi only as
    endpoints, never as nodes, so the characters are always evaluated at
    regular points.
    """
    if Q < 1:
        raise ValueError("Q must be positive")
    k = PANEL if Q % PANEL == 0 else Q
    panels = Q // k
    x, w = np.polynomial.legendre.leggauss(k)
    edges = np.linspace(0.0, 2 * math.pi, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel() / (2 * math.pi)
    return nodes, weights


def gram_table(labels, Q: int = 2048, backend=None) -> np.ndarray:
    """``G[i, j] = <labels_i, labels_j>_el`` by quadrature."""
    if Q < 64:
        raise ValueError("Q must be at least 64")
    nodes, weights = gauss_legendre_circle(Q)
    vals = np.array([normalized_character(lab, nodes) for lab in labels], dtype=np.complex128)
    return kernels.hermitian_gram(vals, weights, backend=backend)


def elliptic_inner_product_sl2(n: int, m: int, Q: int = 2048, kind: str = "stable", signs=(1, 1),
                               backend=None) -> complex:
    """``<phi_n, phi_m>_el`` (``kind="stable"``) or ``<pi_{s n}, pi_{s' m}>_el`` (``kind="discrete"``)."""
    if kind == "stable":
        labels = [("phi", n), ("phi", m)]
    elif kind == "discrete":
        labels = [("pi", signs[0], n), ("pi", signs[1], m)]
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return complex(gram_table(labels, Q, backend)[0, 1])


def stable_labels(nmax: int):
    return [("phi", n) for n in range(1, nmax + 1)]


def discrete_labels(nmax: int):
    return [("pi", s, n) for n in range(1, nmax + 1) for s in (1, -1)]


def pseudocoefficient_elliptic(n: int, theta, m_gamma: float = 1.0, label=None):
    """``f[phi_n](t(theta)) = m^{-1} |D|^{1/2} conj(Theta_{phi_n})``.

    ``label`` may name a discrete series ``("pi", sign, n)`` instead.
    """
    if m_gamma <= 0:
        raise ValueError("m_gamma must be positive")
    lab = label or ("phi", n)
    return np.conj(normalized_character(lab, theta)) / m_gamma


# --- stable spectral data and transfer ------------------------------------------

@dataclass
class SL2StableTransform:
    """Spectral-side data ``Phi`` on ``Z_{>0}`` plus two even strands on ``R``.

    ``discrete`` maps ``n >= 1`` to ``Phi(phi_n)``; its certificate is
    ``CompactSupport(radius)`` or ``RapidDecay(radius, C, N)`` in the variable
    ``n``.  The strands are Lambda-side grids in ``lambda`` (or ``None``).
    """

    discrete: dict
    decay: CompactSupport | RapidDecay
    principal_even: GridFunction | None = None
    principal_odd: GridFunction | None = None

    def __post_init__(self):
        self.discrete = {int(n): complex(v) for n, v in sorted(self.discrete.items())}
        if any(n < 1 for n in self.discrete):
            raise ValueError("discrete parameters are positive integers")
        nz = [n for n, v in self.discrete.items() if v != 0]
        if isinstance(self.decay, CompactSupport):
            if nz and max(nz) > self.decay.radius:
                raise ValueError("discrete data outside the declared support")
        else:
            for n, v in self.discrete.items():
                if n > self.decay.radius and v != 0:
                    raise ValueError("discrete data outside the truncation radius")
                if abs(v) > self.decay.C * (1 + n) ** (-self.decay.N) * (1 + 1e-12):
                    raise ValueError(f"decay certificate fails at n={n}")
        for name in ("principal_even", "principal_odd"):
            g = getattr(self, name)
            if g is None:
                continue
            flipped = g.samples[::-1]
            if np.abs(flipped - g.samples).max(initial=0.0) > 1e-12:
                raise ValueError(f"{name} is not even on its samples")

    @property
    def nmax(self) -> int:
        return max(self.discrete, default=0)

    def strand_value(self, strand: str, lam: float) -> complex:
        g = self.principal_even if strand == "even" else self.principal_odd
        if g is None:
            return 0j
        return complex(g.eval(np.array([[lam]]), exact=False)[0])


def discrete_family(nmax: int) -> SpaceFamily:
    """Point family of discrete stable parameters ``phi_1 .. phi_nmax`` (ids ``"1" ..``)."""
    return point_family("sl2-discrete", [str(n) for n in range(1, nmax + 1)],
                        norms=[float(n) for n in range(1, nmax + 1)])


def torus_dual_family(K: int) -> SpaceFamily:
    """Point family of characters ``k`` of SO(2) with ``|k| <= K`` (ids ``"-K" .. "K"``)."""
    return point_family("so2-characters", [str(k) for k in range(-K, K + 1)],
                        norms=[float(abs(k)) for k in range(-K, K + 1)])


def circle_family() -> SpaceFamily:
    """SO(2) with characters indexed by the lattice Z, dual torus iR / 2 pi i Z."""
    return SpaceFamily(FieldKind.compact(), 1, np.eye(1), (ComponentDescriptor("so2", lattice=[[1]]),),
                       "so2")


def default_parameter_map(k: int):
    return ("discrete", abs(k)) if k != 0 else None


def spectral_transfer_to_elliptic_torus(phi: SL2StableTransform, parameter_map=None, K: int | None = None,
                                        zero_image=None) -> LatticeFunction:
    """``k -> Phi(parameter_map(k))`` on the characters of SO(2), as a function on Z.

    The default map sends ``k != 0`` to the discrete parameter ``|k|``.  The
    image of ``k = 0`` is not fixed by default: pass ``zero_image`` (e.g.
    ``("even", 0.0)`` for a point of a principal strand) or it is dropped
    with a warning.  The discrete part is realized as a pullback between
    point families.
    """
    K = phi.nmax if K is None else int(K)
    pmap = parameter_map or default_parameter_map
    nmax = max(phi.nmax, K, 1)  # Phi vanishes beyond its support
    G = discrete_family(nmax)
    H = torus_dual_family(K)
    pairs, extra = [], {}
    for k in range(-K, K + 1):
        target = pmap(k)
        if k == 0 and parameter_map is None:
            target = zero_image
        if target is None:
            if k == 0:
                warnings.warn("image of the trivial character k = 0 is not configured; dropping it",
                              RuntimeWarning, stacklevel=2)
            continue
        kind = target[0]
        if kind == "discrete":
            n = int(target[1])
            if not 1 <= n <= nmax:
                raise ValueError(f"parameter map sends k={k} to undefined discrete component {n}")
            pairs.append((str(k), str(n)))
        elif kind in ("even", "odd"):
            extra[k] = phi.strand_value(kind, float(target[1]))
        else:
            raise ValueError(f"parameter map sends k={k} to unknown component {target!r}")
    values = FamilyFunction(G, {str(n): PointFunction(G, str(n), v) for n, v in phi.discrete.items() if n <= nmax},
                            "PW_f", "Lambda", radius=0.0)
    pd = PullbackData(H, G, pairs, np.zeros((0, 0)))
    pulled = pullback(pd, values)
    coeffs = {}
    for k in range(-K, K + 1):
        p = pulled.pieces.get(str(k))
        v = p.value if p is not None else extra.get(k, 0j)
        if v != 0:
            coeffs[(k,)] = v
    circle = circle_family()
    if isinstance(phi.decay, CompactSupport):
        decay = CompactSupport(float(K))
    else:
        C = phi.decay.C
        for k, v in extra.items():
            C = max(C, abs(v) * (1 + abs(k)) ** phi.decay.N)
        decay = RapidDecay(float(K), C, phi.decay.N)
    return LatticeFunction(circle, "so2", coeffs, decay)


def stable_transform_of_cuspidal(coefficients: dict, Q: int = 2048, m_gamma: float = 1.0, backend=None) -> dict:
    """``Phi(n) = Theta_{phi_n}(f)`` for ``f = sum_k a_k f[phi_k]``, by elliptic quadrature.

    ``Theta_{phi_n}(f) = (1/2pi) int f(t) |D|^{1/2} Theta_{phi_n} m d theta``, so each
    entry is ``sum_k a_k <phi_n, phi_k>_el``; with the orthogonality relations
    this is ``2 a_n``.
    """
    ns = sorted(int(n) for n in coefficients)
    if not ns:
        return {}
    nmax = max(ns)
    nodes, weights = gauss_legendre_circle(Q)
    f = np.zeros(len(nodes), dtype=np.complex128)
    for k in ns:
        f = f + complex(coefficients[k]) * pseudocoefficient_elliptic(k, nodes, m_gamma)
    out = {}
    for n in range(1, nmax + 1):
        integrand = f * normalized_character(("phi", n), nodes) * m_gamma
        out[n] = complex((weights * integrand).sum())
    return out


@dataclass
class PipelineResult:
    stable_transform: dict
    torus_coefficients: dict
    theta: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)


def circle_values(fh: TorusFunction, theta: np.ndarray, chunk: int | None = None, jobs: int = 1) -> np.ndarray:
    """Evaluate on a theta grid; chunks are independent and reassembled in order."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1, 1)
    if chunk is None or chunk >= len(theta):
        return fh.eval(theta)
    parts = [theta[i:i + chunk] for i in range(0, len(theta), chunk)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(fh.eval, parts))
    else:
        results = [fh.eval(p) for p in parts]
    return np.concatenate(results)


def gelfand_graev_pipeline(coefficients: dict, Q: int = 2048, theta_points: int = 256, K: int | None = None,
                           zero_image=None, jobs: int = 1, chunk: int | None = None, backend=None) -> PipelineResult:
    """Stable transform, pullback along the L-embedding, inverse transform on SO(2).

    ``coefficients`` are the weights ``a_k`` of ``f^G = sum_k a_k f[phi_k]``.
    The result is ``f^H(theta) = sum_k Phi(|k|) e^{-i k theta}``.
    """
    from .fourier import lattice_forward

    Phi = stable_transform_of_cuspidal(coefficients, Q, backend=backend)
    nmax = max(Phi, default=1)
    st = SL2StableTransform(Phi, CompactSupport(float(nmax)))
    if zero_image is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lf = spectral_transfer_to_elliptic_torus(st, K=K)
    else:
        lf = spectral_transfer_to_elliptic_torus(st, K=K, zero_image=zero_image)
    fh = lattice_forward(lf)
    theta = 2 * math.pi * np.arange(theta_points) / theta_points
    vals = circle_values(fh, theta, chunk=chunk, jobs=jobs)
    params = {"Q": Q, "theta_points": theta_points, "K": K if K is not None else nmax,
              "zero_image": "drop" if zero_image is None else repr(zero_image)}
    return PipelineResult(Phi, {k[0]: v for k, v in lf.coeffs.items()}, theta, vals, params)
