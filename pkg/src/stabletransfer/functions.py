"""Finite representations of functions on ``X`` and on ``Lambda``.

Four per-component representations:

* :class:`LatticeFunction` -- finitely many values on ``Gamma_e`` (X-side,
  lattice type), compactly supported or with a rapid-decay certificate.
* :class:`TorusFunction` -- a finite Fourier series on ``iV*/Gamma_e^dual``
  (Lambda-side, lattice type), ``lambda -> sum_x c(x) e^{<lambda, x>}``.
* :class:`GridFunction` -- samples on a uniform cube grid ``[-L, L]^d``
  (archimedean, either side).  Lambda-side grids produced by the Fourier
  transform remember their X-side atoms, which gives exact evaluation and the
  entire extension.
* :class:`PointFunction` -- a single value on a zero-dimensional component.

:class:`FamilyFunction` bundles per-component pieces with a class tag.

Decay certificates are supplied by the caller and verified against the
stored data at construction time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Union

import numpy as np

from . import kernels
from .spaces import SpaceFamily

TWO_PI = 2.0 * math.pi
_CERT_SLACK = 1e-12


def kernel_scale(kernel_2pi: bool) -> float:
    """Factor in front of ``<lambda, x>`` in the Fourier kernel."""
    return TWO_PI if kernel_2pi else 1.0


# --- certificates -------------------------------------------------------------

@dataclass(frozen=True)
class CompactSupport:
    radius: float


@dataclass(frozen=True)
class RapidDecay:
    """``|c(x)| <= C (1 + ||x||)^(-N)`` on the stored data, truncated at ``radius``."""

    radius: float
    C: float
    N: float


@dataclass(frozen=True)
class PaleyWiener:
    radius: float


@dataclass(frozen=True)
class Schwartz:
    """Decay certificate ``(C, N)`` for coefficients / samples, truncation ``radius``."""

    radius: float
    C: float
    N: float


class CertificateError(ValueError):
    pass


def _check_decay(values, weights_base, C, N, what):
    bound = C * (1.0 + weights_base) ** (-float(N))
    bad = np.abs(values) > bound * (1 + _CERT_SLACK) + 1e-300
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CertificateError(
            f"{what}: |value| = {abs(values[i]):.6g} exceeds C(1+r)^-N = {bound[i]:.6g} at r = {weights_base[i]:.6g}"
        )


# --- lattice-side representations ---------------------------------------------

def _as_coeff_dict(coeffs, dim):
    out = {}
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    for key, val in items:
        k = tuple(int(v) for v in np.atleast_1d(key)) if dim else ()
        if len(k) != dim:
            raise ValueError(f"lattice point {key!r} does not have dimension {dim}")
        out[k] = out.get(k, 0j) + complex(val)
    return dict(sorted(out.items()))


class _CoefficientRep:
    """Shared storage for coefficient representations on ``Gamma_e``."""

    def __init__(self, family: SpaceFamily, component: str, coeffs):
        if not family.field.lattice_type:
            raise ValueError("coefficient representations need a lattice-type family")
        self.family = family
        self.component = component
        self.basis = family.basis(component)
        self.coeffs = _as_coeff_dict(coeffs, family.dim)

    @property
    def dim(self) -> int:
        return self.family.dim

    def lattice_points(self) -> np.ndarray:
        return np.array(list(self.coeffs.keys()), dtype=np.int64).reshape(len(self.coeffs), self.dim)

    def values(self) -> np.ndarray:
        return np.array(list(self.coeffs.values()), dtype=np.complex128)

    def points_in_v(self) -> np.ndarray:
        """Coefficient positions ``B n`` in the global coordinates of V."""
        return self.lattice_points() @ self.basis.T.astype(np.float64) if self.dim else np.zeros((len(self.coeffs), 0))

    def point_norms(self) -> np.ndarray:
        if not self.coeffs:
            return np.zeros(0)
        if self.dim == 0:
            return np.zeros(len(self.coeffs))
        return self.family.metric_norm(self.points_in_v())

    def support_radius(self) -> float:
        vals = self.values()
        norms = self.point_norms()
        nz = np.abs(vals) > 0
        return float(norms[nz].max()) if nz.any() else 0.0

    def _combine(self, other, a, b):
        if other.family != self.family or other.component != self.component:
            raise ValueError("cannot combine functions on different components")
        out = {k: a * v for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0j) + b * v
        return out


def _combine_cert(c1, c2, a, b):
    if isinstance(c1, (CompactSupport, PaleyWiener)) and type(c1) is type(c2):
        return type(c1)(max(c1.radius, c2.radius))
    if isinstance(c1, (RapidDecay, Schwartz)) and type(c1) is type(c2):
        n = min(c1.N, c2.N)
        return type(c1)(max(c1.radius, c2.radius), abs(a) * c1.C + abs(b) * c2.C, n)
    raise ValueError(f"cannot combine certificates {c1!r} and {c2!r}")


def _scale_cert(c, a):
    if isinstance(c, (RapidDecay, Schwartz)):
        return type(c)(c.radius, abs(a) * c.C, c.N)
    return c


class LatticeFunction(_CoefficientRep):
    """Finitely many values ``x -> c(x)`` on the lattice ``Gamma_e`` (keys in Gamma_e-coordinates)."""

    def __init__(self, family, component, coeffs, decay: CompactSupport | RapidDecay):
        super().__init__(family, component, coeffs)
        self.decay = decay
        self._verify()

    def _verify(self):
        norms = self.point_norms()
        vals = self.values()
        nz = np.abs(vals) > 0
        if isinstance(self.decay, CompactSupport):
            if np.any(norms[nz] > self.decay.radius * (1 + _CERT_SLACK) + 1e-12):
                raise CertificateError(
                    f"support radius {norms[nz].max():.6g} exceeds declared {self.decay.radius}")
        elif isinstance(self.decay, RapidDecay):
            if np.any(norms[nz] > self.decay.radius * (1 + _CERT_SLACK) + 1e-12):
                raise CertificateError("stored coefficient outside the truncation radius")
            _check_decay(vals, norms, self.decay.C, self.decay.N, "rapid decay")
        else:
            raise TypeError(f"unsupported decay class {self.decay!r}")

    def eval(self, n) -> complex:
        key = tuple(int(v) for v in np.atleast_1d(n)) if self.dim else ()
        return self.coeffs.get(key, 0j)

    def linear_combination(self, other: "LatticeFunction", a=1.0, b=1.0) -> "LatticeFunction":
        return LatticeFunction(self.family, self.component, self._combine(other, a, b),
                               _combine_cert(self.decay, other.decay, a, b))

    def __add__(self, other):
        return self.linear_combination(other)

    def __rmul__(self, a):
        return LatticeFunction(self.family, self.component,
                               {k: a * v for k, v in self.coeffs.items()}, _scale_cert(self.decay, a))

    def __repr__(self):
        return f"LatticeFunction({self.component!r}, {len(self.coeffs)} points, {self.decay})"


class TorusFunction(_CoefficientRep):
    """Finite Fourier series ``lambda -> sum_x c(x) exp(s <lambda, x>)`` on a compact torus.

    ``s`` is 1, or ``2 pi`` when ``kernel_2pi`` is set.  Points are passed by
    their ``iV*`` coordinates ``xi``; complex points add a real part ``eta``.
    """

    def __init__(self, family, component, coeffs, cls: PaleyWiener | Schwartz, kernel_2pi: bool = False):
        super().__init__(family, component, coeffs)
        self.cls = cls
        self.kernel_2pi = bool(kernel_2pi)
        self._verify()

    def _verify(self):
        norms = self.point_norms()
        vals = self.values()
        nz = np.abs(vals) > 0
        if isinstance(self.cls, PaleyWiener):
            if np.any(norms[nz] > self.cls.radius * (1 + _CERT_SLACK) + 1e-12):
                raise CertificateError(
                    f"coefficient support radius {norms[nz].max():.6g} exceeds PW radius {self.cls.radius}")
        elif isinstance(self.cls, Schwartz):
            if np.any(norms[nz] > self.cls.radius * (1 + _CERT_SLACK) + 1e-12):
                raise CertificateError("stored coefficient outside the truncation radius")
            _check_decay(vals, norms, self.cls.C, self.cls.N, "Schwartz coefficient decay")
        else:
            raise TypeError(f"unsupported class {self.cls!r}")

    @property
    def scale(self) -> float:
        return kernel_scale(self.kernel_2pi)

    @property
    def exponential_type(self) -> float:
        return self.scale * self.support_radius()

    def period_basis(self) -> np.ndarray:
        """Columns generate the period lattice in ``xi``-coordinates."""
        if self.dim == 0:
            return np.zeros((0, 0))
        return (TWO_PI / self.scale) * np.linalg.inv(self.basis.T.astype(np.float64))

    def eval(self, xi, eta=None, derivative=None) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        if self.dim == 0:
            xi = np.zeros((xi.shape[0] if xi.size else 1, 0))
        coeffs = self.values()
        freqs = self.scale * self.points_in_v()
        if derivative is not None and any(derivative):
            # d/dxi_j of exp(i s xi.x) = i s x_j exp(...)
            mult = np.ones(len(coeffs), dtype=np.complex128)
            for j, order in enumerate(derivative):
                mult = mult * (1j * freqs[:, j]) ** int(order)
            coeffs = coeffs * mult
        re = None if eta is None else self.scale * np.atleast_2d(np.asarray(eta, dtype=np.float64))
        return kernels.exp_sum(self.scale * xi, self.points_in_v(), coeffs, sign=1.0, re_pts=re)

    def linear_combination(self, other: "TorusFunction", a=1.0, b=1.0) -> "TorusFunction":
        if other.kernel_2pi != self.kernel_2pi:
            raise ValueError("kernel conventions differ")
        return TorusFunction(self.family, self.component, self._combine(other, a, b),
                             _combine_cert(self.cls, other.cls, a, b), self.kernel_2pi)

    def __add__(self, other):
        return self.linear_combination(other)

    def __rmul__(self, a):
        return TorusFunction(self.family, self.component, {k: a * v for k, v in self.coeffs.items()},
                             _scale_cert(self.cls, a), self.kernel_2pi)

    def to_schwartz(self, N: float = 10.0) -> "TorusFunction":
        """Reclassify as Schwartz with a certificate derived from the stored coefficients."""
        norms = self.point_norms()
        vals = self.values()
        C = float(np.max(np.abs(vals) * (1 + norms) ** N)) if len(vals) else 0.0
        cert = Schwartz(radius=self.support_radius(), C=C, N=N)
        return TorusFunction(self.family, self.component, self.coeffs, cert, self.kernel_2pi)

    def fundamental_grid(self, M: int) -> np.ndarray:
        """``M^d`` points ``xi_k = P (k / M)`` of one fundamental domain, ``k`` centred on 0.

        ``P`` is :meth:`period_basis`.  Centring keeps each point near its
        minimal representative, which is what norms on the torus use.
        """
        if self.dim == 0:
            return np.zeros((1, 0))
        ks = np.arange(M) - M // 2
        grid = np.array(list(product(ks, repeat=self.dim)), dtype=np.float64) / M
        return grid @ self.period_basis().T

    def __repr__(self):
        return f"TorusFunction({self.component!r}, {len(self.coeffs)} terms, {self.cls})"


# --- archimedean grids ----------------------------------------------------------

@dataclass(frozen=True)
class Atoms:
    """X-side point masses: ``phi(lambda) = sum_p w_p exp(-s <lambda, x_p>)``."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def radius(self) -> float:
        if len(self.weights) == 0:
            return 0.0
        return float(np.sqrt((self.points ** 2).sum(axis=1)).max())


class GridFunction:
    """Samples on the uniform grid ``{-L + k h}^d``, ``k = 0 .. 2L/h``.

    ``side`` is ``"X"`` or ``"Lambda"``.  X-side grids may declare
    ``support_radius`` (the ``C_r^infty`` condition; samples outside vanish).
    Lambda-side grids may carry a Schwartz certificate and, when produced by
    :func:`stabletransfer.fourier.forward`, the X-side ``atoms`` they came from.
    Evaluation between nodes is multilinear (first order).
    """

    def __init__(self, family: SpaceFamily, component: str, samples, L: float, h: float,
                 side: str = "X", support_radius: float | None = None,
                 decay: Schwartz | None = None, atoms: Atoms | None = None, kernel_2pi: bool = False,
                 norm_metric=None):
        if side not in ("X", "Lambda"):
            raise ValueError(f"side must be 'X' or 'Lambda', got {side!r}")
        self.family = family
        self.component = component
        family.component(component)
        self.dim = family.dim
        self.L = float(L)
        self.h = float(h)
        ratio = self.L / self.h
        if self.h <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"grid window L={L} is not an integral multiple of h={h}")
        self.n = 2 * int(round(ratio)) + 1
        arr = np.asarray(samples, dtype=np.complex128)
        if arr.shape != (self.n,) * self.dim:
            raise ValueError(f"samples have shape {arr.shape}, expected {(self.n,) * self.dim}")
        self.samples = arr
        self.side = side
        self.support_radius = support_radius
        self.decay = decay
        self.atoms = atoms
        self.kernel_2pi = bool(kernel_2pi)
        self._verify()

    @classmethod
    def from_callable(cls, family, component, fn, L, h, side="X", support_radius=None, **kw):
        g = cls.__new__(cls)
        g.dim = family.dim
        n = 2 * int(round(L / h)) + 1
        nodes = -L + h * np.arange(n)
        pts = np.array(list(product(nodes, repeat=family.dim))).reshape(-1, family.dim)
        vals = np.asarray(fn(pts), dtype=np.complex128).reshape((n,) * family.dim)
        if support_radius is not None:
            vals = np.where(_node_radius(pts, family).reshape(vals.shape) <= support_radius, vals, 0)
        return cls(family, component, vals, L, h, side=side, support_radius=support_radius, **kw)

    @property
    def scale(self) -> float:
        return kernel_scale(self.kernel_2pi)

    def nodes(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def node_points(self) -> np.ndarray:
        return np.array(list(product(self.nodes(), repeat=self.dim))).reshape(-1, self.dim)

    def _verify(self):
        if self.side == "X" and self.support_radius is not None:
            if self.support_radius > self.L * (1 + 1e-12):
                raise CertificateError(f"support radius {self.support_radius} exceeds window {self.L}")
            r = _node_radius(self.node_points(), self.family).reshape(self.samples.shape)
            if np.any((r > self.support_radius * (1 + 1e-12)) & (self.samples != 0)):
                raise CertificateError("samples do not vanish outside the declared support radius")
        if self.decay is not None:
            r = self.family.norm_of(self.component) + _node_radius(self.node_points(), self.family, dual=self.side == "Lambda")
            _check_decay(self.samples.reshape(-1), r, self.decay.C, self.decay.N, "Schwartz sample decay")

    def eval(self, points, exact: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.dim == 0:
            return np.full(pts.shape[0], complex(self.samples))
        if self.side == "Lambda" and exact and self.atoms is not None:
            return self.eval_complex(pts)
        if np.any(np.abs(pts) > self.L * (1 + 1e-12)):
            raise ValueError(f"point outside the grid window [-{self.L}, {self.L}]^{self.dim}")
        return kernels.multilinear_interp(self.samples, -self.L, self.h, pts)

    def eval_complex(self, xi, eta=None) -> np.ndarray:
        """Entire extension ``phi(eta + i xi)`` from the X-side atoms."""
        if self.atoms is None:
            raise ValueError("no X-side preimage stored; the entire extension is unavailable")
        s = self.scale
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        re = None if eta is None else s * np.atleast_2d(np.asarray(eta, dtype=np.float64))
        return kernels.exp_sum(s * xi, self.atoms.points, self.atoms.weights, sign=-1.0, re_pts=re)

    def linear_combination(self, other: "GridFunction", a=1.0, b=1.0) -> "GridFunction":
        if (other.L, other.h, other.side, other.component) != (self.L, self.h, self.side, self.component):
            raise ValueError("grids are not compatible")
        atoms = None
        if self.atoms is not None and other.atoms is not None:
            atoms = Atoms(np.concatenate([self.atoms.points, other.atoms.points]),
                          np.concatenate([a * self.atoms.weights, b * other.atoms.weights]))
        radius = None
        if self.support_radius is not None and other.support_radius is not None:
            radius = max(self.support_radius, other.support_radius)
        decay = None
        if self.decay is not None and other.decay is not None:
            decay = _combine_cert(self.decay, other.decay, a, b)
        return GridFunction(self.family, self.component, a * self.samples + b * other.samples, self.L, self.h,
                            self.side, radius, decay, atoms, self.kernel_2pi)

    def __add__(self, other):
        return self.linear_combination(other)

    def __rmul__(self, a):
        atoms = None if self.atoms is None else Atoms(self.atoms.points, a * self.atoms.weights)
        decay = None if self.decay is None else _scale_cert(self.decay, a)
        return GridFunction(self.family, self.component, a * self.samples, self.L, self.h, self.side,
                            self.support_radius, decay, atoms, self.kernel_2pi)

    def __repr__(self):
        return f"GridFunction({self.component!r}, side={self.side}, L={self.L}, h={self.h}, d={self.dim})"


def _node_radius(points, family: SpaceFamily, dual: bool = False) -> np.ndarray:
    if family.dim == 0:
        return np.zeros(len(points))
    return family.dual_norm(points) if dual else family.metric_norm(points)


@dataclass
class PointFunction:
    """A function on a zero-dimensional component: one complex number."""

    family: SpaceFamily
    component: str
    value: complex

    def eval(self, points=None) -> np.ndarray:
        n = 1 if points is None else max(1, np.atleast_2d(points).shape[0])
        return np.full(n, complex(self.value))

    def linear_combination(self, other, a=1.0, b=1.0):
        return PointFunction(self.family, self.component, a * self.value + b * other.value)

    def __add__(self, other):
        return self.linear_combination(other)

    def __rmul__(self, a):
        return PointFunction(self.family, self.component, a * self.value)


Piece = Union[LatticeFunction, TorusFunction, GridFunction, PointFunction]

CLASSES = ("PW_f", "PW", "Schwartz", "Cc")


@dataclass
class FamilyFunction:
    """Per-component pieces plus a class tag; absent components are zero.

    ``side`` is ``"X"`` or ``"Lambda"``.  For ``PW_f`` a uniform radius may be
    declared (every piece's support or type is checked against it).
    """

    family: SpaceFamily
    pieces: dict
    cls: str
    side: str
    radius: float | None = None
    decay: tuple | None = None  # joint (C, N) for archimedean Schwartz families
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")
        for e, piece in self.pieces.items():
            self.family.component(e)
            if piece.component != e:
                raise ValueError(f"piece stored under {e!r} belongs to {piece.component!r}")
        self.pieces = {e: self.pieces[e] for e in self.family.ids if e in self.pieces}
        self._verify()

    def _verify(self):
        if self.cls == "PW_f" and self.radius is not None:
            for e, p in self.pieces.items():
                r = _piece_radius(p)
                if r is not None and r > self.radius * (1 + 1e-12) + 1e-12:
                    raise CertificateError(f"component {e}: radius {r:.6g} exceeds uniform PW_f radius {self.radius}")
        if self.cls == "Schwartz" and self.decay is not None and self.family.field.is_archimedean:
            C, N = self.decay
            for e, p in self.pieces.items():
                vals, lam_norm = _lambda_samples(p)
                _check_decay(vals, self.family.norm_of(e) + lam_norm, C, N, f"joint decay on {e}")

    def eval(self, e: str, point) -> complex:
        self.family.component(e)
        piece = self.pieces.get(e)
        if piece is None:
            return 0j
        if isinstance(piece, LatticeFunction):
            return piece.eval(point)
        return complex(piece.eval(np.atleast_2d(np.asarray(point, dtype=np.float64)))[0])

    def component_ids(self):
        return list(self.pieces)

    def linear_combination(self, other: "FamilyFunction", a=1.0, b=1.0) -> "FamilyFunction":
        if other.family != self.family or other.cls != self.cls or other.side != self.side:
            raise ValueError("family functions are not of the same class")
        pieces = {}
        for e in self.family.ids:
            p, q = self.pieces.get(e), other.pieces.get(e)
            if p is not None and q is not None:
                pieces[e] = p.linear_combination(q, a, b)
            elif p is not None:
                pieces[e] = a * p
            elif q is not None:
                pieces[e] = b * q
        radius = None if self.radius is None or other.radius is None else max(self.radius, other.radius)
        decay = None
        if self.decay is not None and other.decay is not None:
            decay = (abs(a) * self.decay[0] + abs(b) * other.decay[0], min(self.decay[1], other.decay[1]))
        return FamilyFunction(self.family, pieces, self.cls, self.side, radius, decay, dict(self.meta))

    def __add__(self, other):
        return self.linear_combination(other)

    def __rmul__(self, a):
        decay = None if self.decay is None else (abs(a) * self.decay[0], self.decay[1])
        return FamilyFunction(self.family, {e: a * p for e, p in self.pieces.items()}, self.cls, self.side,
                              self.radius, decay, dict(self.meta))


def _piece_radius(p):
    if isinstance(p, (LatticeFunction, TorusFunction)):
        return p.support_radius()
    if isinstance(p, GridFunction):
        if p.side == "X":
            return p.support_radius
        return None if p.atoms is None else p.atoms.radius
    return 0.0


def _lambda_samples(p):
    if isinstance(p, GridFunction):
        return p.samples.reshape(-1), _node_radius(p.node_points(), p.family, dual=True)
    if isinstance(p, PointFunction):
        return np.array([p.value]), np.zeros(1)
    raise TypeError(f"{type(p).__name__} has no Lambda-side samples")


# --- seminorms -----------------------------------------------------------------

def _fd_derivative(samples, h, axis, order):
    """Apply the 4th-order central difference ``order`` times along ``axis``.

    Each application trims two nodes at both ends.
    """
    out = samples
    for _ in range(order):
        n = out.shape[axis]
        if n < 5:
            raise ValueError("grid too small for the requested derivative")

        def sl(a, b):
            idx = [slice(None)] * out.ndim
            idx[axis] = slice(a, n + b if b else None)
            return out[tuple(idx)]

        out = (-sl(4, 0) + 8 * sl(3, -1) - 8 * sl(1, -3) + sl(0, -4)) / (12 * h)
    return out


def _trim(arr, D):
    idx = []
    for axis in range(arr.ndim):
        k = 2 * int(D[axis]) if axis < len(D) else 0
        idx.append(slice(k, arr.shape[axis] - k if k else None))
    return arr[tuple(idx)]


def grid_derivative(g: GridFunction, D, rtol: float = 1e-6):
    """Derivative samples on interior nodes plus those nodes' coordinates.

    Warns when halving the resolution changes the result by more than
    ``rtol`` relative to its sup, i.e. when ``h`` is too coarse.
    """
    D = tuple(int(k) for k in D)
    vals = g.samples
    for axis, order in enumerate(D):
        if order:
            vals = _fd_derivative(vals, g.h, axis, order)
    nodes = g.nodes()
    axes_nodes = [nodes[2 * k: len(nodes) - 2 * k if k else None] for k in D]
    pts = np.array(list(product(*axes_nodes))).reshape(-1, g.dim)
    if any(D):
        coarse = g.samples[tuple(slice(None, None, 2) for _ in range(g.dim))]
        if min(coarse.shape) >= 5 + 4 * max(D):
            c = coarse
            for axis, order in enumerate(D):
                if order:
                    c = _fd_derivative(c, 2 * g.h, axis, order)
            fine_on_coarse = vals
            # fine interior nodes that coincide with coarse interior nodes
            idx = []
            for axis, order in enumerate(D):
                start = 2 * order  # coarse trims 2*order coarse nodes = 4*order fine nodes
                idx.append(slice(start, None, 2))
            fine_on_coarse = vals[tuple(idx)]
            fine_on_coarse = fine_on_coarse[tuple(slice(0, s) for s in c.shape)]
            scale = max(np.abs(vals).max(), 1e-300)
            err = np.abs(fine_on_coarse - c).max() / scale
            if err > rtol * 16:
                warnings.warn(
                    f"finite-difference derivative {D} with step h={g.h} may be inaccurate "
                    f"(step-halving discrepancy {err:.2e})", RuntimeWarning, stacklevel=2)
    return vals.reshape(-1), pts


def schwartz_seminorm(f: FamilyFunction, D=None, N: int = 0, torus_samples: int | None = None) -> float:
    """``sup_{e, lambda} |D phi_e(lambda)| (1 + ||e|| + ||lambda||)^N`` on stored data.

    Archimedean grids use 4th-order central differences on interior nodes.
    Torus pieces are differentiated term by term and sampled on a uniform grid
    of the fundamental domain; there the weight is omitted (the non-archimedean
    seminorm is ``sup |D phi|``), so ``N`` has no effect.
    """
    if f.side != "Lambda":
        raise ValueError("schwartz_seminorm expects a Lambda-side function")
    best = 0.0
    for e, p in f.pieces.items():
        d = p.family.dim
        Dk = tuple(D) if D is not None else (0,) * d
        if isinstance(p, PointFunction):
            if any(Dk):
                continue
            w = (1 + f.family.norm_of(e)) ** N if f.family.field.is_archimedean else 1.0
            best = max(best, abs(p.value) * w)
        elif isinstance(p, TorusFunction):
            M = torus_samples or _torus_resolution(p)
            pts = p.fundamental_grid(M)
            vals = p.eval(pts, derivative=Dk)
            best = max(best, float(np.abs(vals).max(initial=0.0)))
        elif isinstance(p, GridFunction):
            vals, pts = grid_derivative(p, Dk)
            lam = _node_radius(pts, p.family, dual=True)
            w = (1 + f.family.norm_of(e) + lam) ** N
            best = max(best, float((np.abs(vals) * w).max(initial=0.0)))
        else:
            raise TypeError(f"cannot take a Lambda-side seminorm of {type(p).__name__}")
    return best


def _torus_resolution(p: TorusFunction) -> int:
    pts = p.lattice_points()
    maxfreq = int(np.abs(pts).max()) if pts.size else 0
    return max(16, 8 * maxfreq + 1)


@dataclass(frozen=True)
class PWSeminormResult:
    value: float
    eta_radius: float
    eta_points: int
    xi_points: int
    diverges: bool


def pw_seminorm(f: FamilyFunction, r: float, N: int = 0, eta_points: int = 21,
                xi_points: int | None = None) -> PWSeminormResult:
    """Estimate the Paley-Wiener norm by sampling the entire extension.

    Real parts ``eta`` range over the box ``[-2r, 2r]^d`` (``eta_points`` per
    axis); imaginary parts over the fundamental domain (torus pieces) or the
    grid window (archimedean pieces, subsampled to ``xi_points`` per axis).
    The weight is ``exp(-r ||eta||)``, times ``(1 + ||e|| + ||lambda||)^N`` for
    archimedean families.  ``diverges`` is set when the supremum on the outer
    half of the box exceeds the inner half, i.e. growth faster than type ``r``.
    """
    if f.cls not in ("PW", "PW_f") and not (f.cls == "Cc"):
        raise ValueError(f"pw_seminorm needs a Paley-Wiener class function, got {f.cls!r}")
    if r <= 0:
        raise ValueError("r must be positive")
    arch = f.family.field.is_archimedean
    inner_best = 0.0
    outer_best = 0.0
    used_xi = 0
    for e, p in f.pieces.items():
        d = p.family.dim
        if isinstance(p, PointFunction):
            w = (1 + f.family.norm_of(e)) ** N if arch else 1.0
            inner_best = max(inner_best, abs(p.value) * w)
            outer_best = max(outer_best, abs(p.value) * w)
            continue
        ax = np.linspace(-2 * r, 2 * r, eta_points)
        etas = np.array(list(product(ax, repeat=d))).reshape(-1, d)
        if isinstance(p, TorusFunction):
            xis = p.fundamental_grid(xi_points or _torus_resolution(p))
            eval_fn = p.eval
        elif isinstance(p, GridFunction):
            if p.side != "Lambda" or p.atoms is None:
                raise ValueError("archimedean PW seminorm needs a Lambda-side grid with its X-side preimage")
            k = xi_points or min(p.n, 41)
            xis = np.array(list(product(np.linspace(-p.L, p.L, k), repeat=d))).reshape(-1, d)

            def eval_fn(x, eta=None, _p=p):
                return _p.eval_complex(x, eta)
        else:
            raise TypeError(type(p).__name__)
        used_xi = max(used_xi, len(xis))
        eta_norm = f.family.dual_norm(etas) if d else np.zeros(len(etas))
        is_outer = np.abs(etas).max(axis=1) > r * (1 + 1e-12) if d else np.zeros(len(etas), bool)
        for eta, en, outer in zip(etas, eta_norm, is_outer):
            vals = eval_fn(xis, np.broadcast_to(eta, xis.shape))
            w = np.exp(-r * en)
            if arch:
                lam = np.sqrt(en ** 2 + f.family.dual_norm(xis) ** 2)
                w = w * (1 + f.family.norm_of(e) + lam) ** N
            m = float((np.abs(vals) * w).max(initial=0.0))
            if outer:
                outer_best = max(outer_best, m)
            else:
                inner_best = max(inner_best, m)
    value = max(inner_best, outer_best)
    diverges = outer_best > inner_best * (1 + 1e-9) + 1e-300
    return PWSeminormResult(value, 2 * r, eta_points, used_xi, diverges)
