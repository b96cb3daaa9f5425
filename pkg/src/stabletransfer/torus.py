"""Stable transfer for split tori and complex descent.

``T = (F^x)^n``, ``S = (F^x)^m`` and ``xi0*: T -> S`` is ``x -> (prod_j x_j^{M_ij})_i``.

Coordinates.  A point of ``F^x`` is a pair ``(w, u)``:

* real field: ``x = e^{2 pi i w} e^u`` with ``w in {0, 1/2}`` (the sign) and ``u = log|x|``;
* complex field: ``x = e^u e^{2 pi i w}``, ``w in R/Z``;
* discrete model ``Z x Z/q``: ``u`` is the valuation in ``Z`` and ``w = c/q`` the unit class.

In all three ``xi0*`` acts by ``(w, u) -> (M w mod 1, M u)`` and a unitary
character is ``chi(w, u) = exp(2 pi i eps.w + i lam.u)``.  The character
``chi_a o xi0*`` of T has data ``(M^T eps_a, M^T lam_a)``.

Haar measures: real ``counting x du``, complex ``du x dw`` (``w`` in
``[0, 1)``), discrete ``counting x q^-1 counting``.  The fibre measures
``mu_s`` are the ones making ``int_T F(xi0* t) f(t) dt = int_S F(s) int f dmu_s ds``
hold (``normalization="haar"``).  With ``prod d`` the product of the
elementary divisors of ``M``:

* real: ``(prod d)^-1`` counting over the kernel's sign part, ``dy`` on the log part;
* complex: ``(prod d)^-2`` counting over the finite part, ``dy`` on logs and angles;
* discrete: ``q^(m - n)`` counting over units, counting on the value lattice.

``normalization="counting"`` drops the constants (plain counting on the
finite part), which is the convention of hand computations such as
``f(sqrt s) + f(-sqrt s)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from . import lattice

GROUNDS = ("real", "complex", "discrete")


class TorusError(ValueError):
    pass


class DecayError(TorusError):
    pass


class SingularPoint(TorusError):
    def __init__(self, message, piece=None):
        super().__init__(message)
        self.piece = piece


@dataclass(frozen=True)
class TorusMap:
    M: np.ndarray
    ground: str = "real"
    q: int | None = None  # order of the unit group for the discrete model

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.int64)
        if M.ndim != 2:
            raise TorusError("M must be an m x n integer matrix")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)
        if self.ground not in GROUNDS:
            raise TorusError(f"unknown ground {self.ground!r}")
        if self.ground == "discrete" and (self.q is None or int(self.q) < 1):
            raise TorusError("discrete model needs a unit-group order q >= 1")
        if lattice.int_rank(M) != M.shape[0]:
            raise TorusError(f"M has rank {lattice.int_rank(M)} < m = {M.shape[0]}; xi0* is not a quotient map")
        D, U, V = lattice.smith_normal_form(M)
        for a in (D, U, V):
            a.setflags(write=False)
        object.__setattr__(self, "_snf", (D, U, V))

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def n(self) -> int:
        return self.M.shape[1]

    @property
    def snf(self):
        return self._snf

    @property
    def divisors(self) -> list[int]:
        D = self._snf[0]
        return [int(D[i, i]) for i in range(self.m)]

    def apply(self, w, u):
        w = np.atleast_2d(np.asarray(w, dtype=np.float64))
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        return np.mod(w @ self.M.T, 1.0), u @ self.M.T

    def pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.M.astype(np.float64))


@dataclass(frozen=True)
class TwistCharacter:
    """``chi(w, u) = exp(2 pi i eps.w + i lam.u)``; unitary by construction."""

    eps: tuple
    lam: tuple

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(int(e) for e in self.eps))
        lam = tuple(float(x) for x in self.lam)
        if not all(math.isfinite(x) for x in lam):
            raise TorusError("character frequencies must be finite reals")
        object.__setattr__(self, "lam", lam)
        if len(self.eps) != len(lam):
            raise TorusError("eps and lam have different lengths")

    @classmethod
    def trivial(cls, n):
        return cls((0,) * n, (0.0,) * n)

    def __call__(self, w, u):
        w = np.atleast_2d(w)
        u = np.atleast_2d(u)
        return np.exp(2j * math.pi * (w @ np.array(self.eps, dtype=np.float64)) + 1j * (u @ np.array(self.lam)))

    def times(self, other: "TwistCharacter") -> "TwistCharacter":
        return TwistCharacter(tuple(a + b for a, b in zip(self.eps, other.eps)),
                              tuple(a + b for a, b in zip(self.lam, other.lam)))


def pull_character(tm: TorusMap, a: TwistCharacter) -> TwistCharacter:
    """``chi_a o xi0*`` as a character of T."""
    eps = tuple(int(x) for x in tm.M.T @ np.array(a.eps, dtype=np.int64))
    lam = tuple(float(x) for x in tm.M.T.astype(np.float64) @ np.array(a.lam))
    return TwistCharacter(eps, lam)


def xi_star(tm: TorusMap, chi_xi: TwistCharacter, a: TwistCharacter) -> TwistCharacter:
    """``xi_* a = chi_xi . (chi_a o xi0*)``."""
    return chi_xi.times(pull_character(tm, a))


# --- kernel decomposition ------------------------------------------------------

@dataclass
class KernelDecomposition:
    """``D = A x D°``.

    ``finite_part`` lists the elements of ``A`` by their torsion coordinates
    ``w`` (exact fractions, rows); their ``u`` coordinates are 0.
    ``connected_part`` has a basis of ``ker_Z M`` as columns.
    """

    finite_part: list
    connected_part: np.ndarray
    ground: str

    @property
    def order(self) -> int:
        return len(self.finite_part)

    def finite_array(self) -> np.ndarray:
        n = self.connected_part.shape[0]
        return np.array([[float(x) for x in row] for row in self.finite_part], dtype=np.float64).reshape(-1, n)


def kernel_decomposition(tm: TorusMap) -> KernelDecomposition:
    D, U, V = tm.snf
    m, n = tm.m, tm.n
    K = V[:, m:].copy()
    if tm.ground == "real":
        null = lattice.nullspace_mod2(tm.M)
        signs = lattice.span_mod2(null) if len(null) else np.zeros((1, n), dtype=np.int64)
        finite = [tuple(Fraction(int(x), 2) for x in row) for row in signs]
    elif tm.ground == "complex":
        d = tm.divisors
        finite = []
        for ks in product(*[range(di) for di in d]):
            y = [Fraction(k, di) for k, di in zip(ks, d)]
            w = [sum((int(V[j, i]) * y[i] for i in range(m)), Fraction(0)) % 1 for j in range(n)]
            finite.append(tuple(w))
    else:
        q = int(tm.q)
        d = tm.divisors
        # c = V y (mod q): d_i y_i = 0 mod q for i < m, the rest free
        ranges = []
        for i in range(n):
            if i < m:
                step = q // math.gcd(d[i], q)
                ranges.append(range(0, q, step))
            else:
                ranges.append(range(q))
        finite = []
        for y in product(*ranges):
            c = (V @ np.array(y, dtype=np.int64)) % q
            finite.append(tuple(Fraction(int(x), q) for x in c))
    finite = sorted(set(finite))
    return KernelDecomposition(finite, K, tm.ground)


def finite_part_order(tm: TorusMap) -> int:
    """``|A|`` from the Smith form / F_2 rank alone (independent of the enumeration)."""
    if tm.ground == "real":
        return 2 ** (tm.n - lattice.rank_mod2(tm.M))
    if tm.ground == "complex":
        return int(np.prod(tm.divisors))
    q = int(tm.q)
    return q ** (tm.n - tm.m) * int(np.prod([math.gcd(d, q) for d in tm.divisors]))


# --- fibres --------------------------------------------------------------------

@dataclass(frozen=True)
class FibreBase:
    w0: np.ndarray  # torsion / angle coordinates of a basepoint
    u0: np.ndarray  # log / valuation coordinates


def fibre_basepoint(tm: TorusMap, w_s, u_s) -> FibreBase | None:
    """A point of ``(xi0*)^{-1}(s)``, or ``None`` when the fibre is empty.

    Logs use the minimal-norm solution ``M^+ log s``; real signs use F_2
    elimination (free variables zero); angles use ``M^+ w``; the discrete
    model solves through the Smith form and then shifts the valuations by a
    kernel lattice vector towards ``M^+ log s``.
    """
    w_s = np.asarray(w_s, dtype=np.float64).reshape(tm.m)
    u_s = np.asarray(u_s, dtype=np.float64).reshape(tm.m)
    if tm.ground == "real":
        eps_s = np.rint(2 * np.mod(w_s, 1.0)).astype(np.int64) % 2
        if np.any(np.abs(2 * np.mod(w_s, 1.0) - np.rint(2 * np.mod(w_s, 1.0))) > 1e-12):
            raise TorusError("real sign coordinates must be 0 or 1/2")
        eps0 = lattice.solve_mod2(tm.M, eps_s)
        if eps0 is None:
            return None
        return FibreBase(eps0 / 2.0, tm.pinv() @ u_s)
    if tm.ground == "complex":
        P = tm.pinv()
        return FibreBase(P @ w_s, P @ u_s)
    D, U, V = tm.snf
    q = int(tm.q)
    v = np.rint(u_s).astype(np.int64)
    c = np.rint(w_s * q).astype(np.int64) % q
    if np.any(np.abs(u_s - v) > 1e-9) or np.any(np.abs(w_s * q - np.rint(w_s * q)) > 1e-9):
        raise TorusError("discrete-model points have integer valuations and unit classes in (1/q)Z")
    Uv = U @ v
    Uc = U @ c
    yv = np.zeros(tm.n, dtype=np.int64)
    yc = np.zeros(tm.n, dtype=np.int64)
    for i, d in enumerate(tm.divisors):
        if Uv[i] % d:
            return None
        yv[i] = Uv[i] // d
        g = math.gcd(d, q)
        if Uc[i] % g:
            return None
        # d y = Uc (mod q)
        dd, rr, qq = d // g, (Uc[i] // g) % (q // g), q // g
        yc[i] = (rr * pow(dd, -1, qq)) % qq if qq > 1 else 0
    u0 = (V @ yv).astype(np.float64)
    K = V[:, tm.m:].astype(np.float64)
    if K.size:
        # slide along ker_Z M to within half a cell of the minimal-norm point
        u0 -= K @ np.rint(np.linalg.lstsq(K, u0 - tm.pinv() @ u_s, rcond=None)[0])
    return FibreBase(((V @ yc) % q) / q, u0)


# --- integrands ----------------------------------------------------------------

@dataclass
class TorusIntegrand:
    """A function ``f(w, u)`` on ``T`` with a decay certificate in ``u``.

    ``decay = ("gauss", C, a)`` certifies ``|f| <= C exp(-a ||u||^2)``;
    ``decay = ("poly", C, N)`` certifies ``|f| <= C (1 + ||u||)^-N``.  The
    certificate is checked at every node where ``f`` is evaluated.
    """

    fn: object
    decay: tuple
    label: str = ""

    def __post_init__(self):
        kind = self.decay[0]
        if kind not in ("gauss", "poly"):
            raise TorusError(f"unknown decay certificate {kind!r}")
        if self.decay[1] < 0 or self.decay[2] <= 0:
            raise TorusError("decay constants must be positive")

    @classmethod
    def zero(cls, n):
        return cls(lambda w, u: np.zeros(np.atleast_2d(u).shape[0], dtype=np.complex128), ("gauss", 0.0, 1.0), "zero")

    @classmethod
    def from_grid(cls, sheets: dict, L: float, h: float, decay: tuple, label: str = ""):
        """Real-field data: per sign vector (tuple of 0/1) samples on ``[-L, L]^n`` with step ``h``.

        Values between nodes are multilinear; outside the window and on
        missing sheets the function is zero.
        """
        from .kernels import multilinear_interp

        sheets = {tuple(int(x) for x in k): np.asarray(v, dtype=np.complex128) for k, v in sheets.items()}

        def fn(w, u):
            w = np.atleast_2d(w)
            u = np.atleast_2d(u)
            out = np.zeros(u.shape[0], dtype=np.complex128)
            eps = np.rint(2 * np.mod(w, 1.0)).astype(np.int64) % 2
            inside = np.all(np.abs(u) <= L, axis=1)
            for key, samples in sheets.items():
                sel = inside & np.all(eps == np.array(key), axis=1)
                if sel.any():
                    out[sel] = multilinear_interp(samples, -L, h, u[sel])
            return out

        return cls(fn, decay, label)

    def majorant(self, rho):
        kind, C, p = self.decay
        rho = np.asarray(rho, dtype=np.float64)
        if kind == "gauss":
            return C * np.exp(-p * rho ** 2)
        return C * (1.0 + rho) ** (-p)

    def __call__(self, w, u):
        vals = np.asarray(self.fn(w, u), dtype=np.complex128).reshape(-1)
        bound = self.majorant(np.sqrt((np.atleast_2d(u) ** 2).sum(axis=1)))
        bad = np.abs(vals) > bound * (1 + 1e-9) + 1e-300
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DecayError(f"decay certificate {self.decay} violated: |f| = {abs(vals[i]):.3g} > {bound[i]:.3g}")
        return vals


_SPHERE = {0: 1.0}


def _sphere_area(k):
    # area of the unit sphere S^{k-1}; k = 0 unused
    return 2 * math.pi ** (k / 2) / math.gamma(k / 2)


def radial_tail(f: TorusIntegrand, k: int, R: float, sigma: float = 1.0) -> float:
    """Bound for ``int_{||y|| > R} majorant(sigma ||y||) dy`` over ``R^k``."""
    if k == 0:
        return 0.0
    if f.decay[0] == "poly" and f.decay[2] <= k:
        return math.inf
    x, wts = np.polynomial.legendre.leggauss(200)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * wts
    r = R + t / (1.0 - t)
    jac = 1.0 / (1.0 - t) ** 2
    vals = f.majorant(sigma * r) * r ** (k - 1) * jac
    return float(_sphere_area(k) * (wt * vals).sum())


def truncation_radius(f: TorusIntegrand, k: int, tol: float, sigma: float = 1.0, r_max: float = 1e3) -> float:
    """Smallest ``R`` on a 0.25 grid with ``radial_tail(R) <= tol``."""
    if k == 0:
        return 0.0
    if f.decay[1] == 0:
        return 0.25
    R = 0.25
    while R <= r_max:
        if radial_tail(f, k, R, sigma) <= tol:
            return R
        R += 0.25
    raise DecayError(f"decay certificate {f.decay} cannot reach tail {tol:g} within radius {r_max:g}")


def gl_line(R: float, width: float = 1.0, nodes: int = 8):
    """Composite Gauss-Legendre on ``[-R, R]`` with panels of at most ``width``."""
    panels = max(1, int(math.ceil(2 * R / width)))
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-R, R, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


def _tensor(pts1, w1, k):
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    P = np.stack(np.meshgrid(*([pts1] * k), indexing="ij"), axis=-1).reshape(-1, k)
    W = np.ones(1)
    for _ in range(k):
        W = np.multiply.outer(W, w1).ravel()
    return P, W


def gl_box(k: int, R: float, width: float = 1.0, nodes: int = 8):
    """Tensor composite Gauss-Legendre on ``[-R, R]^k`` (last coordinate fastest)."""
    return _tensor(*gl_line(R, width, nodes), k)


def lattice_line(R: float):
    r = int(math.floor(R))
    pts = np.arange(-r, r + 1, dtype=np.float64)
    return pts, np.ones(len(pts))


def lattice_box(k: int, R: float):
    """Integer points of ``[-R, R]^k`` with unit weights."""
    return _tensor(*lattice_line(R), k)


def uniform_torus(k: int, P: int):
    """Trapezoid nodes on ``[0, 1)^k`` with total weight 1."""
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    g = np.arange(P) / P
    pts = np.array(list(product(g, repeat=k)))
    return pts, np.full(len(pts), 1.0 / P ** k)


@dataclass
class QuadratureSpec:
    tol: float = 1e-12
    width: float = 1.0
    nodes: int = 8
    angle_points: int = 8


def _finite_weight(tm: TorusMap, normalization: str) -> float:
    if normalization == "counting":
        return 1.0
    if normalization != "haar":
        raise TorusError(f"unknown normalization {normalization!r}")
    dprod = float(np.prod(tm.divisors))
    if tm.ground == "real":
        return 1.0 / dprod
    if tm.ground == "complex":
        return 1.0 / dprod ** 2
    return float(tm.q) ** (tm.m - tm.n)


@dataclass
class FibreRule:
    """Nodes ``(w, u)`` on the fibre through the origin's kernel and their weights."""

    w: np.ndarray  # offsets to add to the basepoint's w (P, n)
    u: np.ndarray  # offsets to add to the basepoint's u (P, n)
    weights: np.ndarray
    radius: float
    tail: float


def fibre_rule(tm: TorusMap, f: TorusIntegrand, normalization: str = "haar",
               quad: QuadratureSpec | None = None) -> FibreRule:
    quad = quad or QuadratureSpec()
    kd = kernel_decomposition(tm)
    A = kd.finite_array()
    K = kd.connected_part.astype(np.float64)
    k = K.shape[1]
    sv = np.linalg.svd(K, compute_uv=False) if k else np.ones(1)
    sigma = float(sv.min())
    R = truncation_radius(f, k, quad.tol, sigma)
    tail = radial_tail(f, k, R, sigma)
    if tm.ground == "discrete":
        Y, Wy = lattice_box(k, R + 1)
    else:
        # panels of width quad.width measured in u = K y
        Y, Wy = gl_box(k, R, quad.width / float(sv.max()), quad.nodes)
    u_off = Y @ K.T
    if tm.ground == "complex":
        Z, Wz = uniform_torus(k, quad.angle_points)
        ang = Z @ K.T
    else:
        ang, Wz = np.zeros((1, tm.n)), np.ones(1)
    # tensor: finite part x log/valuation x angle
    ia, iy, iz = np.meshgrid(np.arange(len(A)), np.arange(len(Y)), np.arange(len(ang)), indexing="ij")
    ia, iy, iz = ia.ravel(), iy.ravel(), iz.ravel()
    w = A[ia] + ang[iz]
    u = u_off[iy]
    weights = _finite_weight(tm, normalization) * Wy[iy] * Wz[iz]
    return FibreRule(w, u, weights, R, tail * len(A) * _finite_weight(tm, normalization))


@dataclass
class FibreResult:
    value: complex
    empty: bool
    tail_bound: float
    nodes: int


def fiber_integrate(tm: TorusMap, chi: TwistCharacter, f: TorusIntegrand, w_s, u_s,
                    normalization: str = "haar", quad: QuadratureSpec | None = None,
                    rule: FibreRule | None = None, skip=None) -> FibreResult:
    """``(T f)(s) = int_{fibre} chi(t) f(t) dmu_s(t)``; exactly 0 on empty fibres.

    ``skip`` is an optional predicate on fibre nodes ``(w, u)`` returning a
    mask of nodes to leave out (a measure-zero set).
    """
    base = fibre_basepoint(tm, w_s, u_s)
    if base is None:
        return FibreResult(0j, True, 0.0, 0)
    rule = rule or fibre_rule(tm, f, normalization, quad)
    w = base.w0[None, :] + rule.w
    u = base.u0[None, :] + rule.u
    vals = chi(w, u) * f(w, u)
    wts = rule.weights
    if skip is not None:
        keep = ~np.asarray(skip(w, u), dtype=bool)
        vals, wts = vals[keep], wts[keep]
    return FibreResult(complex((wts * vals).sum()), False, rule.tail, len(wts))


def fibre_basepoints(tm: TorusMap, W_s, U_s):
    """Vectorized :func:`fibre_basepoint`; returns ``(w0, u0, nonempty)``."""
    W_s = np.atleast_2d(np.asarray(W_s, dtype=np.float64))
    U_s = np.atleast_2d(np.asarray(U_s, dtype=np.float64))
    J = len(U_s)
    if tm.ground == "discrete":
        w0 = np.zeros((J, tm.n))
        u0 = np.zeros((J, tm.n))
        ok = np.zeros(J, dtype=bool)
        for j in range(J):
            b = fibre_basepoint(tm, W_s[j], U_s[j])
            if b is not None:
                w0[j], u0[j], ok[j] = b.w0, b.u0, True
        return w0, u0, ok
    P = tm.pinv()
    u0 = U_s @ P.T
    if tm.ground == "complex":
        return W_s @ P.T, u0, np.ones(J, dtype=bool)
    two = 2 * np.mod(W_s, 1.0)
    if np.any(np.abs(two - np.rint(two)) > 1e-12):
        raise TorusError("real sign coordinates must be 0 or 1/2")
    eps = np.rint(two).astype(np.int64) % 2
    w0 = np.zeros((J, tm.n))
    ok = np.zeros(J, dtype=bool)
    for key in {tuple(r) for r in eps.tolist()}:
        sel = np.all(eps == np.array(key, dtype=np.int64), axis=1)
        sol = lattice.solve_mod2(tm.M, np.array(key, dtype=np.int64))
        if sol is not None:
            w0[sel] = sol / 2.0
            ok[sel] = True
    return w0, u0, ok


def transfer_on_nodes(tm: TorusMap, chi: TwistCharacter, f: TorusIntegrand, W_s, U_s,
                      normalization: str = "haar", quad: QuadratureSpec | None = None, chunk: int = 1 << 20):
    """Vectorized ``(T f)(s)`` over many points ``s = (W_s[j], U_s[j])``.

    ``chunk`` caps the number of integrand evaluations held at once.
    """
    rule = fibre_rule(tm, f, normalization, quad)
    w0, u0, ok = fibre_basepoints(tm, W_s, U_s)
    out = np.zeros(len(u0), dtype=np.complex128)
    idx = np.flatnonzero(ok)
    step = max(1, chunk // len(rule.weights))
    for start in range(0, len(idx), step):
        js = idx[start:start + step]
        w = (w0[js, None, :] + rule.w[None, :, :]).reshape(-1, tm.n)
        u = (u0[js, None, :] + rule.u[None, :, :]).reshape(-1, tm.n)
        vals = (chi(w, u) * f(w, u)).reshape(len(js), -1)
        out[js] = vals @ rule.weights
    return out, rule


# --- adjunction ----------------------------------------------------------------

def _log_line(tm: TorusMap, R: float, quad: QuadratureSpec):
    if tm.ground == "discrete":
        return lattice_line(R)
    return gl_line(R, quad.width, quad.nodes)


def _angle_rule(tm: TorusMap, k: int, quad: QuadratureSpec):
    """Torsion/angle nodes of a rank ``k`` torus over the ground field, total weight per Haar."""
    if tm.ground == "real":
        return np.array(list(product((0.0, 0.5), repeat=k))).reshape(-1, k), np.ones(2 ** k)
    if tm.ground == "complex":
        return uniform_torus(k, quad.angle_points)
    q = int(tm.q)
    W = np.array(list(product(range(q), repeat=k)), dtype=np.float64).reshape(-1, k) / q
    return W, np.full(len(W), 1.0 / q ** k)


def _separable_sums(chars, W, Ww, line, F):
    """``sum_{i,j} Ww[i] F[i, j] chi(W[i], U_j)`` for a tensor log grid ``U`` built from ``line``.

    ``F`` has shape ``(len(W), len(line) ** k)`` in :func:`_tensor` order; the
    log part of each character factorizes over coordinates and is contracted
    one axis at a time.
    """
    if not chars:
        return np.zeros(0, dtype=np.complex128)
    k = W.shape[1]
    E = np.array([c.eps for c in chars], dtype=np.float64).reshape(len(chars), k)
    L = np.array([c.lam for c in chars], dtype=np.float64).reshape(len(chars), k)
    phase = Ww[:, None] * np.exp(2j * math.pi * (W @ E.T))  # (nW, chars)
    T = np.tensordot(phase.T, F.reshape((len(W),) + (len(line),) * k), axes=1)
    for d in range(k):
        T = np.einsum("cj...,cj->c...", T, np.exp(1j * np.outer(L[:, d], line)))
    return T
@dataclass
class AdjunctionReport:
    character: TwistCharacter
    lhs: complex
    rhs: complex
    abs_error: float
    rel_error: float
    params: dict = field(default_factory=dict)


def adjunction_check(tm: TorusMap, chi: TwistCharacter, f: TorusIntegrand, characters,
                     normalization: str = "haar", quad: QuadratureSpec | None = None) -> list[AdjunctionReport]:
    """Compare ``int_S chi_a (T f) ds`` with ``int_T chi_{xi_* a} f dt`` for each ``a``.

    Both sides use the Haar measures of S and T; logs are truncated where
    the certificate's tail drops below ``quad.tol`` (on S at ``||M|| R_T``,
    beyond which the fibres only meet ``||u|| > R_T``).  ``rel_error`` is
    ``|lhs - rhs| / (1 + |rhs|)``.
    """
    quad = quad or QuadratureSpec()
    characters = list(characters)
    R_T = truncation_radius(f, tm.n, quad.tol)
    norm_M = float(np.linalg.norm(tm.M.astype(np.float64), 2))
    R_S = norm_M * R_T
    if tm.ground == "discrete":
        R_S = math.floor(R_S) + 1
    # S: sign/angle rows times a tensor log grid; nodes whose minimal-norm
    # fibre point lies beyond R_T see only the truncated tail and are skipped
    Ws, Wws = _angle_rule(tm, tm.m, quad)
    line_s, wl_s = _log_line(tm, R_S, quad)
    Us, Wus = _tensor(line_s, wl_s, tm.m)
    keep = np.ones(len(Us), dtype=bool)
    if tm.ground != "discrete":
        keep = np.linalg.norm(Us @ tm.pinv().T, axis=1) <= R_T
    iw, iu = np.meshgrid(np.arange(len(Ws)), np.flatnonzero(keep), indexing="ij")
    Tf_kept, rule = transfer_on_nodes(tm, chi, f, Ws[iw.ravel()], Us[iu.ravel()], normalization, quad)
    Fs = np.zeros((len(Ws), len(Us)), dtype=np.complex128)
    Fs[:, keep] = Tf_kept.reshape(len(Ws), -1) * Wus[keep][None, :]
    lhs = _separable_sums(characters, Ws, Wws, line_s, Fs)

    pulled = [xi_star(tm, chi, a) for a in characters]
    Wt, Wwt = _angle_rule(tm, tm.n, quad)
    line_t, wl_t = _log_line(tm, R_T + (1 if tm.ground == "discrete" else 0), quad)
    Ut, Wut = _tensor(line_t, wl_t, tm.n)
    Ft = np.empty((len(Wt), len(Ut)), dtype=np.complex128)
    for i, w in enumerate(Wt):
        Ft[i] = Wut * f(np.broadcast_to(w, Ut.shape), Ut)
    rhs = _separable_sums(pulled, Wt, Wwt, line_t, Ft)
    out = []
    for a, l, r in zip(characters, lhs, rhs):
        err = abs(l - r)
        out.append(AdjunctionReport(a, complex(l), complex(r), err, err / (1 + abs(r)),
                                    {"R_T": R_T, "R_S": R_S, "fibre_radius": rule.radius,
                                     "tail": rule.tail, "normalization": normalization,
                                     "s_nodes": int(keep.sum()) * len(Ws), "t_nodes": Ft.size}))
    return out


def image_contains(tm: TorusMap, w_s, u_s) -> bool:
    return fibre_basepoint(tm, w_s, u_s) is not None


# --- complex descent: the xi-singular locus -------------------------------------

@dataclass
class LocusPiece:
    """``translation * exp(span_R(L) + i span_R(L))`` inside ``S``.

    ``sublattice`` has the cocharacter lattice of the subtorus as columns
    (saturated), ``annihilator`` rows cut it out, ``translation`` is an exact
    angle vector (logs are 0).
    """

    translation: tuple
    sublattice: np.ndarray
    annihilator: np.ndarray
    sources: list = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.sublattice.shape[1]

    def codim(self, m: int) -> int:
        return m - self.rank

    def contains(self, w_s, u_s, tol: float = 1e-9) -> bool:
        Q = self.annihilator.astype(np.float64)
        u_s = np.asarray(u_s, dtype=np.float64)
        w_s = np.asarray(w_s, dtype=np.float64)
        if np.any(np.abs(Q @ u_s) > tol):
            return False
        t = np.array([float(x) for x in self.translation])
        r = Q @ (w_s - t)
        return bool(np.all(np.abs(r - np.rint(r)) <= tol))

    def describe(self) -> str:
        t = ",".join(str(x) for x in self.translation)
        if self.rank == 0:
            return "{exp(2 pi i (" + t + "))}"
        return f"exp(2 pi i ({t})) * subtorus{self.sublattice.T.tolist()}"


def _same_piece(p: LocusPiece, q: LocusPiece) -> bool:
    if p.rank != q.rank:
        return False
    if p.rank and np.any(p.annihilator @ q.sublattice):
        return False
    diff = [a - b for a, b in zip(p.translation, q.translation)]
    r = [sum((int(p.annihilator[i, j]) * diff[j] for j in range(len(diff))), Fraction(0))
         for i in range(p.annihilator.shape[0])]
    return all(x.denominator == 1 for x in r)


def xi_singular_locus(tm: TorusMap, roots) -> list[LocusPiece]:
    """Pieces ``xi0*(a ker alpha)`` for ``a in A`` and roots with ``alpha(D°) = 1``.

    ``alpha(D°) = 1`` is the exact test ``alpha . K = 0`` on a basis ``K`` of
    ``ker_Z M``.  ``ker alpha`` has ``g = gcd(alpha)`` components
    ``(j/g) e + ker° alpha`` with ``alpha/g . e = 1``; each maps to the
    translate ``M(w_a + (j/g) e)`` of the subtorus whose cocharacters are the
    saturation of ``M ker_Z alpha``.
    """
    if tm.ground != "complex":
        raise TorusError("the xi-singular locus is computed for the complex field")
    kd = kernel_decomposition(tm)
    K = kd.connected_part
    pieces: list[LocusPiece] = []
    for alpha in roots:
        alpha = np.asarray(alpha, dtype=np.int64).reshape(tm.n)
        if not alpha.any():
            raise TorusError("roots must be nonzero")
        if K.size and np.any(alpha @ K):
            continue
        g = int(np.gcd.reduce(np.abs(alpha)))
        prim = alpha // g
        _, Ua, Va = lattice.smith_normal_form(prim.reshape(1, -1))
        e = Va[:, 0] * int(Ua[0, 0])
        if int(prim @ e) != 1:
            e = -e
        kerA = lattice.integer_kernel(prim.reshape(1, -1))
        L, Qrows = lattice.saturation(tm.M @ kerA, ambient_dim=tm.m) if kerA.size else (
            np.zeros((tm.m, 0), dtype=np.int64), np.eye(tm.m, dtype=np.int64))
        if L.shape[1] >= tm.m:
            raise TorusError("locus piece has codimension 0")
        for a in kd.finite_part:
            for j in range(g):
                wt = [a[i] + Fraction(j, g) * int(e[i]) for i in range(tm.n)]
                trans = tuple(sum((int(tm.M[r, i]) * wt[i] for i in range(tm.n)), Fraction(0)) % 1
                              for r in range(tm.m))
                cand = LocusPiece(trans, L, Qrows, [(tuple(alpha.tolist()), a, j)])
                for p in pieces:
                    if _same_piece(p, cand):
                        p.sources.extend(cand.sources)
                        break
                else:
                    pieces.append(cand)
    return pieces


def locus_membership(pieces, w_s, u_s, tol: float = 1e-9):
    """The first piece containing ``s``, or ``None``."""
    for p in pieces:
        if p.contains(w_s, u_s, tol):
            return p
    return None


def fibre_singular(tm: TorusMap, roots, w_s, u_s, tol: float = 1e-9) -> bool:
    """Fibre-side test: some ``alpha`` with ``alpha(D°) = 1`` is 1 on a coset ``t_s a D°``."""
    base = fibre_basepoint(tm, w_s, u_s)
    if base is None:
        return False
    kd = kernel_decomposition(tm)
    K = kd.connected_part
    A = kd.finite_array()
    for alpha in roots:
        alpha = np.asarray(alpha, dtype=np.int64).reshape(tm.n)
        if K.size and np.any(alpha @ K):
            continue
        for a in A:
            lu = float(alpha @ base.u0)
            lw = float(alpha @ (base.w0 + a))
            if abs(lu) <= tol and abs(lw - round(lw)) <= tol:
                return True
    return False


def complex_descent_transfer(tm: TorusMap, roots, chi: TwistCharacter, fG: TorusIntegrand, w_s, u_s,
                             weyl=(), normalization: str = "haar", quad: QuadratureSpec | None = None,
                             tol: float = 1e-9, invariance_samples: int = 64, seed: int = 0) -> complex:
    """``f^H(s) = int chi f^G dmu_s`` for xi-regular ``s``.

    ``weyl`` lists integer ``n x n`` matrices acting on ``(w, u)``; ``f^G``
    must be invariant under them (checked on seeded samples to 1e-10).
    Fibre nodes on which some root is trivial are skipped.
    """
    pieces = xi_singular_locus(tm, roots)
    hit = locus_membership(pieces, w_s, u_s, tol)
    if hit is not None:
        raise SingularPoint(f"s lies on the xi-singular locus piece {hit.describe()}", hit)
    if weyl:
        rng = np.random.default_rng(seed)
        w = rng.random((invariance_samples, tm.n))
        u = rng.normal(size=(invariance_samples, tm.n))
        base = fG(w, u)
        for Wm in weyl:
            Wm = np.asarray(Wm, dtype=np.float64)
            moved = fG(np.mod(w @ Wm.T, 1.0), u @ Wm.T)
            if np.abs(moved - base).max() > 1e-10:
                raise TorusError("f^G is not invariant under the supplied Weyl action")
    R = [np.asarray(a, dtype=np.float64) for a in roots]

    def singular_nodes(w, u):
        mask = np.zeros(len(u), dtype=bool)
        for a in R:
            lu = u @ a
            lw = w @ a
            mask |= (np.abs(lu) <= 1e-12) & (np.abs(lw - np.rint(lw)) <= 1e-12)
        return mask

    return fiber_integrate(tm, chi, fG, w_s, u_s, normalization, quad, skip=singular_nodes).value


def kernel_sanity(tm: TorusMap, kd: KernelDecomposition | None = None) -> bool:
    """Exact check that ``A`` and ``ker_Z M`` map to the identity of ``S``."""
    kd = kd or kernel_decomposition(tm)
    if kd.connected_part.size and np.any(tm.M @ kd.connected_part):
        return False
    for a in kd.finite_part:
        for r in range(tm.m):
            if sum((int(tm.M[r, j]) * a[j] for j in range(tm.n)), Fraction(0)).denominator != 1:
                return False
    return len(set(kd.finite_part)) == kd.order
