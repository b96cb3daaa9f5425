"""Job operations: each turns resolved scenario objects into a :class:`Table`."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic, fourier, sl2, torus
from .config import ConfigError, Scenario, build_character, build_integrand, build_torus_map, resolve
from .functions import GridFunction, LatticeFunction, PointFunction, TorusFunction
from .pullback import pullback, validate


class NumericFailure(RuntimeError):
    pass


@dataclass
class Table:
    columns: list
    rows: list
    params: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)  # (name, ok, value, tol)

    @property
    def ok(self) -> bool:
        return all(c[1] for c in self.checks)

    def assert_finite(self):
        for row in self.rows:
            for v in row:
                if isinstance(v, float) and not math.isfinite(v):
                    raise NumericFailure("non-finite value in output table")


def _arg(args, key, path, default=None, required=False):
    if key not in args:
        if required:
            raise ConfigError(f"{path}.args.{key}", "missing required argument")
        return default
    return args[key]


def _int_arg(args, key, path, default=None, lo=None):
    v = _arg(args, key, path, default, default is None)
    if isinstance(v, bool) or not isinstance(v, int) or (lo is not None and v < lo):
        raise ConfigError(f"{path}.args.{key}", f"expected an integer{'' if lo is None else f' >= {lo}'}")
    return v


# --- sl2 -------------------------------------------------------------------------------

def op_sl2_gram(sc: Scenario, args, path, ctx):
    nmax = _int_arg(args, "nmax", path, 8, 1)
    Q = _int_arg(args, "Q", path, 2048, 64)
    kind = _arg(args, "kind", path, "stable")
    if kind == "stable":
        labels = sl2.stable_labels(nmax)
        target = 2.0 * np.eye(nmax)
    elif kind == "discrete":
        labels = sl2.discrete_labels(nmax)
        target = np.eye(len(labels))
    else:
        raise ConfigError(f"{path}.args.kind", "kind is 'stable' or 'discrete'")
    G = sl2.gram_table(labels, Q, backend=ctx.get("backend"))
    err = float(np.abs(G - target).max())
    rows = []
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            rows.append([_label(a), _label(b), G[i, j].real, G[i, j].imag])
    tol = sc.tolerances["gram"]
    return Table(["row", "col", "re", "im"], rows, {"Q": Q, "nmax": nmax, "kind": kind, "max_abs_error": err},
                 [("gram", err < tol, err, tol)])


def _label(lab):
    return ":".join(str(x) for x in lab)


def op_pipeline(sc: Scenario, args, path, ctx):
    coeffs = _arg(args, "coefficients", path, required=True)
    if not isinstance(coeffs, dict) or not coeffs:
        raise ConfigError(f"{path}.args.coefficients", "expected a non-empty mapping n -> a_n")
    a = {}
    for k, v in coeffs.items():
        if not isinstance(k, int) or k < 1:
            raise ConfigError(f"{path}.args.coefficients.{k}", "keys are positive integers")
        a[k] = complex(v[0], v[1]) if isinstance(v, list) else complex(v)
    Q = _int_arg(args, "Q", path, 2048, 64)
    npts = _int_arg(args, "theta_points", path, 256, 1)
    K = args.get("K")
    chunk = args.get("chunk", 64)
    zero = args.get("zero_image")
    if zero is not None:
        if not (isinstance(zero, list) and len(zero) == 2 and zero[0] in ("even", "odd", "discrete")):
            raise ConfigError(f"{path}.args.zero_image", "expected [even|odd|discrete, value]")
        zero = (zero[0], zero[1])
    res = sl2.gelfand_graev_pipeline(a, Q, npts, K, zero, jobs=ctx.get("jobs", 1), chunk=chunk,
                                     backend=ctx.get("backend"))
    rows = [[t, v.real, v.imag] for t, v in zip(res.theta, res.values)]
    params = dict(res.params)
    params["Phi"] = ";".join(f"{n}:{_fmt(v.real)}{_sgn(v.imag)}{_fmt(abs(v.imag))}j"
                             for n, v in sorted(res.stable_transform.items()))
    params["torus_coefficients"] = ";".join(f"{k}:{_fmt(v.real)}{_sgn(v.imag)}{_fmt(abs(v.imag))}j"
                                            for k, v in sorted(res.torus_coefficients.items()))
    # F^st of f^G is 2 a_n by the orthogonality relations
    err = max(abs(res.stable_transform.get(n, 0) - 2 * a.get(n, 0)) for n in set(a) | set(res.stable_transform))
    tol = sc.tolerances["gram"]
    return Table(["theta", "re", "im"], rows, params, [("stable_transform", err < tol, err, tol)])


def _fmt(x):
    return repr(float(x))


def _sgn(x):
    return "-" if x < 0 else "+"


# --- fourier / pullback -----------------------------------------------------------------

def _piece_rows(e, p):
    if isinstance(p, (LatticeFunction, TorusFunction)):
        return [[e, ",".join(map(str, k)), v.real, v.imag] for k, v in p.coeffs.items()]
    if isinstance(p, GridFunction):
        pts = p.node_points()
        vals = p.samples.reshape(-1)
        return [[e, ",".join(_fmt(x) for x in pt), v.real, v.imag] for pt, v in zip(pts, vals)]
    if isinstance(p, PointFunction):
        return [[e, "", complex(p.value).real, complex(p.value).imag]]
    raise TypeError(type(p).__name__)


def op_fourier_forward(sc, args, path, ctx):
    f = resolve(sc, "functions", _arg(args, "function", path, required=True), f"{path}.args.function")
    k2 = bool(args.get("kernel_2pi", f.meta.get("kernel_2pi", False)))
    F = fourier.forward(f, k2, backend=ctx.get("backend"))
    rows = [r for e, p in F.pieces.items() for r in _piece_rows(e, p)]
    return Table(["component", "point", "re", "im"], rows, {"kernel_2pi": k2, "class": F.cls})


def op_fourier_roundtrip(sc, args, path, ctx):
    f = resolve(sc, "functions", _arg(args, "function", path, required=True), f"{path}.args.function")
    k2 = bool(args.get("kernel_2pi", f.meta.get("kernel_2pi", False)))
    rep = fourier.roundtrip_report(f, k2, backend=ctx.get("backend"))
    if rep["error"]:
        raise NumericFailure(rep["error"])
    rows = [[r.component, r.sup_error, r.l2_error, int(r.component in rep["flagged"])] for r in rep["records"]]
    tol = sc.tolerances["roundtrip" if f.family.field.lattice_type else "roundtrip_arch"]
    return Table(["component", "sup_error", "l2_error", "flagged"], rows, {"kernel_2pi": k2},
                 [("roundtrip", rep["sup_error"] < tol, rep["sup_error"], tol)])


def op_pullback(sc, args, path, ctx):
    pd = resolve(sc, "pullbacks", _arg(args, "pullback", path, required=True), f"{path}.args.pullback")
    phi = resolve(sc, "functions", _arg(args, "function", path, required=True), f"{path}.args.function")
    rep = validate(pd)
    if not rep.ok:
        raise ConfigError(f"{path}.args.pullback", rep.summary())
    pulled = pullback(pd, phi)
    rows = [r for e, p in pulled.pieces.items() for r in _piece_rows(e, p)]
    return Table(["component", "point", "re", "im"], rows, {"class": pulled.cls})


# --- elliptic -----------------------------------------------------------------------------

def op_change_of_basis(sc, args, path, ctx):
    names = _arg(args, "blocks", path, required=True)
    blocks = [resolve(sc, "blocks", n, f"{path}.args.blocks[{i}]") for i, n in enumerate(names)]
    cob = elliptic.change_of_basis(blocks)
    rows = [[_label(r), _label(c), cob.c[i, j].real, cob.c[i, j].imag]
            for i, r in enumerate(cob.row_labels) for j, c in enumerate(cob.col_labels)]
    recon = cob.report["identity_error"]
    tol = sc.tolerances["splitting"]
    return Table(["row", "col", "re", "im"], rows, {"blocks": ",".join(names)},
                 [("reconstruction", recon < tol, recon, tol), ("cross_block_zero", elliptic.cross_block_zero(cob), 0.0, 0.0)])


def op_pseudocoefficient_duality(sc, args, path, ctx):
    b = resolve(sc, "blocks", _arg(args, "block", path, required=True), f"{path}.args.block")
    tab = elliptic.duality_table(b, elliptic.orthogonal_elliptic_basis(b))
    P, nsq = tab["pairing"], tab["norms_sq"]
    rows = [[i, j, P[i, j].real, P[i, j].imag, nsq[i] if i == j else 0.0]
            for i in range(len(P)) for j in range(len(P))]
    err = tab["max_error"]
    tol = sc.tolerances["splitting"]
    return Table(["b", "b_prime", "re", "im", "expected"], rows, {"block": b.label}, [("duality", err < tol, err, tol)])


def op_indicator(sc, args, path, ctx):
    orders = [int(x) for x in _arg(args, "orders", path, required=True)]
    gens = [[int(x) for x in g] for g in _arg(args, "generators", path, [])]
    res = elliptic.finite_abelian_indicator_transform(orders, gens)
    elems = elliptic.group_elements(orders)
    T = res.transform.reshape(-1)
    rows = [[",".join(map(str, k)), T[i].real, T[i].imag, res.predicted.reshape(-1)[i]] for i, k in enumerate(elems)]
    return Table(["character", "re", "im", "predicted"], rows, {"orders": orders, "subgroup_order": res.subgroup_order},
                 [("indicator", res.ok, res.rounding_error, 1e-6)])


# --- torus ------------------------------------------------------------------------------------

def _torus_map(sc, args, path):
    m = _arg(args, "map", path, required=True)
    if isinstance(m, dict):
        return build_torus_map(m, f"{path}.args.map")
    return resolve(sc, "torus_maps", m, f"{path}.args.map")


def _s_grid(tm, args, path):
    node = _arg(args, "s_grid", path, required=True)
    if "points" in node:
        W, U = [], []
        for i, p in enumerate(node["points"]):
            W.append([float(x) for x in p["w"]])
            U.append([float(x) for x in p["u"]])
        return np.array(W).reshape(-1, tm.m), np.array(U).reshape(-1, tm.m)
    ws = [[float(x) for x in w] for w in node.get("w", [[0.0] * tm.m])]
    axes = []
    for i, ax in enumerate(node.get("u", [])):
        axes.append(np.linspace(float(ax["start"]), float(ax["stop"]), int(ax["num"])))
    if len(axes) != tm.m:
        raise ConfigError(f"{path}.args.s_grid.u", f"need {tm.m} axes")
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(tm.m, -1).T
    W = np.repeat(np.array(ws), len(grid), axis=0)
    U = np.tile(grid, (len(ws), 1))
    return W, U


def _quad(sc, args):
    q = args.get("quadrature", {}) or {}
    return torus.QuadratureSpec(tol=float(q.get("tol", sc.tolerances["quad_tol"])), width=float(q.get("width", 1.0)),
                                nodes=int(q.get("nodes", 8)), angle_points=int(q.get("angle_points", 8)))


def op_torus_transfer(sc, args, path, ctx):
    tm = _torus_map(sc, args, path)
    chi = build_character(args.get("chi"), f"{path}.args.chi", tm.n)
    f = build_integrand(_arg(args, "f", path, required=True), f"{path}.args.f", tm.n)
    W, U = _s_grid(tm, args, path)
    norm = args.get("normalization", "haar")
    quad = _quad(sc, args)
    vals, rule = torus.transfer_on_nodes(tm, chi, f, W, U, norm, quad)
    rows = [list(w) + list(u) + [v.real, v.imag] for w, u, v in zip(W, U, vals)]
    cols = [f"w{i}" for i in range(tm.m)] + [f"u{i}" for i in range(tm.m)] + ["re", "im"]
    return Table(cols, rows, {"normalization": norm, "fibre_radius": rule.radius, "tail_bound": rule.tail,
                              "quad_nodes": quad.nodes, "quad_width": quad.width, "angle_points": quad.angle_points})


def op_torus_adjunction(sc, args, path, ctx):
    tm = _torus_map(sc, args, path)
    chi = build_character(args.get("chi"), f"{path}.args.chi", tm.n)
    f = build_integrand(_arg(args, "f", path, required=True), f"{path}.args.f", tm.n)
    node = args.get("characters", {"count": 20})
    if isinstance(node, list):
        chars = [build_character(c, f"{path}.args.characters[{i}]", tm.m) for i, c in enumerate(node)]
    else:
        rng = np.random.default_rng(int(node.get("seed", ctx.get("seed", 0))))
        emax = 2 if tm.ground == "real" else int(node.get("eps_max", 3)) + 1
        lam_max = float(node.get("lam_max", 2.0))
        chars = []
        for _ in range(int(node.get("count", 20))):
            eps = rng.integers(0, emax, tm.m)
            if tm.ground == "discrete":
                eps = rng.integers(0, int(tm.q), tm.m)
            chars.append(torus.TwistCharacter(eps, rng.uniform(-lam_max, lam_max, tm.m)))
    quad = _quad(sc, args)
    reps = torus.adjunction_check(tm, chi, f, chars, args.get("normalization", "haar"), quad)
    rows = [[",".join(map(str, r.character.eps)), ",".join(_fmt(x) for x in r.character.lam),
             r.lhs.real, r.lhs.imag, r.rhs.real, r.rhs.imag, r.abs_error, r.rel_error] for r in reps]
    worst = max((r.rel_error for r in reps), default=0.0)
    tol = sc.tolerances["adjunction"]
    params = {k: v for k, v in reps[0].params.items()} if reps else {}
    return Table(["eps", "lam", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_error", "rel_error"], rows, params,
                 [("adjunction", worst < tol, worst, tol)])


def op_singular_locus(sc, args, path, ctx):
    tm = _torus_map(sc, args, path)
    roots = [[int(x) for x in r] for r in _arg(args, "roots", path, required=True)]
    pieces = torus.xi_singular_locus(tm, roots)
    rows = [[i, ",".join(str(x) for x in p.translation), repr(p.sublattice.T.tolist()), p.codim(tm.m)]
            for i, p in enumerate(pieces)]
    ok = all(p.codim(tm.m) >= 1 for p in pieces)
    return Table(["piece", "translation", "sublattice", "codim"], rows, {"roots": repr(roots)},
                 [("codimension", ok, min((p.codim(tm.m) for p in pieces), default=tm.m), 1)])


OPS = {
    "sl2_gram": op_sl2_gram,
    "pipeline": op_pipeline,
    "fourier_forward": op_fourier_forward,
    "fourier_roundtrip": op_fourier_roundtrip,
    "pullback": op_pullback,
    "change_of_basis": op_change_of_basis,
    "pseudocoefficient_duality": op_pseudocoefficient_duality,
    "indicator": op_indicator,
    "torus_transfer": op_torus_transfer,
    "torus_adjunction": op_torus_adjunction,
    "singular_locus": op_singular_locus,
}
