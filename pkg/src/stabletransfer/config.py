"""Scenario files: a YAML tree of named families, functions, pullbacks,
elliptic blocks, torus maps and jobs.

Every schema problem raises :class:`ConfigError` carrying the field path,
e.g. ``jobs[2].args.Q: expected an integer``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .elliptic import BlockError, EllipticBlock
from .functions import (
    CompactSupport, FamilyFunction, GridFunction, LatticeFunction, PaleyWiener, PointFunction, RapidDecay,
    Schwartz, TorusFunction,
)
from .pullback import PullbackData
from .spaces import ComponentDescriptor, FieldKind, NormRule, SpaceFamily, validate_family
from .torus import TorusError, TorusIntegrand, TorusMap, TwistCharacter

DEFAULT_TOLERANCES = {
    "roundtrip": 1e-12,
    "roundtrip_arch": 1e-6,
    "gram": 1e-8,
    "functoriality": 1e-10,
    "splitting": 1e-10,
    "pseudocoefficient": 1e-12,
    "adjunction": 1e-6,
    "quad_tol": 1e-12,
    "locus": 1e-9,
}


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# --- typed accessors --------------------------------------------------------------

def _req(node, key, path):
    if not isinstance(node, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in node:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return node[key]


def _int(x, path, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    if lo is not None and x < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return x


def _float(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(path, f"expected a number, got {x!r}")
    return float(x)


def _complex(x, path):
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(_float(x[0], path + "[0]"), _float(x[1], path + "[1]"))
    return complex(_float(x, path))


def _list(x, path):
    if not isinstance(x, list):
        raise ConfigError(path, f"expected a list, got {type(x).__name__}")
    return x


def _matrix(x, path, rows=None, cols=None, dtype=np.float64):
    rows_ = _list(x, path)
    try:
        arr = np.array(rows_, dtype=dtype)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a numeric matrix") from None
    if arr.size == 0:
        arr = arr.reshape(rows or 0, cols or 0)
    if arr.ndim != 2:
        raise ConfigError(path, "expected a list of rows")
    if (rows is not None and arr.shape[0] != rows) or (cols is not None and arr.shape[1] != cols):
        raise ConfigError(path, f"expected shape {(rows, cols)}, got {arr.shape}")
    return arr


# --- builders ------------------------------------------------------------------------

def build_field(x, path) -> FieldKind:
    if x == "archimedean":
        return FieldKind.archimedean()
    if x == "compact":
        return FieldKind.compact()
    if isinstance(x, dict) and "non_archimedean" in x:
        return FieldKind.non_archimedean(_int(x["non_archimedean"], path + ".non_archimedean", 2))
    raise ConfigError(path, "field must be 'archimedean', 'compact' or {non_archimedean: q}")


def build_family(node, path) -> SpaceFamily:
    fk = build_field(_req(node, "field", path), path + ".field")
    dim = _int(_req(node, "dim", path), path + ".dim", 0)
    ip = node.get("inner_product", np.eye(dim).tolist())
    ip = _matrix(ip, path + ".inner_product", dim, dim) if dim else np.zeros((0, 0))
    comps = []
    for i, c in enumerate(_list(_req(node, "components", path), path + ".components")):
        cp = f"{path}.components[{i}]"
        cid = str(_req(c, "id", cp))
        norm = c.get("norm")
        lat = c.get("lattice")
        comps.append(ComponentDescriptor(cid, None if norm is None else _float(norm, cp + ".norm"),
                                         None if lat is None else _matrix(lat, cp + ".lattice", dim, dim, np.int64)))
    rule = None
    if "norm_rule" in node:
        r = node["norm_rule"]
        rule = NormRule(_float(_req(r, "start", path + ".norm_rule"), path + ".norm_rule.start"),
                        _float(_req(r, "step", path + ".norm_rule"), path + ".norm_rule.step"),
                        str(r.get("prefix", "e")))
    fam = SpaceFamily(fk, dim, ip, tuple(comps), str(node.get("name", "")), rule)
    if "generate" in node:
        fam = fam.with_generated(_int(node["generate"], path + ".generate", 0))
    rep = validate_family(fam)
    if not rep.ok:
        raise ConfigError(path, rep.summary())
    return fam


def _coeffs(node, path, dim):
    out = {}
    for i, row in enumerate(_list(node, path)):
        rp = f"{path}[{i}]"
        if not isinstance(row, list) or len(row) not in (2, 3):
            raise ConfigError(rp, "coefficient entries are [point, re] or [point, re, im]")
        pt = row[0] if isinstance(row[0], list) else [row[0]]
        if len(pt) != dim:
            raise ConfigError(rp, f"point has dimension {len(pt)}, expected {dim}")
        key = tuple(_int(v, rp + "[0]") for v in pt)
        im = _float(row[2], rp + "[2]") if len(row) == 3 else 0.0
        out[key] = complex(_float(row[1], rp + "[1]"), im)
    return out


def _certificate(node, path):
    if not isinstance(node, dict) or len(node) != 1:
        raise ConfigError(path, "certificate is {compact: r}, {rapid: [r, C, N]}, {pw: r} or {schwartz: [r, C, N]}")
    (k, v), = node.items()
    if k == "compact":
        return CompactSupport(_float(v, path + ".compact"))
    if k == "pw":
        return PaleyWiener(_float(v, path + ".pw"))
    if k in ("rapid", "schwartz"):
        vals = [_float(x, f"{path}.{k}[{i}]") for i, x in enumerate(_list(v, path + "." + k))]
        if len(vals) != 3:
            raise ConfigError(path + "." + k, "expected [radius, C, N]")
        return (RapidDecay if k == "rapid" else Schwartz)(*vals)
    raise ConfigError(path, f"unknown certificate {k!r}")


def _grid_samples(node, path, dim, L, h):
    n = 2 * int(round(L / h)) + 1
    if "gaussian" in node:
        g = node["gaussian"]
        a = _float(g.get("a", 1.0), path + ".gaussian.a")
        amp = _complex(g.get("amplitude", 1.0), path + ".gaussian.amplitude")
        x = -L + h * np.arange(n)
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        r2 = sum(gr ** 2 for gr in grids) if dim else np.zeros(())
        return amp * np.exp(-a * r2)
    if "values" in node:
        re = np.asarray(node["values"], dtype=np.float64)
        im = np.asarray(node.get("imag", np.zeros_like(re)), dtype=np.float64)
        if re.shape != (n,) * dim or im.shape != re.shape:
            raise ConfigError(path + ".values", f"expected sample array of shape {(n,) * dim}")
        return re + 1j * im
    raise ConfigError(path, "grid samples need 'gaussian' or 'values'")


def build_piece(fam: SpaceFamily, e: str, node, path, side, kernel_2pi):
    kind = _req(node, "type", path)
    if kind == "lattice":
        return LatticeFunction(fam, e, _coeffs(_req(node, "coeffs", path), path + ".coeffs", fam.dim),
                               _certificate(_req(node, "decay", path), path + ".decay"))
    if kind == "torus":
        return TorusFunction(fam, e, _coeffs(_req(node, "coeffs", path), path + ".coeffs", fam.dim),
                             _certificate(_req(node, "class", path), path + ".class"), kernel_2pi)
    if kind == "grid":
        L = _float(_req(node, "L", path), path + ".L")
        h = _float(_req(node, "h", path), path + ".h")
        samples = _grid_samples(node, path, fam.dim, L, h)
        sr = node.get("support_radius")
        if sr is not None:
            sr = _float(sr, path + ".support_radius")
            x = -L + h * np.arange(samples.shape[0] if fam.dim else 1)
            pts = np.array(np.meshgrid(*([x] * fam.dim), indexing="ij")).reshape(fam.dim, -1).T
            r = fam.metric_norm(pts).reshape(samples.shape)
            samples = np.where(r <= sr, samples, 0)
        return GridFunction(fam, e, samples, L, h, side=side, support_radius=sr, kernel_2pi=kernel_2pi)
    if kind == "point":
        return PointFunction(fam, e, _complex(_req(node, "value", path), path + ".value"))
    raise ConfigError(path + ".type", f"unknown piece type {kind!r}")


def build_function(node, path, families) -> FamilyFunction:
    fname = _req(node, "family", path)
    if fname not in families:
        raise ConfigError(path + ".family", f"unknown family {fname!r}")
    fam = families[fname]
    side = node.get("side", "X")
    if side not in ("X", "Lambda"):
        raise ConfigError(path + ".side", "side is 'X' or 'Lambda'")
    kernel_2pi = bool(node.get("kernel_2pi", False))
    pieces = {}
    for e, p in (_req(node, "pieces", path) or {}).items():
        if str(e) not in fam.ids:
            raise ConfigError(f"{path}.pieces.{e}", f"unknown component of family {fname!r}")
        pieces[str(e)] = build_piece(fam, str(e), p, f"{path}.pieces.{e}", side, kernel_2pi)
    decay = node.get("decay")
    if decay is not None:
        decay = tuple(_float(x, f"{path}.decay[{i}]") for i, x in enumerate(_list(decay, path + ".decay")))
    radius = node.get("radius")
    try:
        return FamilyFunction(fam, pieces, str(_req(node, "class", path)), side,
                              None if radius is None else _float(radius, path + ".radius"), decay,
                              {"kernel_2pi": kernel_2pi})
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def build_pullback(node, path, families) -> PullbackData:
    src, tgt = _req(node, "source", path), _req(node, "target", path)
    for k, v in (("source", src), ("target", tgt)):
        if v not in families:
            raise ConfigError(f"{path}.{k}", f"unknown family {v!r}")
    S, T = families[src], families[tgt]
    cmap = _req(node, "component_map", path)
    if not isinstance(cmap, dict):
        raise ConfigError(path + ".component_map", "expected a mapping source -> target")
    lin = _matrix(node.get("linear_map", np.eye(T.dim, S.dim).tolist()), path + ".linear_map", T.dim, S.dim) \
        if S.dim or T.dim else np.zeros((T.dim, S.dim))
    growth = node.get("growth")
    if growth is not None:
        growth = (_float(growth[0], path + ".growth[0]"), _float(growth[1], path + ".growth[1]"))
    return PullbackData(S, T, tuple((str(a), str(b)) for a, b in cmap.items()), lin, growth, str(node.get("name", "")))


def build_block(node, path) -> EllipticBlock:
    labels = [str(x) for x in _list(_req(node, "basis_labels", path), path + ".basis_labels")]
    g = _req(node, "gram", path)
    if isinstance(g, dict):
        gram = _matrix(_req(g, "re", path + ".gram"), path + ".gram.re", len(labels), len(labels)) + \
            1j * _matrix(g.get("im", np.zeros((len(labels),) * 2).tolist()), path + ".gram.im", len(labels), len(labels))
    else:
        gram = _matrix(g, path + ".gram", len(labels), len(labels))
    try:
        return EllipticBlock(str(node.get("name", "")), tuple(labels), gram,
                             tuple(tuple(v) for v in node.get("stable_vectors", [])),
                             node.get("iota"), node.get("weyl_order"), bool(node.get("orthogonal_mode", False)))
    except (BlockError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def build_torus_map(node, path) -> TorusMap:
    M = _matrix(_req(node, "M", path), path + ".M", dtype=np.int64)
    try:
        return TorusMap(M, str(node.get("ground", "real")), node.get("q"))
    except TorusError as exc:
        raise ConfigError(path, str(exc)) from None


def build_character(node, path, n) -> TwistCharacter:
    if node is None:
        return TwistCharacter.trivial(n)
    eps = node.get("eps", [0] * n)
    lam = node.get("lam", [0.0] * n)
    if len(eps) != n or len(lam) != n:
        raise ConfigError(path, f"character data must have length {n}")
    return TwistCharacter(tuple(_int(e, f"{path}.eps[{i}]") for i, e in enumerate(eps)),
                          tuple(_float(x, f"{path}.lam[{i}]") for i, x in enumerate(lam)))


def build_integrand(node, path, n) -> TorusIntegrand:
    """``{terms: [{coef, a, center, mode}]}``: ``sum coef exp(-a |u - center|^2) exp(2 pi i mode.w)``.

    The certificate uses ``|u - c|^2 >= |u|^2 / 2 - |c|^2``.  A ``grid`` node
    (real field) gives per-sign samples with an explicit ``decay``.
    """
    if "grid" in node:
        g = node["grid"]
        L = _float(_req(g, "L", path + ".grid"), path + ".grid.L")
        h = _float(_req(g, "h", path + ".grid"), path + ".grid.h")
        sheets = {}
        for key, vals in _req(g, "sheets", path + ".grid").items():
            sheets[tuple(int(x) for x in str(key).split(","))] = np.asarray(vals, dtype=np.float64)
        dec = _req(node, "decay", path)
        return TorusIntegrand.from_grid(sheets, L, h, (str(dec[0]), float(dec[1]), float(dec[2])), "grid")
    terms = []
    for i, t in enumerate(_list(_req(node, "terms", path), path + ".terms")):
        tp = f"{path}.terms[{i}]"
        coef = _complex(t.get("coef", 1.0), tp + ".coef")
        a = _float(t.get("a", 1.0), tp + ".a")
        if a <= 0:
            raise ConfigError(tp + ".a", "must be positive")
        c = np.array([_float(x, tp + ".center") for x in t.get("center", [0.0] * n)])
        mode = np.array([_int(x, tp + ".mode") for x in t.get("mode", [0] * n)], dtype=np.float64)
        if len(c) != n or len(mode) != n:
            raise ConfigError(tp, f"center and mode need length {n}")
        terms.append((coef, a, c, mode))
    centred = all(not c.any() for _, _, c, _ in terms)
    C = sum(abs(coef) * (1.0 if centred else math.exp(a * float(c @ c))) for coef, a, c, _ in terms)
    amin = min((a for _, a, _, _ in terms), default=1.0) / (1.0 if centred else 2.0)

    def fn(w, u):
        w = np.atleast_2d(w)
        u = np.atleast_2d(u)
        out = np.zeros(len(u), dtype=np.complex128)
        for coef, a, c, mode in terms:
            out += coef * np.exp(-a * ((u - c) ** 2).sum(axis=1) + 2j * math.pi * (w @ mode))
        return out

    return TorusIntegrand(fn, ("gauss", C, amin), "terms")


# --- scenario ------------------------------------------------------------------------

@dataclass
class Job:
    name: str
    op: str
    args: dict
    out: str | None
    after: list
    path: str


@dataclass
class Scenario:
    families: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)
    pullbacks: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)
    torus_maps: dict = field(default_factory=dict)
    jobs: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    sha256: str = ""
    source: str = ""


def _named(node, key, path):
    items = node.get(key) or []
    _list(items, f"{path}{key}")
    seen = {}
    for i, item in enumerate(items):
        p = f"{key}[{i}]"
        name = str(_req(item, "name", p))
        if name in seen:
            raise ConfigError(p + ".name", f"duplicate name {name!r}")
        seen[name] = (item, p)
    return seen


def parse_scenario(text: str, source: str = "<string>", tol_overrides=None) -> Scenario:
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "yaml"
        raise ConfigError(where, f"malformed YAML ({getattr(exc, 'problem', exc)})") from None
    if root is None:
        root = {}
    if not isinstance(root, dict):
        raise ConfigError("", "scenario must be a mapping at the top level")
    known = {"version", "tolerances", "families", "functions", "pullbacks", "blocks", "torus_maps", "jobs"}
    for k in root:
        if k not in known:
            raise ConfigError(str(k), "unknown top-level field")
    sc = Scenario(sha256=hashlib.sha256(text.encode()).hexdigest(), source=source)
    for k, v in (root.get("tolerances") or {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{k}", "unknown tolerance key")
        sc.tolerances[k] = _float(v, f"tolerances.{k}")
    for k, v in (tol_overrides or {}).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol-override {k}", "unknown tolerance key")
        sc.tolerances[k] = float(v)
    for name, (node, p) in _named(root, "families", "").items():
        node = dict(node, name=name)
        try:
            sc.families[name] = build_family(node, p)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(p, str(exc)) from None
    for name, (node, p) in _named(root, "functions", "").items():
        try:
            sc.functions[name] = build_function(node, p, sc.families)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(p, str(exc)) from None
    for name, (node, p) in _named(root, "pullbacks", "").items():
        sc.pullbacks[name] = build_pullback(dict(node, name=name), p, sc.families)
    for name, (node, p) in _named(root, "blocks", "").items():
        sc.blocks[name] = build_block(dict(node, name=name), p)
    for name, (node, p) in _named(root, "torus_maps", "").items():
        sc.torus_maps[name] = build_torus_map(node, p)
    jobs = _named(root, "jobs", "")
    for name, (node, p) in jobs.items():
        after = [str(x) for x in node.get("after", [])]
        for j, dep in enumerate(after):
            if dep not in jobs:
                raise ConfigError(f"{p}.after[{j}]", f"unknown job {dep!r}")
        args = node.get("args") or {}
        if not isinstance(args, dict):
            raise ConfigError(p + ".args", "expected a mapping")
        sc.jobs.append(Job(name, str(_req(node, "op", p)), args, node.get("out"), after, p))
    _check_acyclic(sc.jobs)
    return sc


def _check_acyclic(jobs):
    from graphlib import CycleError, TopologicalSorter

    ts = TopologicalSorter({j.name: set(j.after) for j in jobs})
    try:
        tuple(ts.static_order())
    except CycleError as exc:
        raise ConfigError("jobs", f"dependency cycle {exc.args[1]}") from None


def load_scenario(path, tol_overrides=None) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read scenario ({exc.strerror})") from None
    return parse_scenario(text, str(p), tol_overrides)


def resolve(sc: Scenario, table: str, name, path):
    pool = getattr(sc, table)
    if name not in pool:
        raise ConfigError(path, f"unknown {table[:-1].replace('_', ' ')} {name!r}")
    return pool[name]
