"""Verification suites run against the shipped fixtures.

Each check emits one flat record
``suite=<s> check=<name> status=pass|fail value=<v> tol=<t> seconds=<dt>``.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import elliptic, fourier, samples, sl2, torus
from .config import DEFAULT_TOLERANCES, build_integrand, build_torus_map, load_scenario
from .pullback import compose, pullback, validate

SUITES = ("fourier", "pullback", "elliptic", "sl2", "torus")


@dataclass
class Check:
    suite: str
    name: str
    ok: bool
    value: float
    tol: float
    seconds: float = 0.0

    def record(self) -> str:
        return (f"suite={self.suite} check={self.name} status={'pass' if self.ok else 'fail'} "
                f"value={format(float(self.value), '.6g')} tol={format(float(self.tol), '.6g')} "
                f"seconds={self.seconds:.3f}")


def fixture_dir() -> Path:
    env = os.environ.get("STK_FIXTURES")
    if env:
        return Path(env)
    return Path(str(resources.files("stabletransfer") / "fixtures"))


class _Suite:
    def __init__(self, name, tol):
        self.name = name
        self.tol = tol
        self.checks = []

    def check(self, name, value, tol, ok=None):
        ok = (value < tol) if ok is None else ok
        self.checks.append(Check(self.name, name, bool(ok), value, tol))

    def timed(self, name, tol, fn, strict=True):
        t0 = time.perf_counter()
        value = fn()
        dt = time.perf_counter() - t0
        ok = value < tol if strict else value <= tol
        self.checks.append(Check(self.name, name, bool(ok), value, tol, dt))
        return value


# --- suites -------------------------------------------------------------------------

def suite_fourier(tol, seed=0, backend=None):
    s = _Suite("fourier", tol)
    sc = load_scenario(fixture_dir() / "fourier.yaml")
    lb = sc.functions["lattice_bump"]
    s.timed("fixture_lattice_roundtrip", tol["roundtrip"], lambda: fourier.roundtrip_report(lb)["sup_error"])
    g = sc.functions["gaussian"]
    s.timed("fixture_gaussian_roundtrip", tol["roundtrip_arch"],
            lambda: fourier.roundtrip_report(g, kernel_2pi=True, backend=backend)["sup_error"])

    def gaussian_forward():
        F = fourier.forward(g, kernel_2pi=True, backend=backend)
        p = F.pieces["e0"]
        lam = p.nodes()
        return float(np.abs(p.samples - np.exp(-math.pi * lam ** 2)).max())

    s.timed("gaussian_self_dual", tol["roundtrip_arch"], gaussian_forward)

    def random_roundtrips():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(200):
            f = samples.random_lattice_function(rng, int(rng.integers(1, 4)))
            rep = fourier.roundtrip_report(f)
            worst = max(worst, rep["sup_error"] if rep["finite"] else math.inf)
        return worst

    s.timed("random_lattice_roundtrips_200", tol["roundtrip"], random_roundtrips)
    return s.checks


def pulled_coeff_error(a, b):
    err = 0.0
    for e in set(a.pieces) | set(b.pieces):
        pa, pb = a.pieces.get(e), b.pieces.get(e)
        if hasattr(pa, "coeffs") or hasattr(pb, "coeffs"):
            ka = pa.coeffs if pa is not None else {}
            kb = pb.coeffs if pb is not None else {}
            err = max([err] + [abs(ka.get(k, 0) - kb.get(k, 0)) for k in set(ka) | set(kb)])
        else:
            if pa is None or pb is None:
                return math.inf
            err = max(err, float(np.abs(pa.samples - pb.samples).max()))
    return err


def suite_pullback(tol, seed=0, backend=None):
    s = _Suite("pullback", tol)
    sc = load_scenario(fixture_dir() / "pullback.yaml")
    pd, phi = sc.pullbacks["diagonal"], sc.functions["phi"]

    def aliasing():
        out = pullback(pd, phi).pieces["a"].coeffs
        want = {}
        for (n1, n2), v in phi.pieces["A"].coeffs.items():
            want[(n1 + n2,)] = want.get((n1 + n2,), 0) + v
        keys = set(out) | set(want)
        bad = any(out.get(k, 0) != want.get(k, 0) for k in keys)
        return math.inf if bad else 0.0

    s.timed("aliasing_exact_addition", 0.0, aliasing, strict=False)
    s.timed("extension_by_zero", 0.0, lambda: 0.0 if "b" not in pullback(pd, phi).pieces else 1.0, strict=False)

    def chains(kind, count):
        rng = np.random.default_rng(seed + (0 if kind == "nonarch" else 1))
        worst = 0.0
        for _ in range(count):
            outer, inner, phi_ = (samples.random_nonarch_chain if kind == "nonarch" else samples.random_arch_chain)(rng)
            if not (validate(outer).ok and validate(inner).ok):
                return math.inf
            a = pullback(inner, pullback(outer, phi_))
            b = pullback(compose(outer, inner), phi_)
            worst = max(worst, pulled_coeff_error(a, b))
            dom = dict(inner.component_map)
            if any(e not in dom for e in a.pieces) or a.cls != phi_.cls:
                return math.inf
        return worst

    s.timed("functoriality_nonarch_50", tol["functoriality"], lambda: chains("nonarch", 50))
    s.timed("functoriality_arch_50", tol["functoriality"], lambda: chains("arch", 50))
    return s.checks


def splitting_errors(blocks):
    cob = elliptic.change_of_basis(blocks)
    recon = cob.report["identity_error"]
    orth = 0.0
    for b in blocks:
        S, U = b.stable_matrix(), elliptic.unstable_complement(b)
        if len(S) and len(U):
            orth = max(orth, float(np.abs(U @ b.gram @ S.conj().T).max()))
    return recon, elliptic.cross_block_zero(cob), orth


def suite_elliptic(tol, seed=0, backend=None):
    s = _Suite("elliptic", tol)
    sc = load_scenario(fixture_dir() / "blocks.yaml")
    blocks = list(sc.blocks.values())
    recon, zero, orth = splitting_errors(blocks)
    s.check("fixture_reconstruction", recon, tol["splitting"])
    s.check("fixture_cross_block_zero", 0.0 if zero else 1.0, 0.0, ok=zero)
    s.check("fixture_unstable_orthogonal", orth, tol["splitting"])
    dual = max(elliptic.duality_table(b, elliptic.orthogonal_elliptic_basis(b))["max_error"] for b in blocks)
    s.check("fixture_pseudocoefficient_duality", dual, tol["splitting"])

    def random_blocks():
        rng = np.random.default_rng(seed)
        bl = [samples.random_block(rng, label=f"r{i}") for i in range(20)]
        r, z, o = splitting_errors(bl)
        return max(r, o) if z else math.inf

    s.timed("random_blocks_20", tol["splitting"], random_blocks)

    def subgroups():
        bad = 0
        for orders in elliptic.abelian_groups_up_to(200):
            res = elliptic.check_all_subgroups(orders)
            bad += res["failures"]
        return float(bad)

    s.timed("indicator_all_subgroups_200", 0.0, subgroups, strict=False)
    return s.checks


def suite_sl2(tol, seed=0, backend=None):
    s = _Suite("sl2", tol)
    s.timed("gram_stable_20", tol["gram"],
            lambda: float(np.abs(sl2.gram_table(sl2.stable_labels(20), 2048, backend) - 2 * np.eye(20)).max()))
    s.timed("gram_discrete_20", tol["gram"],
            lambda: float(np.abs(sl2.gram_table(sl2.discrete_labels(20), 2048, backend) - np.eye(40)).max()))

    def closed_form():
        rng = np.random.default_rng(seed)
        n = rng.integers(1, 40, 1000)
        th = rng.uniform(0.01, math.pi - 0.01, 1000) * rng.choice([-1, 1], 1000)
        m = rng.uniform(0.5, 2.0, 1000)
        got = np.array([sl2.pseudocoefficient_elliptic(int(k), t, mm) for k, t, mm in zip(n, th, m)])
        theta_st = -np.sin(n * th) / np.sin(th)
        want = (1 / m) * 2 * np.abs(np.sin(th)) * np.conj(theta_st)
        return float(np.abs(got - want).max())

    s.timed("pseudocoefficient_closed_form_1000", tol["pseudocoefficient"], closed_form)

    def pipeline():
        a = {1: 1.0, 2: 0.5, 3: 0.25 - 0.125j, 5: 0.1}
        res = sl2.gelfand_graev_pipeline(a, 2048, 64, 6, backend=backend)
        return max(abs(res.stable_transform.get(n, 0) - 2 * a.get(n, 0)) for n in range(1, 6))

    s.timed("stable_transform_of_pseudocoefficients", tol["gram"], pipeline)
    return s.checks


def _torus_fixture():
    raw = yaml.safe_load((fixture_dir() / "torus.yaml").read_text())
    maps = {m["name"]: build_torus_map(m, f"torus_maps.{m['name']}") for m in raw["torus_maps"]}
    return raw, maps


def adjunction_fixture_checks(s, raw, maps, tol, seed):
    rng = np.random.default_rng(seed)
    quad = torus.QuadratureSpec(tol=1e-10)
    cases = [("square", "gauss1"), ("sum", "gauss2_signed"), ("rank2", "gauss3_signed")]
    for name, fname in cases:
        tm = maps[name]
        f = build_integrand(raw["integrands"][fname], fname, tm.n)
        chi = torus.TwistCharacter(rng.integers(0, 2, tm.n), rng.uniform(-1, 1, tm.n))
        chars = [torus.TwistCharacter(rng.integers(0, 2, tm.m), rng.uniform(-2, 2, tm.m)) for _ in range(20)]
        s.timed(f"adjunction_{name}_20", tol["adjunction"],
                lambda: max(r.rel_error for r in torus.adjunction_check(tm, chi, f, chars, quad=quad)))


def suite_torus(tol, seed=0, backend=None):
    s = _Suite("torus", tol)
    raw, maps = _torus_fixture()
    ok = all(torus.kernel_sanity(tm) for tm in maps.values())
    s.check("kernel_sanity", 0.0 if ok else 1.0, 0.0, ok=ok)
    kd = torus.kernel_decomposition(maps["square"])
    s.check("kernel_square_order", abs(kd.order - 2), 0.0, ok=kd.order == 2 and kd.connected_part.size == 0)
    g1 = build_integrand(raw["integrands"]["gauss1"], "gauss1", 1)
    triv = torus.TwistCharacter.trivial(1)
    v = torus.fiber_integrate(maps["square"], triv, g1, [0.0], [2.0], normalization="counting").value
    s.check("fibre_square_counting", abs(v - 2 * math.exp(-1)), 1e-12)
    empty = torus.fiber_integrate(maps["square"], triv, g1, [0.5], [0.0])
    s.check("empty_fibre_exact_zero", abs(empty.value), 0.0, ok=empty.empty and empty.value == 0)
    adjunction_fixture_checks(s, raw, maps, tol, seed)
    pieces = torus.xi_singular_locus(maps["sl2c"], raw["roots"]["sl2c"])
    good = (len(pieces) == 1 and pieces[0].rank == 0 and pieces[0].translation == (0,)
            and pieces[0].codim(1) == 1)
    s.check("locus_sl2c_is_identity", 0.0 if good else 1.0, 0.0, ok=good)
    return s.checks


SUITE_FUNCS = {
    "fourier": suite_fourier,
    "pullback": suite_pullback,
    "elliptic": suite_elliptic,
    "sl2": suite_sl2,
    "torus": suite_torus,
}


def collect(suite: str, seed=0, tol_overrides=None, backend=None) -> list[Check]:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tol_overrides or {})
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for name in names:
        checks += SUITE_FUNCS[name](tol, seed, backend)
    return checks


def run_suite(suite: str, out=None, seed=0, tol_overrides=None, backend=None) -> int:
    if suite != "all" and suite not in SUITE_FUNCS:
        print(f"unknown suite {suite!r}")
        return 2
    checks = collect(suite, seed, tol_overrides, backend)
    lines = [c.record() for c in checks]
    failed = sum(not c.ok for c in checks)
    lines.append(f"suite={suite} summary={'pass' if not failed else 'fail'} checks={len(checks)} failed={failed}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out is not None:
        p = Path(out)
        p.mkdir(parents=True, exist_ok=True)
        tmp = p / f"verify_{suite}.txt.tmp"
        tmp.write_text(text)
        os.replace(tmp, p / f"verify_{suite}.txt")
    return 0 if not failed else 1
