"""``stk`` command line: scenario runner, verification suites and shortcuts.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from graphlib import TopologicalSorter
from pathlib import Path

import yaml

from . import __version__
from .config import ConfigError, Scenario, load_scenario, parse_scenario
from .jobs import OPS, NumericFailure, Table

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))  # shortest round-trip form, platform independent
    if hasattr(v, "item"):  # numpy scalar
        return _fmt(v.item())
    return str(v)


def _kv(d):
    return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(d.items()))


def render_table(table: Table, job_name: str, op: str, sc: Scenario) -> str:
    """CSV text with a ``#`` header; no timestamps, so reruns are byte-identical."""
    tols = {c[0]: c[3] for c in table.checks}
    short = {k: v for k, v in table.params.items() if len(_fmt(v)) <= 40}
    row_params = _kv({**short, **{f"tol_{k}": v for k, v in tols.items()}})
    buf = io.StringIO()
    buf.write(f"# tool: stabletransfer {__version__}\n")
    buf.write(f"# scenario_sha256: {sc.sha256}\n")
    buf.write(f"# job: {job_name} ({op})\n")
    buf.write(f"# tolerances: {_kv(sc.tolerances)}\n")
    buf.write(f"# params: {_kv(table.params)}\n")
    for name, ok, value, tol in table.checks:
        buf.write(f"# check: {name} status={'pass' if ok else 'fail'} value={_fmt(float(value))} tol={_fmt(float(tol))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(table.columns) + ["params"])
    for row in table.rows:
        w.writerow([_fmt(v) for v in row] + [row_params])
    return buf.getvalue()


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _run_job(sc: Scenario, job, out_dir: Path, ctx) -> int:
    if job.op not in OPS:
        raise ConfigError(job.path + ".op", f"unknown operation {job.op!r} (known: {', '.join(sorted(OPS))})")
    target = out_dir / (job.out or f"{job.name}.csv")
    try:
        table = OPS[job.op](sc, job.args, job.path, ctx)
        table.assert_finite()
    except ConfigError:
        raise
    except Exception as exc:
        partial = target.with_name(target.name + ".partial")
        write_atomic(partial, f"# tool: stabletransfer {__version__}\n# scenario_sha256: {sc.sha256}\n"
                              f"# job: {job.name} ({job.op})\n# error: {type(exc).__name__}: {exc}\n")
        if isinstance(exc, (NumericFailure, FloatingPointError, ArithmeticError)):
            return EXIT_NUMERIC
        print(f"job {job.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_atomic(target, render_table(table, job.name, job.op, sc))
    return EXIT_OK if table.ok else EXIT_VERIFY


def run_scenario(sc: Scenario, out_dir, jobs: int = 1, seed: int = 0, backend=None) -> int:
    """Run the job DAG; independent jobs overlap up to ``jobs`` workers."""
    out_dir = Path(out_dir)
    by_name = {j.name: j for j in sc.jobs}
    for j in sc.jobs:
        if j.op not in OPS:
            raise ConfigError(j.path + ".op", f"unknown operation {j.op!r} (known: {', '.join(sorted(OPS))})")
    ctx = {"jobs": max(1, jobs), "seed": seed, "backend": backend}
    ts = TopologicalSorter({j.name: set(j.after) for j in sc.jobs})
    ts.prepare()
    status = {}
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        running = {}
        while ts.is_active():
            for name in ts.get_ready():
                running[ex.submit(_run_job, sc, by_name[name], out_dir, ctx)] = name
            done, _ = wait(running, return_when=FIRST_COMPLETED)
            for fut in done:
                name = running.pop(fut)
                status[name] = fut.result()
                ts.done(name)
    codes = [status[j.name] for j in sc.jobs]
    if EXIT_NUMERIC in codes:
        return EXIT_NUMERIC
    if EXIT_VERIFY in codes:
        return EXIT_VERIFY
    return EXIT_OK


def _tol_overrides(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError("--tol-override", f"expected KEY=VAL, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"--tol-override {k}", f"not a number: {v!r}") from None
    return out


def _single_job_scenario(op: str, args: dict, name: str, tol) -> Scenario:
    text = yaml.safe_dump({"jobs": [{"name": name, "op": op, "args": args}]}, sort_keys=True)
    return parse_scenario(text, f"<{op}>", tol)


def _load_args_file(path):
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"malformed YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(str(path), "expected a mapping")
    return data


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker count")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL")
    common.add_argument("--backend", choices=("numba", "numpy"), default=None)

    p = argparse.ArgumentParser(prog="stk", description="Stable transfer toolkit")
    p.add_argument("--version", action="version", version=f"stk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run a scenario file")
    r.add_argument("--config", required=True)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite on the shipped fixtures")
    v.add_argument("suite", choices=("fourier", "pullback", "elliptic", "sl2", "torus", "all"))

    s = sub.add_parser("sl2", parents=[common], help="SL2(R) tables and the Gelfand-Graev pipeline")
    s.add_argument("what", choices=("gram", "pipeline"))
    s.add_argument("--nmax", type=int, default=8)
    s.add_argument("--Q", type=int, default=2048)
    s.add_argument("--kind", choices=("stable", "discrete"), default="stable")
    s.add_argument("--config", help="pipeline arguments (YAML mapping)")

    t = sub.add_parser("torus-transfer", parents=[common], help="fibre integrals and the adjunction report")
    t.add_argument("--config", required=True)

    lo = sub.add_parser("singular-locus", parents=[common], help="xi-singular locus pieces")
    lo.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        tol = _tol_overrides(ns.tol_override)
        if ns.command == "run":
            sc = load_scenario(ns.config, tol)
            return run_scenario(sc, ns.out, ns.jobs, ns.seed, ns.backend)
        if ns.command == "verify":
            from .verify import run_suite
            return run_suite(ns.suite, out=ns.out, seed=ns.seed, tol_overrides=tol, backend=ns.backend)
        if ns.command == "sl2":
            if ns.what == "gram":
                sc = _single_job_scenario("sl2_gram", {"nmax": ns.nmax, "Q": ns.Q, "kind": ns.kind},
                                          f"sl2_gram_{ns.kind}", tol)
            else:
                if not ns.config:
                    raise ConfigError("--config", "the pipeline needs a config file")
                sc = _single_job_scenario("pipeline", _load_args_file(ns.config), "pipeline", tol)
            return run_scenario(sc, ns.out, ns.jobs, ns.seed, ns.backend)
        if ns.command == "torus-transfer":
            args = _load_args_file(ns.config)
            sc = parse_scenario(yaml.safe_dump({"jobs": [
                {"name": "torus_transfer", "op": "torus_transfer", "args": args},
                # the identity only holds for the Haar fibre measure
                {"name": "adjunction", "op": "torus_adjunction",
                 "args": {k: v for k, v in args.items() if k not in ("s_grid", "normalization")}},
            ]}, sort_keys=True), "<torus-transfer>", tol)
            return run_scenario(sc, ns.out, ns.jobs, ns.seed, ns.backend)
        if ns.command == "singular-locus":
            sc = _single_job_scenario("singular_locus", _load_args_file(ns.config), "singular_locus", tol)
            return run_scenario(sc, ns.out, ns.jobs, ns.seed, ns.backend)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
