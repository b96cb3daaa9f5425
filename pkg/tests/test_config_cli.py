import csv
import shutil
import subprocess
import sys

import numpy as np
import pytest
import yaml

from stabletransfer.cli import main
from stabletransfer.config import ConfigError, parse_scenario
from stabletransfer.verify import fixture_dir


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return p


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_empty_job_list(tmp_path):
    cfg = write(tmp_path, "empty.yaml", {"jobs": []})
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert not out.exists() or not any(out.iterdir())


def test_malformed_config_names_field(tmp_path, capsys):
    cfg = write(tmp_path, "bad.yaml", {"jobs": [{"name": "g", "op": "sl2_gram", "args": {"nmax": "eight"}}]})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "jobs[0].args.nmax" in capsys.readouterr().err


def test_unknown_op_and_bad_yaml(tmp_path):
    cfg = write(tmp_path, "bad.yaml", {"jobs": [{"name": "g", "op": "nope"}]})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg = write(tmp_path, "worse.yaml", "jobs: [\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_cyclic_jobs_rejected():
    text = yaml.safe_dump({"jobs": [{"name": "a", "op": "sl2_gram", "after": ["b"]},
                                    {"name": "b", "op": "sl2_gram", "after": ["a"]}]})
    with pytest.raises(ConfigError):
        parse_scenario(text, "<cycle>")


def test_sl2_gram_table(tmp_path):
    out = tmp_path / "o"
    assert main(["sl2", "gram", "--nmax", "8", "--Q", "2048", "--out", str(out)]) == 0
    rows = read_rows(out / "sl2_gram_stable.csv")
    G = np.zeros((8, 8))
    for r in rows:
        G[int(r["row"].split(":")[1]) - 1, int(r["col"].split(":")[1]) - 1] = float(r["re"])
    assert np.abs(G - 2 * np.eye(8)).max() < 1e-8
    assert all("Q=2048" in r["params"] and "tol_gram" in r["params"] for r in rows)
    head = (out / "sl2_gram_stable.csv").read_text()
    assert head.startswith("# tool: stabletransfer") and "# scenario_sha256:" in head


def test_determinism(tmp_path):
    sc = yaml.safe_load((fixture_dir() / "blocks.yaml").read_text())
    sc["jobs"] = [
        {"name": "cob", "op": "change_of_basis", "args": {"blocks": ["sl2_pair", "packet4", "skew"]}},
        {"name": "dual", "op": "pseudocoefficient_duality", "args": {"block": "skew"}},
        {"name": "ind", "op": "indicator", "args": {"orders": [4, 6], "generators": [[2, 3]]}},
        {"name": "gram", "op": "sl2_gram", "args": {"nmax": 4, "Q": 256}, "after": ["cob"]},
    ]
    cfg = write(tmp_path, "det.yaml", sc)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--jobs", "3"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert len(names) == 4 and names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_failed_job_leaves_partial(tmp_path):
    cfg = write(tmp_path, "loc.yaml", {"jobs": [
        {"name": "loc", "op": "singular_locus", "args": {"map": {"M": [[2]], "ground": "real"}, "roots": [[2]]}}]})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 3
    assert (out / "loc.csv.partial").exists() and not (out / "loc.csv").exists()
    assert "# error:" in (out / "loc.csv.partial").read_text()


def test_singular_locus_cli(tmp_path):
    cfg = write(tmp_path, "loc.yaml", {"map": {"M": [[2]], "ground": "complex"}, "roots": [[2], [-2]]})
    out = tmp_path / "o"
    assert main(["singular-locus", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "singular_locus.csv")
    assert len(rows) == 1 and rows[0]["translation"] == "0" and rows[0]["codim"] == "1"


def test_torus_transfer_cli(tmp_path):
    cfg = write(tmp_path, "tt.yaml", {
        "map": {"M": [[2]], "ground": "real"},
        "f": {"terms": [{"coef": 1.0, "a": 1.0}]},
        "s_grid": {"w": [[0.0], [0.5]], "u": [{"start": -1.0, "stop": 1.0, "num": 5}]},
        "normalization": "counting",
        "characters": {"count": 3},
    })
    out = tmp_path / "o"
    assert main(["torus-transfer", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_rows(out / "torus_transfer.csv")
    assert len(rows) == 10
    # negative s: empty fibre
    assert all(float(r["re"]) == 0 and float(r["im"]) == 0 for r in rows if r["w0"] == "0.5")
    assert all(float(r["rel_error"]) < 1e-6 for r in read_rows(out / "adjunction.csv"))


def test_verify_exit_codes(tmp_path):
    assert main(["verify", "elliptic", "--out", str(tmp_path / "v")]) == 0
    assert main(["verify", "sl2", "--out", str(tmp_path / "w"), "--tol-override", "gram=1e-30"]) == 1
    assert main(["sl2", "gram", "--out", str(tmp_path / "x"), "--tol-override", "nonsense"]) == 2


def test_fixture_override(tmp_path, monkeypatch):
    alt = tmp_path / "fx"
    shutil.copytree(fixture_dir(), alt)
    monkeypatch.setenv("STK_FIXTURES", str(alt))
    assert fixture_dir() == alt
    (alt / "blocks.yaml").write_text("blocks: [\n")
    assert main(["verify", "elliptic", "--out", str(tmp_path / "v")]) != 0


def test_entry_point_version():
    r = subprocess.run([sys.executable, "-m", "stabletransfer.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
