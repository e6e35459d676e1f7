import csv
import io
import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from artifact import __version__
from artifact.cli import RunConfig, load_config, main


def run(*args):
    return CliRunner().invoke(main, list(args))


def table(text):
    rows = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(rows))))


def test_weights_table():
    res = run("weights", "--family", "sw", "--ell", "1", "--p", "2", "--n-max", "3")
    assert res.exit_code == 0
    lines = res.stdout.splitlines()
    assert lines[0] == f"# artifact {__version__} weights"
    assert lines[1].startswith("# config: {")
    rows = table(res.stdout)
    vals = [float(r[rows[0].index("value")]) for r in rows[1:]]
    assert vals == pytest.approx([0.5, 1 / 12, 1 / 30], rel=1e-15)


def test_weights_named_families():
    res = run("weights", "--family", "classical_hardy_p", "--p", "2", "--n-max", "2")
    rows = table(res.stdout)
    assert [float(r[rows[0].index("value")]) for r in rows[1:]] == pytest.approx([0.25, 0.0625])
    res = run("weights", "--family", "kpp", "--n-max", "1")
    rows = table(res.stdout)
    assert float(rows[1][rows[0].index("value")]) == pytest.approx(0.5857864376269, rel=1e-12)


def test_invalid_combination_is_a_usage_error():
    res = run("weights", "--family", "kpp", "--ell", "2")
    assert res.exit_code == 2


def test_verify_default_passes():
    res = run("verify", "--trials", "200")
    assert res.exit_code == 0
    assert "corpus_violations=0" in res.stderr


def test_verify_zero_trials():
    assert run("verify", "--trials", "0").exit_code == 2


def test_verify_inflated_weight_fails_with_replay():
    res = run("verify", "--family", "classical_birman", "--ell", "1", "--p", "2", "--trials", "50",
              "--debug-weight-scale", "1.01")
    assert res.exit_code == 1
    replay = [l for l in res.stderr.splitlines() if l.startswith("# replay: ")]
    assert replay and "kind" in json.loads(replay[0][len("# replay: "):])


def test_audit_command():
    res = run("audit", "--ell", "3", "--p", "2.5", "--family", "sw", "--n-max", "300")
    assert res.exit_code == 0
    rows = table(res.stdout)
    assert {r[2] for r in rows[1:]} == {"A1", "A2", "A3_strict", "A4"}
    assert all(r[5] == "True" for r in rows[1:])


def test_probe_optimality_and_oracle():
    res = run("probe", "--kind", "optimality", "--ell", "1", "--p", "2", "--N-list", "16,32,64")
    assert res.exit_code == 0
    rq = [float(r[3]) for r in table(res.stdout)[1:]]
    assert all(b < a for a, b in zip(rq, rq[1:])) and min(rq) >= 1 - 1e-9
    res = run("probe", "--kind", "oracle", "--ell", "1", "--p", "2", "--N-list", "100,200")
    assert res.exit_code == 0
    vals = [float(r[1]) for r in table(res.stdout)[1:]]
    assert 1 < vals[1] <= vals[0] < 1.6


def test_scan_and_scalar_commands():
    res = run("scan", "--ell", "1-2", "--p", "2,3", "--n-max", "200", "--K", "2")
    assert res.exit_code == 0
    res = run("lemma", "--p", "1.5,2,4")
    assert res.exit_code == 0
    assert len(table(res.stdout)) == 4


def test_json_output(tmp_path):
    out = tmp_path / "w.json"
    res = run("weights", "--family", "sw", "--n-max", "4", "--format", "json", "--out", str(out))
    assert res.exit_code == 0
    doc = json.loads(out.read_text())
    assert doc["version"] == __version__ and doc["command"] == "weights"
    assert len(doc["rows"]) == 4 and "value" in doc["columns"]


def test_config_file_and_rejections(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ell": 2, "p": 3, "family": "sw", "n-max": 5}))
    res = run("weights", "--config", str(cfg))
    assert res.exit_code == 0 and len(table(res.stdout)) == 5
    assert json.loads(res.stdout.splitlines()[1][len("# config: "):])["ell"] == 2
    cfg.write_text(json.dumps({"ell": 2, "bogus": 1}))
    assert run("weights", "--config", str(cfg)).exit_code == 2
    cfg.write_text(json.dumps({"ell": {"nested": 1}}))
    assert run("weights", "--config", str(cfg)).exit_code == 2


def test_load_config_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"ell": 2, "lambda": 0.5}))
    c = load_config(str(cfg), {"ell": "3", "p": None})
    assert isinstance(c, RunConfig) and c.ell == 3 and c.lam == 0.5


def test_numeric_failure_exit_code():
    res = run("probe", "--kind", "optimality", "--ell", "1", "--p", "2", "--N-list", "4000,8000")
    assert res.exit_code == 3
    assert json.loads(res.stderr.strip().splitlines()[-1])["error"] == "MemoryError"


def test_extended_output_digits():
    res = run("weights", "--family", "sw", "--ell", "1", "--p", "3", "--n-max", "1",
              "--precision", "extended")
    val = table(res.stdout)[1][table(res.stdout)[0].index("value")]
    assert val.startswith("5.55555555555555555555555555555")


def test_byte_identical_reruns(tmp_path):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"v{threads}.csv"
        cmd = [sys.executable, "-m", "artifact.cli", "verify", "--ell", "2", "--p", "3",
               "--family", "sw_tilde", "--trials", "120", "--seed", "5", "--threads", threads,
               "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append(out.read_bytes())
    assert outs[0].split(b"\n", 2)[2] == outs[1].split(b"\n", 2)[2]
    again = tmp_path / "again.csv"
    subprocess.run(cmd[:-1] + [str(again)], check=True, capture_output=True)
    assert again.read_bytes() == outs[1]
