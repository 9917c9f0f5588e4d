from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from dynpanel import FailureRateError, NoSwitchersError, cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out.strip(), err


@pytest.fixture(scope="module")
def panel(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert cli.main(["simulate", "--design", "d1", "--n", "2000", "--seed", "7", "--out", str(d)]) == 0
    return d / "panel_d1_norm_n2000_seed7.csv"


def test_simulate_is_byte_deterministic(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--design", "d1", "--z", "norm", "--n", "5000", "--seed", "7",
                       "--out", tmp_path / "a")
    assert code == 0
    first = open(out, "rb").read()
    code, out2, _ = run(capsys, "simulate", "--design", "d1", "--z", "norm", "--n", "5000", "--seed", "7",
                        "--out", tmp_path / "b")
    assert open(out2, "rb").read() == first
    with open(out) as fh:
        ids = {row["id"] for row in csv.DictReader(fh)}
    assert len(ids) == 5000
    assert (tmp_path / "a" / "panel_d1_norm_n5000_seed7.config.json").exists()


def test_unknown_design(tmp_path, capsys):
    code, out, err = run(capsys, "simulate", "--design", "d3", "--out", tmp_path)
    assert code == 2
    assert out == ""
    assert "unknown design" in err


def test_bad_flag_values(tmp_path, capsys):
    assert run(capsys, "simulate", "--design", "d1", "--n", "many")[0] == 2
    assert run(capsys, "estimate", "--data", tmp_path / "missing.csv", "--out", tmp_path)[0] == 2
    assert run(capsys, "mc", "--design", "d1", "--reps", "1", "--out", tmp_path)[0] == 2


def test_estimate_contract_and_determinism(panel, tmp_path, capsys):
    code, out, _ = run(capsys, "estimate", "--data", panel, "--out", tmp_path / "a")
    assert code == 0
    doc = json.loads(open(out).read())
    theta = np.array(list(doc["theta"].values()))
    assert abs(np.linalg.norm(theta) - 1) < 1e-10
    assert doc["theta"]["z"] >= 0.01
    assert doc["schema_version"] == 1
    assert doc["diagnostics"]["n_untrimmed_switchers"] > 0
    assert (tmp_path / "a" / doc["trace"]).exists()
    code, out2, _ = run(capsys, "estimate", "--data", panel, "--out", tmp_path / "b")
    assert open(out2, "rb").read() == open(out, "rb").read()


def test_estimate_fully_trimmed(panel, tmp_path, capsys):
    code, out, err = run(capsys, "estimate", "--data", panel, "--sigma", "50", "--out", tmp_path)
    assert code == 3
    assert out == ""
    assert "no switcher" in err


def test_config_sidecar_round_trip(panel, tmp_path, capsys):
    code, out, _ = run(capsys, "estimate", "--data", panel, "--c", "1.1", "--seed", "3", "--out", tmp_path / "a")
    sidecar = tmp_path / "a" / (os.path.basename(out)[: -len(".json")] + ".config.json")
    conf = json.loads(sidecar.read_text())
    assert conf["args"]["c"] == 1.1 and conf["args"]["seed"] == 3
    code, out2, _ = run(capsys, "estimate", "--data", panel, "--config", sidecar, "--out", tmp_path / "b")
    assert code == 0
    assert open(out2, "rb").read() == open(out, "rb").read()
    conf2 = json.loads((tmp_path / "b" / sidecar.name).read_text())
    assert {k: v for k, v in conf2["args"].items() if k != "out"} == {
        k: v for k, v in conf["args"].items() if k != "out"}


def test_bootstrap_smoke(panel, tmp_path, capsys):
    code, out, _ = run(capsys, "bootstrap", "--data", panel, "--B", "50", "--threads", "1", "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["coefficient"] for r in rows] == ["y_lag", "x1", "x2", "z"]
    for r in rows:
        assert float(r["lower_95"]) <= float(r["lower_90"]) <= float(r["upper_90"]) <= float(r["upper_95"])
        assert 0.1 <= float(r["lambda_hat"]) <= 0.5


def test_bootstrap_single_level(panel, tmp_path, capsys):
    code, out, _ = run(capsys, "bootstrap", "--data", panel, "--B", "50", "--levels", "0.90",
                       "--lambda", "0.3", "--threads", "1", "--out", tmp_path)
    assert code == 0
    header = open(out).readline().strip().split(",")
    assert [h for h in header if h.startswith(("lower", "upper"))] == ["lower_90", "upper_90"]


def test_bootstrap_rate_exponent_fractions(panel, tmp_path, capsys):
    code, _, _ = run(capsys, "bootstrap", "--data", panel, "--B", "50", "--rate-exps", "7/8,6/7", "--out", tmp_path)
    assert code == 2


def test_bootstrap_failure_rate_exit(panel, tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise FailureRateError("12 of 50 bootstrap replicates failed")

    monkeypatch.setattr(cli, "bootstrap_ci", boom)
    code, out, err = run(capsys, "bootstrap", "--data", panel, "--B", "50", "--out", tmp_path)
    assert code == 4 and out == "" and "failed" in err


def test_mc_smoke(tmp_path, capsys):
    t0 = time.perf_counter()
    code, out, _ = run(capsys, "mc", "--design", "d2", "--n", "2000", "--reps", "2", "--threads", "1",
                       "--out", tmp_path)
    assert time.perf_counter() - t0 < 60
    assert code == 0
    header = open(out).readline().strip().split(",")
    assert [h[5:] for h in header if h.startswith("RMSE_")] == ["beta1", "beta2", "gamma", "delta", "varpi"]
    stem = out[: -len(".csv")]
    assert os.path.exists(stem + ".config.json")
    est = list(csv.DictReader(open(stem + ".estimates.csv")))
    assert len(est) == 2


def test_mc_output_independent_of_threads(tmp_path, capsys):
    _, a, _ = run(capsys, "mc", "--design", "d1", "--n", "800", "--reps", "3", "--threads", "1", "--out", tmp_path / "a")
    _, b, _ = run(capsys, "mc", "--design", "d1", "--n", "800", "--reps", "3", "--threads", "2", "--out", tmp_path / "b")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_mc_cell_failure_exit(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise NoSwitchersError("empty cell")

    monkeypatch.setattr(cli, "run_mc", boom)
    assert run(capsys, "mc", "--design", "d1", "--reps", "2", "--out", tmp_path)[0] == 5


def test_console_entry_point_streams(panel, tmp_path):
    env = dict(os.environ, DYNPANEL_LOG="INFO")
    proc = subprocess.run(
        [sys.executable, "-m", "dynpanel.cli", "mc", "--design", "d1", "--n", "600", "--reps", "2",
         "--threads", "1", "--out", str(tmp_path)],
        capture_output=True, text=True, env=env, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith(".csv")
    assert len(proc.stdout.strip().splitlines()) == 1
    assert "INFO" in proc.stderr
