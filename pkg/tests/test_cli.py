import csv
import io
import json
import math
import subprocess
import sys

import pytest

from lpplab.cli import main

RAINS = ["run", "rains", "--override", "m=8", "n=8", "w=0.55", "z=0.45", "replicas=20000",
         "bootstrap_B=200"]


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "rains" in out and "sums-tails" in out
    assert len(out.strip().splitlines()) == 13


def test_unknown_experiment(capsys, tmp_path):
    assert main(["run", "bogus", "--out", str(tmp_path)]) == 2
    assert "unknown experiment" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["run", "rains", "--workers", "0"]) == 2
    assert main(["run", "rains", "--seed", "-4"]) == 2
    assert main(["frobnicate"]) == 2


def test_config_error_exit_2(capsys, tmp_path):
    assert main(["run", "rains", "--out", str(tmp_path), "--override", "colour=red"]) == 2
    assert "colour" in capsys.readouterr().err
    assert main(["run", "rains", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_run_rains_writes_result(capsys, tmp_path):
    assert main(RAINS + ["--out", str(tmp_path), "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "CRITERION 2 PASS margin=" in out
    data = json.loads((tmp_path / "rains.json").read_text())
    assert data["stats"]["closed_form"] == pytest.approx((11 / 9) ** 16)
    assert data["config"]["master_seed"] == 5
    assert abs(data["stats"]["mc_estimate"] - data["stats"]["closed_form"]) <= 3 * data["stats"]["bootstrap_se"]


def test_out_from_environment(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("LPPLAB_OUT", str(tmp_path / "env"))
    assert main(RAINS) == 0
    assert (tmp_path / "env" / "rains.json").exists()


def test_rerun_errors_then_verifies(tmp_path, capsys):
    args = RAINS + ["--out", str(tmp_path)]
    assert main(args) == 0
    assert main(args) == 2
    assert main(args + ["--verify-existing", "--workers", "2"]) == 0
    assert main(args + ["--verify-existing", "--seed", "77"]) == 1
    assert "reproduction" in capsys.readouterr().err


def test_failing_verdict_exit_1(tmp_path, capsys):
    # a KS threshold of zero cannot be met
    args = ["run", "gauss", "--out", str(tmp_path), "--override", "ladder=[8,16,32]",
            "replicas=[200]", "ks_max_D=0.0"]
    assert main(args) == 1
    assert "CRITERION 8 FAIL" in capsys.readouterr().out
    assert (tmp_path / "gauss.json").exists()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "rains.yaml"
    cfg.write_text(f"replicas: [5000]\noutput: {tmp_path / 'from-file'}\nparams:\n  bootstrap_B: 100\n")
    assert main(["run", "rains", "--config", str(cfg)]) == 0
    data = json.loads((tmp_path / "from-file" / "rains.json").read_text())
    assert data["config"]["replicas"] == [5000]


def test_export(tmp_path, capsys):
    assert main(RAINS + ["--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["export", str(tmp_path / "rains.json")]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["experiment", "N", "param", "statistic", "value", "lo", "hi"]
    assert any(r["statistic"] == "mgf" and r["lo"] for r in rows)
    target = tmp_path / "long.csv"
    assert main(["export", str(tmp_path / "rains.csv"), "--out", str(target)]) == 0
    assert target.read_text().startswith("experiment,N,param,statistic,value,lo,hi")
    assert main(["export", str(tmp_path / "nothing.json")]) == 2
    (tmp_path / "bad.json").write_text("{")
    assert main(["export", str(tmp_path / "bad.json")]) == 2


def test_verify_subcommand(capsys):
    assert main(["verify"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("CRITERION")]
    assert lines and all(" PASS " in l for l in lines)
    ids = {l.split()[1] for l in lines}
    assert {"1", "14", "18"} <= ids


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lpplab", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "rains" in proc.stdout
