import csv
import json
import subprocess
import sys

import pytest

from arnoldlab.cli import main


def lines(capsys):
    return [json.loads(s) for s in capsys.readouterr().out.splitlines() if s.strip()]


def test_cf_golden(capsys):
    assert main(["cf", "--depth", "6"]) == 0
    assert [q for _, q in lines(capsys)[0]["convergents"]] == [1, 1, 2, 3, 5, 8, 13]


def test_cf_value_and_global_flag_after_command(capsys):
    assert main(["cf", "--value", "16/113", "--alpha", "silver"]) == 0
    assert lines(capsys)[0]["quotients"] == [7, 16]


def test_ostrowski(capsys):
    assert main(["--alpha", "golden", "ostrowski", "100"]) == 0
    out = lines(capsys)[0]
    assert out["check"] and out["nonzero"] == {"3": 1, "5": 1, "10": 1}


def test_orbit_spacing(capsys):
    assert main(["orbit", "--n", "8", "--spacing"]) == 0
    out = lines(capsys)[0]
    assert out["q"] == 34 and out["min_ok"] and out["max_ok"]


def test_birkhoff_csv(tmp_path):
    path = tmp_path / "b.csv"
    assert main(["birkhoff", "--x", "1/3", "--m", "100", "--format", "csv", "--out", str(path)]) == 0
    row = next(csv.DictReader(open(path)))
    assert float(row["value"]) > 0


def test_flow_trajectory(capsys):
    assert main(["flow", "--x", "0.25", "--s", "0.1", "--t", "2", "--steps", "3"]) == 0
    rows = lines(capsys)
    assert [r["t"] for r in rows] == [2.0, 4.0, 6.0]


def test_pair(capsys):
    assert main(["pair", "--x", "0.1", "--y", "0.1000001", "--order", "8"]) == 0
    assert lines(capsys)[0]["pair_class"] in ("small", "close", "type_I", "type_II", "unclassified")


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    assert "large-shearing" in capsys.readouterr().out


def test_verify_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"suites": ["shear-constants", "diophantine"], "seed": 3}))
    out = tmp_path / "report.json"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["aggregate"]["hard_fail"] == 0


@pytest.mark.parametrize("argv", [
    ["cf", "--value", "2"],
    ["nonsense"],
    ["--alpha", "bronze", "cf"],
    ["shear", "--order", "5"],
    ["verify", "--suite", "nope"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "arnoldlab", "cf", "--depth", "3"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["quotients"] == [1, 1, 1]
