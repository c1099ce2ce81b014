import csv
import json
import subprocess
import sys
from importlib import resources

import pytest

from ratelab import __version__
from ratelab.cli import EXIT_CLASSIFICATION, EXIT_CONFIG, EXIT_OK, main

CONFIGS = resources.files("ratelab") / "configs"


def test_run_ok(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "saddle_node.json"), "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["outcome"] == "tracks"
    assert (tmp_path / "manifest.json").exists()


def test_run_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"system": "saddle_node", "params": {"mu": "x"}}')
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "params.mu" in capsys.readouterr().err
    bad.write_text("[")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_run_unknown_system(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"system": "nope"}')
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown system" in capsys.readouterr().err


def test_critrate_ok(tmp_path, capsys):
    code = main(["critrate", "--system", "saddle_node", "--bracket", "0.1", "0.4",
                 "--out", str(tmp_path), "mu=0.25"])
    assert code == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert abs(d["rate_mid"] - 0.25) < 0.0025
    assert json.loads((tmp_path / "critrate.json").read_text()) == d


def test_critrate_bracket_invalid(capsys):
    code = main(["critrate", "--system", "saddle_node", "--bracket", "0.05", "0.1", "mu=0.25"])
    assert code == EXIT_CLASSIFICATION
    assert "both ends" in capsys.readouterr().err


def test_critrate_unknown_system():
    assert main(["critrate", "--system", "nope"]) == EXIT_CONFIG


def test_critrate_rate_free_system():
    assert main(["critrate", "--system", "ebm_N"]) == EXIT_CONFIG


def test_sweep(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"system": "saddle_node", "parameter": "mu",
                                "values": [0.09, 0.25, 1.0], "outputs": ["r_c"]}))
    assert main(["sweep", str(spec), "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["mu", "r_c"]
    assert [float(r[1]) for r in rows[1:]] == [0.09, 0.25, 1.0]


def test_sweep_bad_grid(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"system": "saddle_node", "parameter": "mu",
                                "values": [0.2, 0.1, 0.3]}))
    assert main(["sweep", str(spec), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_ensemble(tmp_path, capsys):
    code = main(["ensemble", str(CONFIGS / "ebm_table2_c.json"), "-n", "20", "--seed", "1",
                 "--workers", "2", "--out", str(tmp_path)])
    assert code == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["n"] == 20
    assert (tmp_path / "exit_times.csv").exists()


def test_ensemble_deterministic_system(tmp_path):
    code = main(["ensemble", str(CONFIGS / "saddle_node.json"), "-n", "5", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_diagram(tmp_path):
    assert main(["diagram", "--step", "0.1", "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "diagram.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["omega", "r_c", "branch_kind"]
    assert len(rows) == 26


def test_systems(capsys):
    assert main(["systems"]) == EXIT_OK
    assert "hopf_shift" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["--version"])
    assert ei.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ratelab.cli", "critrate", "--system",
                           "saddle_node", "--bracket", "0.05", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CLASSIFICATION
