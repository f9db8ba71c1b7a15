import json
import subprocess
import sys

import pytest

from opcorona.cli import EXIT_FAIL, EXIT_INVALID, EXIT_PASS, main


def test_check_pass(capsys):
    assert main(["check", "constant-column"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "check" in out and "pass" in out


def test_all_zhalf_writes_outputs(tmp_path):
    assert main(["all", "z-half-column", "--out", str(tmp_path)]) == EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["tasks"]) == {"check", "project", "invert", "geninvert"}
    assert (tmp_path / "dpi_norm.csv").is_file()


def test_diag_fails():
    assert main(["check", "diag-1-z"]) == EXIT_FAIL


def test_flags(tmp_path):
    code = main(["project", "z-half-column", "--grid", "32", "128", "--modes", "8",
                 "--symbol-modes", "8", "--dilate", "0.9", "--witness", "trace",
                 "--seed", "3", "--out", str(tmp_path)])
    assert code == EXIT_PASS
    cfg = json.loads((tmp_path / "report.json").read_text())["config"]
    assert cfg["grid"] == {"radial_nodes": 32, "angular_count": 128}
    assert cfg["modes"] == 8 and cfg["symbol_modes"] == 8
    assert cfg["dilation"] == 0.9 and cfg["witness"]["kind"] == "trace" and cfg["seed"] == 3


def test_invalid_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert main(["check", str(bad)]) == EXIT_INVALID
    assert main(["check", "missing-scenario"]) == EXIT_INVALID
    assert main(["check", "z-half-column", "--dilate", "2"]) == EXIT_INVALID
    assert "invalid input" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "z-half-column"])
    assert exc.value.code == EXIT_INVALID


def test_degenerate_field_is_invalid(tmp_path):
    s = tmp_path / "zero.json"
    s.write_text(json.dumps({"name": "zero", "coefficients": [[[[0, 0]], [[0, 0]]]], "tasks": ["check"]}))
    assert main(["check", str(s)]) == EXIT_INVALID


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "opcorona", "check", "constant-column"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_PASS
    assert "pass" in proc.stdout
