import csv
import json

import numpy as np
import pytest

from opcorona.report import (
    Scenario,
    ScenarioError,
    bundled_scenarios,
    compare_reports,
    emit_plot_data,
    load_scenario,
    run_scenario,
)


@pytest.fixture(scope="module")
def zhalf_report():
    return run_scenario(load_scenario("z-half-column"))


@pytest.fixture(scope="module")
def const_report():
    return run_scenario(load_scenario("constant-column"))


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_bundled_names():
    assert set(bundled_scenarios()) >= {"constant-column", "z-half-column", "diag-1-z", "rank-one-row"}


def test_scenario_round_trip():
    for name in bundled_scenarios():
        s = load_scenario(name)
        again = Scenario.loads(s.dumps())
        assert again == s
        assert again.dumps() == s.dumps()


def test_scenario_complex_entries():
    s = Scenario("c", [[[1 + 2j, -0.5j]]], tasks=["check"])
    text = s.dumps()
    assert json.loads(text)["coefficients"] == [[[[1.0, 2.0], [0.0, -0.5]]]]
    assert Scenario.loads(text).coefficients[0, 0, 0] == 1 + 2j


@pytest.mark.parametrize("text", [
    "{not json",
    "[]",
    json.dumps({"name": "x"}),
    json.dumps({"name": "x", "coefficients": [[[1.0]]]}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]], [[0, 0], [1, 0]]]]}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]]]], "grid": {"radial_nodes": 8.5}}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]]]], "tasks": ["fly"]}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]]]], "dilation": 1.5}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]]]], "witness": {"kind": "magic"}}),
    json.dumps({"name": "x", "coefficients": [[[[1, 0]]]], "modes": 1000}),
])
def test_scenario_rejects(text):
    with pytest.raises(ScenarioError):
        Scenario.loads(text)


def test_unknown_scenario_name():
    with pytest.raises(ScenarioError):
        load_scenario("no-such-scenario")


def test_constant_column_all_pass(const_report):
    assert const_report.passed
    t = const_report.as_dict()["tasks"]
    assert t["check"]["deltas"]["delta"] == pytest.approx(1.0)
    for key, val in t["check"]["pdp_identities"].items():
        assert abs(val) <= 1e-12, key
    assert t["project"]["form"]["max_abs_L"] <= 1e-12
    assert t["invert"]["nikolski"]["bezout_residual"] <= 1e-12


def test_zhalf_report_values(zhalf_report):
    assert zhalf_report.passed
    t = zhalf_report.as_dict()["tasks"]
    assert t["check"]["deltas"]["delta"] == pytest.approx(0.5, abs=1e-6)
    assert t["check"]["deltas"]["delta_tilde"] == pytest.approx(np.sqrt(5) / 2, abs=1e-12)
    assert t["check"]["witness"]["K"] == pytest.approx(np.log(5), abs=1e-12)
    assert t["project"]["projection"]["certified"]
    assert t["invert"]["nikolski"]["norm_G"] == pytest.approx(2, abs=1e-8)
    # caps are reported next to the observed values
    assert t["project"]["projection"]["cap"] == pytest.approx(45.7379, abs=1e-4)
    assert t["check"]["witness"]["embedding_constant"] == pytest.approx(21.8745, abs=1e-4)


def test_diag_fails_c1():
    rep = run_scenario(load_scenario("diag-1-z"), tasks=["check"])
    assert not rep.passed
    check = rep.as_dict()["tasks"]["check"]
    assert check["status"] == "fail"
    assert "refinement" in check["c1_refinement"]["note"]


def test_rank_one_row_scenario():
    rep = run_scenario(load_scenario("rank-one-row"))
    assert rep.passed, rep.statuses


def test_plot_data_constant(const_report, tmp_path):
    emit_plot_data(const_report, tmp_path)
    for name in ("dpi_norm.csv", "phi.csv", "defect.csv", "green_potential.csv"):
        header, data = read_csv(tmp_path / name)
        assert header == ["x", "y", "value"]
        assert data.shape == (64 * 256, 3)
        assert np.all(data[:, 2] == 0)


def test_plot_data_zhalf(zhalf_report, tmp_path):
    zhalf_report.write(tmp_path)
    header, data = read_csv(tmp_path / "dpi_norm.csv")
    assert data.shape[0] == 64 * 256
    assert data[:, 2].max() == pytest.approx(2.0, abs=1e-6)
    header, bdata = read_csv(tmp_path / "projection_boundary.csv")
    assert header == ["theta", "value"] and bdata.shape == (256, 2)
    assert np.abs(bdata[:, 1] - np.sqrt(5)).max() <= 1e-8
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "pass"
    assert (tmp_path / "timings.json").is_file()


def test_report_deterministic(zhalf_report, tmp_path):
    again = run_scenario(load_scenario("z-half-column"))
    assert again.to_json() == zhalf_report.to_json()
    zhalf_report.write(tmp_path / "a")
    again.write(tmp_path / "b")
    for f in (tmp_path / "a").iterdir():
        if f.name != "timings.json":
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_compare_identical(zhalf_report):
    diff = compare_reports(zhalf_report, zhalf_report)
    assert diff == {"changes": {}, "unstable": []}


def test_compare_mismatch(zhalf_report, const_report):
    with pytest.raises(ScenarioError):
        compare_reports(zhalf_report, const_report)


def test_compare_refinement_zhalf(zhalf_report):
    fine = run_scenario(load_scenario("z-half-column").replace(radial_nodes=96, angular_count=384))
    assert compare_reports(zhalf_report, fine)["unstable"] == []


def test_compare_refinement_diag():
    s = load_scenario("diag-1-z")
    a = run_scenario(s, tasks=["check"])
    b = run_scenario(s.replace(radial_nodes=96, angular_count=384), tasks=["check"])
    unstable = compare_reports(a, b)["unstable"]
    assert any(k.endswith("c1_delta") for k in unstable)
