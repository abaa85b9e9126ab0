import json

import pytest

from skewdiv.cli import main, run_verify
from skewdiv.errors import ScenarioError
from skewdiv.report import report_to_json
from skewdiv.scenarios import (
    BUILTIN_NAMES,
    builtin_scenario,
    parse_grid_spec,
    parse_scenario_file,
)

SCENARIO_FILE = """\
# demo warped scenario
name = warped-demo
dim = 3
param k = 5
param c = 2
lambda = f
f = sin(x1)
grid = r:0:1:2, x1:0.2:0.8:2, x2:0.5:0.5:1
metric:
1 | 0 | 0
0 | ((r+c)^(-1/k))^2 | 0
0 | 0 | ((r+c)^(-1/k))^2
"""


def test_builtin_registry():
    for name in BUILTIN_NAMES:
        sc = builtin_scenario(name, seed=3)
        assert sc.dim in (3, 4)
        assert len(sc.grid_points()) >= 1
    with pytest.raises(ScenarioError):
        builtin_scenario("nope")


def test_scenario_file_roundtrip(tmp_path):
    sc = parse_scenario_file(SCENARIO_FILE)
    assert sc.name == "warped-demo"
    assert sc.params == {"k": 5.0, "c": 2.0}
    assert len(sc.grid_points()) == 4
    assert sc.lam_src == "f"


def test_scenario_file_errors():
    with pytest.raises(ScenarioError):
        parse_scenario_file("name = x\nf = x1\n")  # no dim
    with pytest.raises(ScenarioError):
        parse_scenario_file("dim = 3\nf = x1\n")  # no metric
    bad_row = "dim = 3\nf = x1\nmetric:\n1 | 0\n1 | 0 | 0\n0 | 0 | 1\n"
    with pytest.raises(ScenarioError):
        parse_scenario_file(bad_row)
    with pytest.raises(ScenarioError):
        parse_scenario_file("dim = 3\nf = x1 +\nmetric:\n1|0|0\n0|1|0\n0|0|1\n")


def test_grid_spec_parsing():
    grid = parse_grid_spec("r:0:1:3, x2:0.25:0.75:2", 3)
    assert [a.name for a in grid] == ["r", "x1", "x2"]
    assert grid[0].count == 3
    assert grid[1].count == 1 and grid[1].lo == 0.5
    assert list(grid[2].values()) == [0.25, 0.75]
    with pytest.raises(ScenarioError):
        parse_grid_spec("bogus:0:1:2", 3)
    with pytest.raises(ScenarioError):
        parse_grid_spec("r:0:1", 3)


def test_run_verify_report_consistency():
    sc = builtin_scenario("warped-canonical")
    report = run_verify(sc)
    assert report.all_passed
    # every verdict must be recomputable from the rows it summarizes
    rows = report.violations
    assert max(r["cyclic_residual"] for r in rows) == next(
        v.value for v in report.verdicts if v.name == "cyclic_residual"
    )
    assert min(r["sharp_margin"] for r in rows) == next(
        v.value for v in report.verdicts if v.name == "sharp_margin"
    )
    assert max(r["violation"] for r in rows) == next(
        v.value for v in report.verdicts if v.name == "violation_negative"
    )


def test_cli_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--scenario", "euclidean"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out

    path = tmp_path / "scenario.txt"
    path.write_text(SCENARIO_FILE)
    assert main(["verify", "--scenario-file", str(path)]) == 0

    path.write_text("dim = 3\n")
    assert main(["verify", "--scenario-file", str(path)]) == 2


def test_cli_param_overrides(tmp_path):
    # builtin: k flows into the canonical family and flips the expectation
    assert main(["verify", "--scenario", "warped-canonical", "--param", "k=6"]) == 0
    assert main(["verify", "--scenario", "warped-canonical", "--param", "k=2"]) == 0

    # file scenario: parameters are rebound without re-parsing expressions
    path = tmp_path / "s.txt"
    path.write_text(SCENARIO_FILE)
    assert main(["verify", "--scenario-file", str(path), "--param", "c=3"]) == 0


def test_cli_verify_json_schema(tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", "--scenario", "round-sphere-static", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"version", "scenario", "residuals", "violations", "verdicts"}
    for r in doc["residuals"]:
        assert set(r) == {"name", "max_abs", "max_rel", "worst_point"}
    for v in doc["verdicts"]:
        assert set(v) == {"name", "pass"}
    names = {v["name"] for v in doc["verdicts"]}
    assert {"static_tensor", "static_scalar", "p_vanishes"} <= names


def test_cli_counterexample_csv(tmp_path):
    out = tmp_path / "rows.csv"
    code = main(
        [
            "counterexample",
            "--param",
            "k=4",
            "--param",
            "c=1",
            "--grid",
            "r:0:1:5",
            "--out",
            str(out),
            "--format",
            "csv",
        ]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r,x1,k,c,norm_nabla_P_sq,norm_div_P_sq,violation,sharp_margin"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert first[0] == "0"
    assert first[6] == "-0.015625"
    assert all(float(row.split(",")[6]) < 0 for row in lines[1:])


def test_cli_counterexample_no_violation_exit():
    assert main(["counterexample", "--param", "k=2", "--grid", "r:0:1:3"]) == 1
    assert main(["counterexample", "--param", "k=3", "--grid", "r:0:1:3"]) == 1


def test_cli_determinism(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    for path in (a, b):
        main(
            [
                "counterexample",
                "--param",
                "k=4.5",
                "--grid",
                "r:0:1:4",
                "--out",
                str(path),
                "--format",
                "csv",
            ]
        )
    assert a.read_bytes() == b.read_bytes()

    ja = tmp_path / "a.json"
    jb = tmp_path / "b.json"
    for path in (ja, jb):
        main(["verify", "--scenario", "warped-canonical", "--out", str(path)])
    assert ja.read_bytes() == jb.read_bytes()


def test_cli_verify_csv_format(tmp_path):
    out = tmp_path / "rows.csv"
    assert main(["verify", "--scenario", "round-sphere-static", "--out", str(out), "--format", "csv"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("x0,x1,x2,p_norm_sq,")
    assert lines[0].endswith("static_tensor_residual,static_scalar_residual")
    assert len(lines) == 28
    assert out.read_text().endswith("\n")


def test_cli_search(tmp_path):
    out = tmp_path / "search.json"
    code = main(
        ["search", "--seed", "42", "--iterations", "500", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["verdicts"][0]["pass"] is True
    assert doc["violations"][0]["violation"] < -1e-3


def test_cli_frame(capsys):
    code = main(["frame", "--scenario", "warped-canonical", "--point", "0,0,0"])
    assert code == 0
    out = capsys.readouterr().out
    assert "0.0625" in out
    assert "u = P(E_1, E_2)" in out

    code = main(["frame", "--scenario", "euclidean", "--point", "0.5,0.5,0.5"])
    assert code == 1
    assert "degenerate P" in capsys.readouterr().err


def test_cli_usage_errors(capsys):
    assert main(["verify", "--scenario", "not-a-scenario"]) == 2
    assert main([]) == 2
    assert main(["verify", "--param", "k"]) == 2
    assert main(["search", "--bounds", "k:1"]) == 2
    capsys.readouterr()


def test_cli_grid_outside_domain(capsys):
    # r = 0 degenerates the sphere chart; the PD check turns this into exit 2
    code = main(["verify", "--scenario", "round-sphere-static", "--grid", "r:0:0:1"])
    assert code == 2
    assert "positive definite" in capsys.readouterr().err


def test_cli_random_scenario_with_seed():
    assert main(["verify", "--scenario", "random-curved", "--seed", "12"]) == 0
    assert main(["verify", "--scenario", "random-curved", "--seed", "12", "--dim", "4"]) == 0


def test_report_json_is_fixed_order():
    sc = builtin_scenario("euclidean")
    report = run_verify(sc)
    text = report_to_json(report)
    assert text.index('"version"') < text.index('"scenario"') < text.index('"residuals"')
