import csv
import json

import pytest

from wconvex.cli import (
    FUNCTION_NODES, ConfigError, build_scenario, bundled_scenarios, list_catalog, load_config,
    main, read_report, reproducible_part, run_scenario,
)
from wconvex.core import DELTA_STRICT


def minimal(**over):
    cfg = {
        "schema_version": 1,
        "name": "mini",
        "seed": 3,
        "budgets": {"n": 500},
        "spaces": {"E": {"kind": "euclidean", "n": 2, "p": 2}},
        "points": {"o": {"space": "E", "value": [0, 0]}},
        "sets": {"B": {"space": "E", "kind": "ball", "center": "o", "radius": 1.0}},
        "functions": {"f": {"space": "E", "expr": {"op": "dist", "to": "o", "g": "square"}}},
        "maps": {"T": {"space": "E", "kind": "scale", "center": [1, 1], "factor": 0.5}},
        "tasks": [
            {"type": "verify", "check": "wconvex", "space": "E", "function": "f"},
            {"type": "project", "space": "E", "set": "B", "x": [3, 4], "expect_distance": 4.0},
            {"type": "fixpoint", "space": "E", "map": "T", "x0": [5, 5], "trace": "trace.csv"},
        ],
    }
    cfg.update(over)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return str(path)


# ------------------------------------------------------------- catalogue


def test_list_catalog(capsys):
    text = list_catalog()
    for kind in ("euclidean", "ball", "interval", "product"):
        assert f"\n  {kind} " in text
    assert len(FUNCTION_NODES) >= 8
    assert "reference_suite" in text and "l1_strictness" in text
    assert main(["list"]) == 0
    assert "bundled scenarios" in capsys.readouterr().out


def test_bundled_scenarios_present():
    assert {"reference_suite", "l1_strictness"} <= set(bundled_scenarios())
    assert load_config("reference_suite")["schema_version"] == 1


# ------------------------------------------------------------- running


def test_run_minimal_scenario(tmp_path):
    out = tmp_path / "out" / "report.json"
    rep = run_scenario(write(tmp_path, minimal()), out)
    assert [t["status"] for t in rep["tasks"]] == ["passed"] * 3
    assert rep["summary"] == {"passed": 3, "failed": 0, "inconclusive": 0}
    assert rep["seed"] == 3 and rep["artifact"]["version"]
    assert rep["config"]["name"] == "mini"
    rows = list(csv.reader(open(out.parent / "trace.csv")))
    assert rows[0] == ["iteration", "residual"] and len(rows) > 2


def test_report_round_trip_and_determinism(tmp_path):
    path = write(tmp_path, minimal())
    a = run_scenario(path, tmp_path / "a.json")
    b = run_scenario(path, tmp_path / "b.json", workers=4)
    back = read_report(tmp_path / "a.json")
    assert [t["status"] for t in back["tasks"]] == [t["status"] for t in a["tasks"]]
    assert back["tasks"] == json.loads(json.dumps(a["tasks"]))
    assert reproducible_part(read_report(tmp_path / "a.json")) == reproducible_part(
        read_report(tmp_path / "b.json"))
    assert "timing" in a and "timing" not in reproducible_part(a)


def test_reference_suite_all_pass(tmp_path):
    rep = run_scenario("reference_suite", tmp_path / "suite.json")
    failed = [t for t in rep["tasks"] if t["status"] != "passed"]
    assert not failed, failed[:3]
    spaces = {t["space"] for t in rep["tasks"]}
    assert {"l2", "l1", "linf", "ball", "interval", "product"} <= spaces
    assert {t["type"] for t in rep["tasks"]} == {"verify", "project", "chebyshev", "fixpoint"}


def test_l1_strictness_scenario_fails_with_witness(tmp_path, capsys):
    code = main(["run", "l1_strictness", "--out", str(tmp_path / "l1.json")])
    assert code == 1
    rep = read_report(tmp_path / "l1.json")
    task = rep["tasks"][1]
    assert task["status"] == "failed"
    w = task["result"]["witness"]
    assert w["d_z_x0"] > w["rho"] * (1 - DELTA_STRICT)
    assert task["result"]["details"]["planted_violations"] == [pytest.approx(DELTA_STRICT)]


def test_expect_fail_turns_a_planted_violation_into_a_pass(tmp_path):
    cfg = minimal(functions={"g": {"space": "E", "expr": {"op": "neg", "of": {"op": "dist", "to": "o"}}}},
                  tasks=[{"type": "verify", "check": "wconvex", "space": "E", "function": "g",
                          "expect": "fail"}])
    rep = run_scenario(cfg, False)
    assert rep["tasks"][0]["status"] == "passed"
    assert rep["tasks"][0]["result"]["status"] == "failed"
    assert rep["tasks"][0]["result"]["witness"] is not None


def test_inconclusive_is_exit_zero_with_warning(tmp_path, capsys):
    cfg = minimal(spaces={"I": {"kind": "interval"}}, points={}, sets={}, functions={}, maps={},
                  tasks=[{"type": "verify", "check": "extension", "space": "I"}])
    assert main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "r.json")]) == 0
    assert "1 inconclusive" in capsys.readouterr().err


# ------------------------------------------------------------- validation


@pytest.mark.parametrize("over, needle", [
    ({"tasks": []}, "tasks: the task list must be a nonempty list"),
    ({"schema_version": 2}, "schema_version"),
    ({"spaces": {"E": {"kind": "hyperbolic"}}}, "valid kinds: ball, euclidean, interval, product"),
    ({"budgets": {"n": 0}}, "budgets.n"),
    ({"extra": 1}, "unknown top-level field"),
    ({"tasks": [{"type": "optimise", "space": "E"}]}, "valid types"),
    ({"tasks": [{"type": "verify", "check": "wconvex", "space": "E", "function": "nope"}]},
     "tasks[0].function: unknown function 'nope'"),
    ({"tasks": [{"type": "verify", "check": "convexish", "space": "E"}]}, "valid checks"),
    ({"tasks": [{"type": "verify", "check": "wconvex", "space": "E"}]}, "missing field 'function'"),
    ({"functions": {"f": {"space": "E", "expr": {"op": "log"}}}}, "functions.f.expr.op"),
    ({"functions": {"f": {"space": "E", "expr": {"op": "lebesgue"}}}}, "needs a interval space"),
    ({"sets": {"B": {"space": "E", "kind": "ball", "center": [0, 0, 0], "radius": 1}}}, "sets.B.center"),
    ({"maps": {"T": {"space": "E", "kind": "shear"}}}, "valid kinds: affine, rotation, scale"),
    ({"tasks": [{"type": "project", "space": "E", "set": "B", "x": [1, 2], "starts": -1}]},
     "tasks[0].starts"),
])
def test_validation_errors_name_the_field(over, needle):
    with pytest.raises(ConfigError) as e:
        build_scenario(minimal(**over))
    assert needle in str(e.value)


def test_forward_references_resolve():
    cfg = minimal(sets={"S": {"space": "E", "kind": "sublevel", "function": "g", "h": 1.0}},
                  functions={"g": {"space": "E", "expr": {"op": "ref", "name": "f0"}},
                             "f0": {"space": "E", "expr": {"op": "dist", "to": "o"}}},
                  tasks=[{"type": "verify", "check": "set_convexity", "space": "E", "set": "S"}])
    assert "S" in build_scenario(cfg).sets


def test_parse_error_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{"schema_version": 1,\n "spaces": {}\n "tasks": []}')
    assert main(["run", path]) == 2
    assert ":3:2:" in capsys.readouterr().err


def test_missing_config_is_exit_two(capsys):
    assert main(["run", "no/such/file.json"]) == 2


# ------------------------------------------------------------- subcommands


def test_verify_subcommand(capsys):
    assert main(["verify", "--fn", "dist_sq_l2", "--n", "1000", "--seed", "2"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["status"] == "passed" and rec["result"]["seed"] == 2
    assert main(["verify", "--fn", "neg_dist_l2", "--n", "500"]) == 1
    rec = json.loads(capsys.readouterr().out)
    assert rec["result"]["witness"]["t"] is not None
    expr = '{"op": "neg", "of": {"op": "dist", "to": [0, 0], "g": "square"}}'
    assert main(["verify", "--space", "l1", "--fn", expr, "--n", "500"]) == 1
    assert main(["verify", "--space", "l2", "--fn", "{bad"]) == 2
    assert main(["verify", "--fn", "dist_l2", "--check", "nope"]) == 2


def test_project_subcommand(capsys):
    args = ["project", "--space", "l2", "--set", '{"kind": "ball", "center": [0, 0], "radius": 1}',
            "--x", "[3, 4]", "--expect-distance", "4"]
    assert main(args) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["result"]["best"] == [pytest.approx(0.6, abs=1e-6), pytest.approx(0.8, abs=1e-6)]


def test_fixpoint_subcommand(tmp_path, capsys):
    trace = tmp_path / "rot.csv"
    assert main(["fixpoint", "--map", "rotation", "--trace", str(trace)]) == 0
    assert trace.exists()
    assert main(["fixpoint", "--map", "doubling"]) == 1
    capsys.readouterr()
    spec = '{"kind": "affine", "A": [[0.5]], "b": [1.0]}'
    assert main(["fixpoint", "--map", spec, "--space", '{"kind": "euclidean", "n": 1}',
                 "--x0", "[0.0]"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["result"]["point"][0] == pytest.approx(2.0, abs=1e-5)
    assert main(["fixpoint", "--map", "contraction", "--method", "residual"]) == 0
