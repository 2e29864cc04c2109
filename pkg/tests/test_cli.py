import json

import pytest

from twohop import harness
from twohop.cli import main
from twohop.graph import complete_graph, cycle_graph, write_edge_list


def test_check_graph(tmp_path, capsys):
    path = tmp_path / "k9.txt"
    write_edge_list(complete_graph(9), path)
    assert main(["check-graph", str(path), "--f", "3", "--scheme", "scheme1"]) == 0
    out = capsys.readouterr().out
    assert "kappa=8" in out and "verdict scheme1: true" in out


def test_check_graph_directed(tmp_path, capsys):
    path = tmp_path / "c3.txt"
    write_edge_list(cycle_graph(3, directed=True), path)
    assert main(["check-graph", str(path), "--f", "1"]) == 0
    assert "verdict scheme2: false" in capsys.readouterr().out


def test_simulate(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "spec_version": 1, "graph": {"complete": 5}, "scheme": "scheme2", "f": 1,
        "initial_values": [8, 10, 4, 2, 1],
        "attacks": [{"node": 1, "kind": "static-value", "k_on": 2, "constant": 120}]}))
    trace = tmp_path / "trace.csv"
    assert main(["simulate", str(cfg), "--trace", str(trace)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["outcome"] == "converged" and out["safety_ok"]
    assert out["latency"] == {"1": [2, 3, 1]}
    assert trace.read_text().startswith("# twohop-trace v1 scheme=scheme2 n=5")


def test_sweep(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"spec_version": 1, "node_count": 15, "radius_grid": [40],
                               "f_grid": [0, 1], "runs_per_cell": 2, "max_rounds": 100}))
    out = tmp_path / "out.csv"
    assert main(["sweep", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 * 2
    assert len(out.read_text().splitlines()) == 1 + 4 * 2 * 2


@pytest.mark.parametrize("name", harness.SCENARIO_NAMES)
def test_repro(name, tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["repro", name, "--trace", str(trace)]) == 0
    assert capsys.readouterr().out.startswith(f"scenario {name}:")
    assert trace.exists()


def test_repro_failure_exit_code(monkeypatch, capsys):
    original = harness._SCENARIOS["complete-fmax"]

    def broken():
        rec, checks = original()
        return rec, checks + [("impossible", False)]

    monkeypatch.setitem(harness._SCENARIOS, "complete-fmax", broken)
    assert main(["repro", "complete-fmax"]) == 3
    assert "[FAIL] impossible" in capsys.readouterr().out


def test_missing_file(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"spec_version": 1, "graph": {"complete": 3}, "scheme": "warp",
                               "f": 0}))
    assert main(["simulate", str(cfg)]) == 2
    assert "error:" in capsys.readouterr().err


def test_edge_list_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("directed 3\n1 2\n1 x\n")
    assert main(["check-graph", str(path), "--f", "1"]) == 2
    assert "3" in capsys.readouterr().err


def test_scheme1_on_directed_graph_reports_not_applicable(tmp_path, capsys):
    path = tmp_path / "c3.txt"
    write_edge_list(cycle_graph(3, directed=True), path)
    assert main(["check-graph", str(path), "--f", "1", "--scheme", "scheme1"]) == 0
    assert "verdict scheme1: n/a <" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["repro", "fig-99"], ["check-graph", "g.txt"],
                                  ["sweep", "c.json"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2
