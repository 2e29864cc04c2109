import json

import numpy as np
import pytest

from twohop.engine import ConfigError
from twohop.geometric import graph_from_positions
from twohop.graph import (
    check_scheme2_condition,
    complete_graph,
    complete_minus_in_edges,
    cycle_graph,
    is_connected,
    write_edge_list,
)
from twohop.harness import (
    CSV_COLUMNS,
    SCENARIO_NAMES,
    SweepConfig,
    SweepResult,
    SweepRow,
    aggregate,
    check_graph,
    draw_inputs,
    load_run_config,
    load_sweep_config,
    repro_scenario,
    rows_from_csv,
    run_config_from_dict,
    sweep,
    sweep_config_from_dict,
)

SMALL = SweepConfig(node_count=25, radius_grid=(15, 30, 60), f_grid=(0, 2, 4), runs_per_cell=4,
                    attack_scenario="relay-tamper", base_seed=3, max_rounds=300)


@pytest.fixture(scope="module")
def small_result():
    return sweep(SMALL)


def test_sweep_shape(small_result):
    assert len(small_result.rows) == 4 * 3 * 3 * 4
    assert set(small_result.table) == {(s, f, float(r)) for s in ("scheme1", "scheme2", "wmsr", "plain")
                                       for f in (0, 2, 4) for r in (15, 30, 60)}
    assert all(c.runs == 4 for c in small_result.table.values())


def test_csv_round_trip(small_result, tmp_path):
    path = tmp_path / "out.csv"
    small_result.write_csv(path)
    again = SweepResult.from_csv(path)
    assert again.rows == small_result.rows and again.table == small_result.table
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_csv_header_is_checked():
    with pytest.raises(ValueError):
        rows_from_csv("scheme,f\nplain,0\n")


def test_plain_success_at_f0_is_the_connectivity_rate(small_result):
    for r in SMALL.radius_grid:
        connected = 0
        for m in range(SMALL.runs_per_cell):
            _, pos, _, _ = draw_inputs(SMALL, m)
            connected += is_connected(graph_from_positions(pos, r))
        assert small_result.success_rate("plain", 0, float(r)) == connected / SMALL.runs_per_cell


def test_plain_rows_repeat_across_f(small_result):
    for r in SMALL.radius_grid:
        rates = {small_result.success_rate("plain", f, float(r)) for f in SMALL.f_grid}
        assert len(rates) == 1


def test_draws_are_paired_and_nested():
    seed, pos, x0, order = draw_inputs(SMALL, 2)
    seed2, pos2, x02, order2 = draw_inputs(SMALL, 2)
    assert seed == 5 and np.array_equal(pos, pos2) and np.array_equal(x0, x02)
    assert order == order2 and len(order) == max(SMALL.f_grid)
    assert all(0 <= v <= 100 for v in x0)


def test_workers_do_not_change_the_result(small_result):
    parallel = sweep(SweepConfig(**{**SMALL.__dict__, "workers": 2}))
    assert parallel.csv_text() == small_result.csv_text()


def test_aggregate_counts_rounds_of_converged_runs_only():
    rows = [SweepRow("wmsr", 1, 20.0, 0, True, 10, 0.0, True, None),
            SweepRow("wmsr", 1, 20.0, 1, False, None, 3.0, True, None),
            SweepRow("wmsr", 1, 20.0, 2, True, 20, 0.0, True, None)]
    cell = aggregate(rows)[("wmsr", 1, 20.0)]
    assert (cell.runs, cell.successes, cell.mean_rounds, cell.condition_rate) == (3, 2, 15.0, None)
    assert cell.success_rate == pytest.approx(2 / 3)


@pytest.mark.parametrize("changes", [
    {"runs_per_cell": 0},
    {"radius_grid": ()},
    {"radius_grid": (20, 15)},
    {"f_grid": (-1,)},
    {"f_grid": (200,)},
    {"schemes": ("gossip",)},
    {"attack_scenario": "tamper"},
    {"initial_value_range": (5, 1)},
    {"workers": 0},
])
def test_sweep_config_validation(changes):
    with pytest.raises(ConfigError):
        SweepConfig(**changes)


# -- config files -------------------------------------------------------------------

def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_load_sweep_config(tmp_path):
    cfg = load_sweep_config(write(tmp_path, "s.json", {"spec_version": 1, "node_count": 30,
                                                       "f_grid": [0, 3]}))
    assert cfg.node_count == 30 and cfg.f_grid == (0, 3)
    with pytest.raises(ConfigError):
        sweep_config_from_dict({"nodes": 3})


@pytest.mark.parametrize("data", [
    {"node_count": 30},
    {"spec_version": 2},
    [1, 2],
])
def test_config_version_and_shape(tmp_path, data):
    with pytest.raises(ConfigError):
        load_sweep_config(write(tmp_path, "s.json", data))


def test_bad_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_sweep_config(path)


def test_run_config_graph_sources(tmp_path):
    write_edge_list(cycle_graph(5), tmp_path / "c5.txt")
    cfg = load_run_config(write(tmp_path, "r.json", {
        "spec_version": 1, "graph": {"edge_list": "c5.txt"}, "scheme": "scheme1", "f": 1,
        "attacks": [{"node": 2, "kind": "static-value", "params": {"constant": 120}}]}))
    assert cfg.graph == cycle_graph(5) and len(cfg.initial_values) == 5
    assert cfg.attacks[0][1].constant == 120

    cfg = run_config_from_dict({"graph": {"complete": 4}, "scheme": "plain", "f": 0,
                                "initial_values": [1, 2, 3, 4]})
    assert cfg.graph == complete_graph(4)
    cfg = run_config_from_dict({"graph": {"n": 3, "edges": [[1, 2]], "undirected": False},
                                "scheme": "plain", "f": 0})
    assert cfg.graph.edges == {(1, 2)}
    cfg = run_config_from_dict({"graph": {"geometric": {"node_count": 20, "radius": 40,
                                                        "relay_count": 4, "seed": 1}},
                                "scheme": "scheme2", "f": 1,
                                "attacks": [{"node": 3, "kind": "relay-tamper"}]})
    assert cfg.graph.n == 20 and cfg.attacks[0][1].target in cfg.graph.in_neighbors(3)


def test_default_initial_values_follow_the_seed():
    a = run_config_from_dict({"graph": {"complete": 4}, "scheme": "plain", "f": 0, "seed": 7})
    b = run_config_from_dict({"graph": {"complete": 4}, "scheme": "plain", "f": 0, "seed": 7})
    assert a.initial_values == b.initial_values
    assert a.initial_values == tuple(np.random.default_rng([7, 1]).uniform(0, 100, 4).tolist())


@pytest.mark.parametrize("data", [
    {"scheme": "plain", "f": 0},
    {"graph": {"ring": 4}, "scheme": "plain", "f": 0},
    {"graph": {"complete": 4}, "scheme": "plain", "f": 0, "colour": 1},
    {"graph": {"complete": 4}, "scheme": "plain", "f": 0, "attacks": [{"kind": "crash"}]},
    {"graph": {"complete": 4}, "scheme": "plain", "f": 1,
     "attacks": [{"node": 1, "kind": "warp"}]},
    {"graph": {"complete": 4}, "scheme": "plain", "f": 1,
     "attacks": [{"node": 1, "kind": "static-value"}]},
    {"graph": {"n": 3, "edges": [[1, 5]]}, "scheme": "plain", "f": 0},
    {"graph": {"complete": 4}, "scheme": "scheme3", "f": 0},
    {"graph": {"complete": 4}, "scheme": "plain", "f": 0, "initial_values": [1]},
])
def test_run_config_errors(data):
    with pytest.raises(ConfigError):
        run_config_from_dict(data)


# -- canned scenarios and graph reports --------------------------------------------

@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_repro_scenarios_pass(name):
    res = repro_scenario(name)
    assert res.ok, res.summary
    assert res.summary.startswith(f"scenario {name}:")


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        repro_scenario("fig-99")


def test_check_graph_complete():
    rep = check_graph(complete_graph(9), 3, "scheme1")
    assert rep.kappa == 8 and rep.scheme1_condition and rep.verdicts["scheme1"]
    assert rep.full_access == tuple(range(1, 10))
    assert "kappa=8" in rep.render() and "verdict scheme1: true <" in rep.render()


def test_check_graph_k9_minus_in_edges_of_node_one():
    g = complete_minus_in_edges(9, 1, (2, 3, 4, 5, 6))
    _, bad = check_scheme2_condition(g, 1)
    assert not [t for t in bad if t[0] == 1]
    assert all(len(g.out_neighbors(h) & g.in_neighbors(1)) >= 3 for h in (2, 3, 4, 5, 6))
    rep = check_graph(g, 1, "scheme2")
    assert rep.kappa is None and rep.full_access == tuple(range(2, 10))


def test_check_graph_directed_cycle():
    rep = check_graph(cycle_graph(3, directed=True), 1, "scheme2")
    assert rep.verdicts == {"scheme1": None, "scheme2": False, "wmsr": False, "plain": False}
    assert rep.scheme2_condition is False and rep.rooted_trees is True


def test_check_graph_above_the_cap():
    rep = check_graph(complete_graph(20), 2, "wmsr", cap=16)
    assert rep.robust is None and rep.rooted_trees is None and rep.kappa == 19
    assert "n/a" in rep.render()
