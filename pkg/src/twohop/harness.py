"""Monte Carlo sweeps over random sensor fields, config files, canned scenarios.

Every draw ``m`` of a sweep uses the seed ``base_seed + m`` for three things:

* node positions, ``default_rng(seed)`` (see `twohop.geometric`);
* initial values, ``default_rng([seed, 1]).uniform(lo, hi, n)``;
* attackers, the first f entries of ``sample_attackers(n, max f, seed)``.

Positions do not depend on r, so the curves over r for one draw come from
the same field with a growing radius, and attacker sets are nested in f.
All schemes in a cell see the same graph, attackers and initial values.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Iterable

import numpy as np

from .adversary import KINDS, AttackBehavior, resolve_targets, sample_attackers
from .engine import SCHEMES, ConfigError, RunConfig, RunRecord, evaluate, run
from .geometric import GeometricConfig, augment_with_relays, graph_from_positions, sample_positions
from .graph import (
    DirectedGraph,
    GraphError,
    InstanceTooLarge,
    capped_connectivity,
    check_scheme1_condition,
    check_scheme2_condition,
    common_neighbor_floor,
    complete_graph,
    complete_minus_in_edges,
    cycle_graph,
    full_access_nodes,
    has_k_connected_rooted_spanning_trees,
    is_connected,
    is_rs_robust,
    relay_support_floor,
    vertex_connectivity,
)
from .protocol import InformationSet

SPEC_VERSION = 1
SCENARIOS = ("static-120", "relay-tamper")
CSV_COLUMNS = ("scheme", "f", "r", "seed", "converged", "rounds", "final_spread",
               "safety_ok", "condition_ok")
DEFAULT_RADII = tuple(range(15, 131, 5))


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    node_count: int = 100
    box_side: float = 100.0
    radius_grid: tuple = DEFAULT_RADII
    f_grid: tuple = (15, 30, 45, 60)
    runs_per_cell: int = 20
    schemes: tuple = SCHEMES
    attack_scenario: str = "static-120"
    relays_enabled: bool = False
    initial_value_range: tuple = (0.0, 100.0)
    base_seed: int = 0
    max_rounds: int = 500
    convergence_epsilon: float = 1e-6
    activation_round: int = 3
    relay_count: int = 16
    relay_radius_bonus: float = 27.0
    relay_grid_spacing: float = 20.0
    workers: int = 1

    def __post_init__(self):
        for name in ("radius_grid", "f_grid", "schemes", "initial_value_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.runs_per_cell < 1:
            raise ConfigError("runs_per_cell must be at least 1")
        if not self.radius_grid:
            raise ConfigError("radius_grid is empty")
        if any(b <= a for a, b in zip(self.radius_grid, self.radius_grid[1:])):
            raise ConfigError("radius_grid must be strictly increasing")
        if not self.f_grid or min(self.f_grid) < 0 or max(self.f_grid) > self.node_count:
            raise ConfigError(f"f_grid must lie in 0..{self.node_count}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown schemes {bad}; choose from {SCHEMES}")
        if self.attack_scenario not in SCENARIOS:
            raise ConfigError(f"unknown attack_scenario {self.attack_scenario!r}; "
                              f"choose from {SCENARIOS}")
        lo, hi = self.initial_value_range
        if lo > hi:
            raise ConfigError("initial_value_range is empty")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    f: int
    r: float
    seed: int
    converged: bool
    rounds: int | None
    final_spread: float
    safety_ok: bool
    condition_ok: bool | None   # None: no condition is tracked for the scheme

    def key(self) -> tuple:
        return (self.scheme, self.f, self.r, self.seed)


@dataclass(frozen=True)
class CellStats:
    runs: int
    successes: int
    success_rate: float
    mean_rounds: float | None
    condition_rate: float | None


@dataclass
class SweepResult:
    rows: list
    table: dict = field(default_factory=dict)   # (scheme, f, r) -> CellStats

    def __post_init__(self):
        self.rows = sorted(self.rows, key=SweepRow.key)
        if not self.table:
            self.table = aggregate(self.rows)

    def success_rate(self, scheme: str, f: int, r: float) -> float:
        return self.table[(scheme, f, r)].success_rate

    def csv_text(self) -> str:
        return rows_to_csv(self.rows)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "SweepResult":
        with open(path, newline="") as fh:
            return cls(rows_from_csv(fh.read()))


def aggregate(rows: Iterable[SweepRow]) -> dict:
    """Fold rows into per-cell statistics, in key order."""
    cells: dict = {}
    for row in sorted(rows, key=SweepRow.key):
        cells.setdefault((row.scheme, row.f, row.r), []).append(row)
    table = {}
    for key, group in cells.items():
        ok = [g for g in group if g.converged]
        rounds = [g.rounds for g in ok]
        cond = [g.condition_ok for g in group if g.condition_ok is not None]
        table[key] = CellStats(
            runs=len(group),
            successes=len(ok),
            success_rate=len(ok) / len(group),
            mean_rounds=sum(rounds) / len(rounds) if rounds else None,
            condition_rate=sum(cond) / len(cond) if cond else None,
        )
    return table


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=SweepRow.key):
        w.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _flag(text: str) -> bool | None:
    return None if text == "" else text == "1"


def rows_from_csv(text: str) -> list[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for rec in reader:
        out.append(SweepRow(
            scheme=rec["scheme"], f=int(rec["f"]), r=float(rec["r"]), seed=int(rec["seed"]),
            converged=_flag(rec["converged"]),
            rounds=None if rec["rounds"] == "" else int(rec["rounds"]),
            final_spread=float(rec["final_spread"]),
            safety_ok=_flag(rec["safety_ok"]),
            condition_ok=_flag(rec["condition_ok"])))
    return out


class _Conditions:
    """Lazily computed graph predicates for one (draw, r)."""

    def __init__(self, base: DirectedGraph, graph2: DirectedGraph, f_max: int):
        self.base, self.graph2 = base, graph2
        self.limit = f_max + 1
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def connected(self, g: DirectedGraph) -> bool:
        return self._memo(("conn", id(g)), lambda: is_connected(g))

    def _kappa_at_least(self, k: int) -> bool:
        return self._memo("kappa", lambda: capped_connectivity(self.base, self.limit)) >= k

    def scheme1(self, f: int) -> bool:
        floor = self._memo("cnf", lambda: common_neighbor_floor(self.base))
        if floor is not None and floor < f - 1:
            return False
        return self._kappa_at_least(f + 1)

    def scheme2(self, f: int) -> bool:
        g = self.graph2
        floor = self._memo("rsf", lambda: relay_support_floor(g))
        if floor is not None and floor < 2 * f + 1:
            return False
        if g.n <= 16:
            return self._memo(("rst", f + 1),
                              lambda: g.n > f + 1 and has_k_connected_rooted_spanning_trees(g, f + 1))
        # Above the enumeration cap: (f+1)-connectivity of the undirected base
        # graph, a subgraph of g, is sufficient (not necessary).
        return self._kappa_at_least(f + 1)


def _behavior(cfg: SweepConfig) -> AttackBehavior:
    if cfg.attack_scenario == "static-120":
        return AttackBehavior("static-value", k_on=cfg.activation_round, constant=120.0)
    return AttackBehavior("relay-tamper", k_on=cfg.activation_round)


def draw_inputs(cfg: SweepConfig, m: int) -> tuple[int, np.ndarray, np.ndarray, list[int]]:
    """Seed, positions, initial values and attacker order of draw m."""
    seed = cfg.base_seed + m
    geo = GeometricConfig(node_count=cfg.node_count, box_side=cfg.box_side, seed=seed)
    pos = sample_positions(geo)
    lo, hi = cfg.initial_value_range
    x0 = np.random.default_rng([seed, 1]).uniform(lo, hi, cfg.node_count)
    order = sample_attackers(cfg.node_count, max(cfg.f_grid), seed)
    return seed, pos, x0, order


def _run_one(cfg: SweepConfig, g: DirectedGraph, scheme: str, f: int, x0, attacks,
             seed: int) -> RunRecord:
    return run(RunConfig(graph=g, scheme=scheme, f=f, initial_values=tuple(x0.tolist()),
                         attacks=attacks, safety_interval=cfg.initial_value_range,
                         max_rounds=cfg.max_rounds,
                         convergence_epsilon=cfg.convergence_epsilon, seed=seed))


def _row(scheme, f, r, seed, rec: RunRecord, cond) -> SweepRow:
    return SweepRow(scheme, int(f), float(r), int(seed), rec.outcome == "converged",
                    rec.rounds_to_converge, float(rec.final_spread), bool(rec.safety_ok), cond)


def sweep_draw(cfg: SweepConfig, m: int) -> list[SweepRow]:
    """All rows of one draw: every radius, f and scheme."""
    seed, pos, x0, order = draw_inputs(cfg, m)
    behavior = _behavior(cfg)
    rows = []
    for r in cfg.radius_grid:
        base = graph_from_positions(pos, r)
        graph2 = base
        if cfg.relays_enabled:
            geo = GeometricConfig(node_count=cfg.node_count, box_side=cfg.box_side, radius=r,
                                  relay_count=cfg.relay_count,
                                  relay_radius_bonus=cfg.relay_radius_bonus,
                                  relay_grid_spacing=cfg.relay_grid_spacing, seed=seed)
            graph2 = augment_with_relays(base, pos, geo)
        cond = _Conditions(base, graph2, max(cfg.f_grid))
        if "plain" in cfg.schemes:
            # the adversary-free baseline does not depend on f
            rec = _run_one(cfg, graph2, "plain", 0, x0, (), seed)
            ok = cond.connected(graph2)
            rows.extend(_row("plain", f, r, seed, rec, ok) for f in cfg.f_grid)
        for f in cfg.f_grid:
            attacks = resolve_targets([(a, behavior) for a in order[:f]], base, seed)
            for scheme in cfg.schemes:
                if scheme == "plain":
                    continue
                g = base if scheme == "scheme1" else graph2
                rec = _run_one(cfg, g, scheme, f, x0, attacks, seed)
                c = {"scheme1": cond.scheme1, "scheme2": cond.scheme2}.get(scheme)
                rows.append(_row(scheme, f, r, seed, rec, None if c is None else c(f)))
    return rows


def sweep(cfg: SweepConfig) -> SweepResult:
    """Run every draw; the result does not depend on ``workers``."""
    draws = range(cfg.runs_per_cell)
    if cfg.workers == 1:
        chunks = [sweep_draw(cfg, m) for m in draws]
    else:
        with ProcessPoolExecutor(cfg.workers) as pool:
            chunks = list(pool.map(sweep_draw, [cfg] * len(draws), draws))
    return SweepResult([row for chunk in chunks for row in chunk])


# -- config files -----------------------------------------------------------------

def _load_json(path: str | os.PathLike) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = data.pop("spec_version", None)
    if version != SPEC_VERSION:
        raise ConfigError(f"{path}: spec_version must be {SPEC_VERSION}, got {version!r}")
    return data


def sweep_config_from_dict(data: dict) -> SweepConfig:
    known = {f.name for f in fields(SweepConfig)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown sweep keys {sorted(extra)}")
    try:
        return SweepConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_sweep_config(path: str | os.PathLike) -> SweepConfig:
    return sweep_config_from_dict(_load_json(path))


def _graph_from_dict(spec: dict, base_dir: str) -> DirectedGraph:
    from .graph import read_edge_list
    if "edge_list" in spec:
        p = spec["edge_list"]
        return read_edge_list(p if os.path.isabs(p) else os.path.join(base_dir, p))
    if "complete" in spec:
        return complete_graph(int(spec["complete"]))
    if "edges" in spec:
        return DirectedGraph.from_edges(int(spec["n"]), [tuple(e) for e in spec["edges"]],
                                        bool(spec.get("undirected", True)))
    if "geometric" in spec:
        geo = GeometricConfig(**spec["geometric"])
        pos = sample_positions(geo)
        g = graph_from_positions(pos, geo.radius)
        return augment_with_relays(g, pos, geo) if geo.relay_count else g
    raise ConfigError("graph needs one of edge_list, complete, edges, geometric")


def _attack_from_dict(item: dict) -> tuple[int, AttackBehavior]:
    item = dict(item)
    try:
        node = int(item.pop("node"))
        kind = item.pop("kind")
    except KeyError as exc:
        raise ConfigError(f"attack entry missing {exc}") from None
    params = item.pop("params", {})
    params.update(item)
    if kind not in KINDS:
        raise ConfigError(f"unknown attack kind {kind!r}; choose from {KINDS}")
    if "fake_reports" in params:
        params["fake_reports"] = tuple(tuple(p) for p in params["fake_reports"])
    try:
        return node, AttackBehavior(kind, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"attack on node {node}: {exc}") from None


RUN_KEYS = ("scheme", "f", "initial_values", "safety_interval", "max_rounds",
            "convergence_epsilon", "seed", "threat_model", "check_threat_model",
            "arithmetic", "stop_on_convergence", "backend")


def run_config_from_dict(data: dict, base_dir: str = ".") -> RunConfig:
    data = dict(data)
    if "graph" not in data:
        raise ConfigError("run config needs a graph")
    try:
        g = _graph_from_dict(data.pop("graph"), base_dir)
    except (GraphError, ValueError) as exc:
        raise ConfigError(f"graph: {exc}") from None
    attacks = [_attack_from_dict(a) for a in data.pop("attacks", [])]
    extra = set(data) - set(RUN_KEYS)
    if extra:
        raise ConfigError(f"unknown run keys {sorted(extra)}")
    if "initial_values" not in data:
        rng = np.random.default_rng([int(data.get("seed", 0)), 1])
        data["initial_values"] = rng.uniform(0, 100, g.n).tolist()
    attacks = resolve_targets(attacks, g, int(data.get("seed", 0)))
    try:
        cfg = RunConfig(graph=g, attacks=attacks, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def load_run_config(path: str | os.PathLike) -> RunConfig:
    return run_config_from_dict(_load_json(path), os.path.dirname(os.path.abspath(path)))


# -- canned scenarios --------------------------------------------------------------

# A 4-connected 9-node graph in which node 2 has neighbors {1, 3, 7, 9} and
# every adjacent pair shares at least two neighbors.
PHI2_EDGES = ((1, 2), (1, 3), (1, 5), (1, 6), (1, 7), (1, 8), (2, 3), (2, 7), (2, 9),
              (3, 4), (3, 5), (3, 9), (4, 5), (4, 8), (4, 9), (5, 8), (6, 7), (6, 8),
              (6, 9), (7, 9), (8, 9))
PHI2_X0 = (8, 10, 4, 2, 1, 5, 9, 3, 6)

SCENARIO_NAMES = ("phi2-example", "k9-minus5-scheme2", "collusion-4cycle", "complete-fmax")


@dataclass
class ReproResult:
    name: str
    record: RunRecord
    checks: list            # (description, passed)
    summary: str = ""

    @property
    def ok(self) -> bool:
        return all(p for _, p in self.checks)


def _phi2() -> tuple[RunRecord, list]:
    g = DirectedGraph.from_edges(9, PHI2_EDGES, True)
    cfg = RunConfig(g, "scheme1", 1, PHI2_X0, max_rounds=100, arithmetic="exact",
                    backend="reference", keep_messages=True)
    rec = run(cfg)
    msg = rec.messages[1][2]
    want = InformationSet(sender=2, round=1, own_value=Fraction(37, 5),
                          neighbor_values={1: 8, 2: 10, 3: 4, 7: 9, 9: 6})
    checks = [
        ("node 2 neighbors are {1,3,7,9}", g.in_neighbors(2) == frozenset({1, 3, 7, 9})),
        ("x_2[1] == 37/5", msg.own_value == Fraction(37, 5)),
        ("Phi_2[1] content matches", msg.content() == want.content()),
        ("A_2[1] is empty", msg.declared_malicious == frozenset()),
        ("no verdicts", not rec.verdicts),
        ("converged", rec.outcome == "converged"),
    ]
    return rec, checks


def _k9_minus5() -> tuple[RunRecord, list]:
    g = complete_minus_in_edges(9, 1, (2, 3, 4, 5, 6))
    attacks = [(a, AttackBehavior("static-value", k_on=3, constant=120.0)) for a in range(2, 8)]
    x0 = (8, 10, 4, 2, 1, 5, 9, 3, 6)
    cfg = RunConfig(g, "scheme2", 1, x0, attacks, check_threat_model=False,
                    threat_model="local")
    rec = run(cfg)
    summary = evaluate(rec, cfg)
    checks = [
        ("node 1 hears 1 attacker (1-local for node 1)",
         len(g.in_neighbors(1) & set(range(2, 8))) == 1),
        ("converged", rec.outcome == "converged"),
        ("safety held", rec.safety_ok),
    ]
    for a in range(2, 8):
        d, flag, lat = summary.latency[a]
        checks.append((f"attacker {a} flagged one round after activation", d == 3 and lat == 1))
    return rec, checks


def _collusion() -> tuple[RunRecord, list]:
    g = cycle_graph(4)
    attacks = [(1, AttackBehavior("collusion-pair", k_on=3, partner=2)),
               (2, AttackBehavior("collusion-pair", k_on=3, partner=1))]
    x0 = (30, 70, 0, 100)
    cfg = RunConfig(g, "scheme1", 2, x0, attacks, max_rounds=200)
    rec = run(cfg)
    honest = run(RunConfig(g, "scheme1", 2, x0, max_rounds=200))
    checks = [
        ("zero verdicts in every round", not rec.verdicts),
        ("no node is ever flagged", not rec.flag_events),
        ("the attackers deviated", set(rec.deviation_rounds) == {1, 2}),
        ("consensus moved off the attack-free value",
         abs(rec.values[-1][2] - honest.values[-1][2]) > 1.0),
        ("safety held", rec.safety_ok),
    ]
    return rec, checks


def _complete_fmax() -> tuple[RunRecord, list]:
    g = complete_graph(5)
    attacks = [(a, AttackBehavior("static-value", k_on=3, constant=120.0)) for a in (1, 2, 3)]
    cfg = RunConfig(g, "scheme2", 3, (8, 10, 4, 2, 1), attacks)
    rec = run(cfg)
    summary = evaluate(rec, cfg)
    checks = [("converged", rec.outcome == "converged"), ("safety held", rec.safety_ok)]
    for a in (1, 2, 3):
        d, flag, lat = summary.latency[a]
        checks.append((f"attacker {a} flagged one round after activation", lat == 1))
    return rec, checks


_SCENARIOS = {"phi2-example": _phi2, "k9-minus5-scheme2": _k9_minus5,
              "collusion-4cycle": _collusion, "complete-fmax": _complete_fmax}


def repro_scenario(name: str) -> ReproResult:
    if name not in _SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    rec, checks = _SCENARIOS[name]()
    lines = [f"scenario {name}: outcome={rec.outcome} rounds={rec.rounds} "
             f"final_spread={rec.final_spread:.3g}"]
    lines += [f"  [{'ok' if p else 'FAIL'}] {d}" for d, p in checks]
    return ReproResult(name, rec, checks, "\n".join(lines))


# -- graph report ------------------------------------------------------------------

@dataclass
class GraphReport:
    n: int
    edges: int
    undirected: bool
    f: int
    scheme: str
    kappa: int | None
    scheme1_condition: bool | None
    scheme2_condition: bool
    rooted_trees: bool | None        # (f+1)-connected rooted spanning trees
    robust: bool | None              # (f+1, f+1)-robust
    full_access: tuple
    verdicts: dict                   # scheme -> bool | None

    def render(self) -> str:
        def show(v):
            return "n/a" if v is None else str(v).lower()
        lines = [f"nodes={self.n} edges={self.edges} undirected={show(self.undirected)} f={self.f}",
                 f"kappa={show(self.kappa)}",
                 f"scheme1 two-hop condition: {show(self.scheme1_condition)}",
                 f"scheme2 two-hop condition: {show(self.scheme2_condition)}",
                 f"(f+1)-connected rooted spanning trees: {show(self.rooted_trees)}",
                 f"(f+1,f+1)-robust: {show(self.robust)}",
                 f"full access nodes: {list(self.full_access)}"]
        for s, v in self.verdicts.items():
            mark = " <" if s == self.scheme else ""
            lines.append(f"verdict {s}: {show(v)}{mark}")
        return "\n".join(lines)


def check_graph(g: DirectedGraph, f: int, scheme: str = "scheme2",
                cap: int = 16) -> GraphReport:
    """Evaluate the structural conditions of every scheme for one f.

    Checks that need enumeration beyond ``cap`` nodes report None.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    kappa = s1 = None
    if g.undirected and g.n >= 2:
        kappa = vertex_connectivity(g)
        s1 = check_scheme1_condition(g, f)[0]
    s2 = check_scheme2_condition(g, f)[0]
    try:
        trees = g.n > f + 1 and has_k_connected_rooted_spanning_trees(g, f + 1, cap)
    except InstanceTooLarge:
        trees = None
    try:
        robust = is_rs_robust(g, f + 1, f + 1, cap)[0]
    except InstanceTooLarge:
        robust = None
    verdicts = {
        "scheme1": None if s1 is None else bool(s1 and kappa >= f + 1),
        "scheme2": None if trees is None else bool(s2 and trees),
        "wmsr": robust,
        "plain": bool(f == 0 and is_connected(g)),
    }
    return GraphReport(g.n, len(g.edges) // (2 if g.undirected else 1), g.undirected, f, scheme,
                       kappa, s1, s2, trees, robust, tuple(sorted(full_access_nodes(g))), verdicts)
