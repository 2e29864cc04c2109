"""Command line: ``python -m twohop <command> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 a canned scenario
failed one of its checks.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .engine import SCHEMES, ConfigError, evaluate, run
from .graph import EdgeListParseError, GraphError, read_edge_list
from .harness import (
    SCENARIO_NAMES,
    check_graph,
    load_run_config,
    load_sweep_config,
    repro_scenario,
    sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_REPRO = 0, 2, 3


def _cmd_check_graph(args) -> int:
    g = read_edge_list(args.file)
    print(check_graph(g, args.f, args.scheme, cap=args.cap).render())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = load_run_config(args.config)
    rec = run(cfg)
    summary = evaluate(rec, cfg)
    if args.trace:
        rec.write_trace(args.trace)
    out = {
        "outcome": summary.outcome,
        "rounds": rec.rounds,
        "rounds_to_converge": summary.rounds_to_converge,
        "final_spread": summary.final_spread,
        "safety_ok": summary.safety_ok,
        "safety_set": list(summary.safety_set),
        "verdicts": len(rec.verdicts),
        "latency": {str(a): list(v) for a, v in summary.latency.items()},
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    if args.workers is not None:
        from dataclasses import replace
        cfg = replace(cfg, workers=args.workers)
    t0 = time.perf_counter()
    result = sweep(cfg)
    result.write_csv(args.out)
    print(f"{len(result.rows)} rows in {time.perf_counter() - t0:.1f}s -> {args.out}",
          file=sys.stderr)
    for (scheme, f, r), cell in sorted(result.table.items()):
        print(f"{scheme:8s} f={f:<3d} r={r:<6g} success={cell.success_rate:.2f}")
    return EXIT_OK


def _cmd_repro(args) -> int:
    res = repro_scenario(args.name)
    print(res.summary)
    if args.trace:
        res.record.write_trace(args.trace)
    return EXIT_OK if res.ok else EXIT_REPRO


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twohop",
                                description="Resilient consensus with two-hop detection.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-graph", help="report the structural conditions of a graph")
    c.add_argument("file", help="edge-list file")
    c.add_argument("--f", type=int, required=True, help="adversary bound")
    c.add_argument("--scheme", choices=SCHEMES, default="scheme2")
    c.add_argument("--cap", type=int, default=16,
                   help="node cap for enumeration-based checks (default 16)")
    c.set_defaults(func=_cmd_check_graph)

    s = sub.add_parser("simulate", help="run one configuration file")
    s.add_argument("config")
    s.add_argument("--trace", help="write the per-round trace here")
    s.set_defaults(func=_cmd_simulate)

    w = sub.add_parser("sweep", help="Monte Carlo sweep from a configuration file")
    w.add_argument("config")
    w.add_argument("--out", required=True, help="CSV output path")
    w.add_argument("--workers", type=int, help="override the worker count")
    w.set_defaults(func=_cmd_sweep)

    r = sub.add_parser("repro", help="run a canned scenario and check it")
    r.add_argument("name", choices=SCENARIO_NAMES)
    r.add_argument("--trace", help="write the per-round trace here")
    r.set_defaults(func=_cmd_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EdgeListParseError, GraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
