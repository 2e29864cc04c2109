"""Resilient consensus with two-hop detection: graphs, protocol, adversaries, simulation."""

from .adversary import AttackBehavior, apply_attack, sample_attackers
from .engine import ConfigError, RunConfig, RunRecord, evaluate, run
from .graph import DirectedGraph

__all__ = ["AttackBehavior", "ConfigError", "DirectedGraph", "RunConfig", "RunRecord",
           "apply_attack", "evaluate", "run", "sample_attackers"]
