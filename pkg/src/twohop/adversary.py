"""Scripted malicious behaviors.

Each behavior rewrites the honest outbound message of one node. The
rewritten message is what every out-neighbor receives, so broadcast
consistency holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

import numpy as np

from .arith import canonical_mean
from .graph import DirectedGraph
from .protocol import InformationSet

KINDS = ("honest-shadow", "static-value", "relay-tamper", "collusion-pair", "crash", "scripted")
DEFAULT_ACTIVATION = 3
DEFAULT_TAMPER_OFFSET = 50.0


@dataclass(frozen=True)
class AttackBehavior:
    kind: str
    k_on: int = DEFAULT_ACTIVATION
    constant: float | None = None
    target: int | None = None
    partner: int | None = None
    offset: float = DEFAULT_TAMPER_OFFSET
    # round -> {"own_value", "relays", "drop_relays", "declared_malicious", "silent"}
    overrides: dict = field(default_factory=dict)
    # (round, suspect) pairs: false detection reports filed by this node
    fake_reports: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; choose from {KINDS}")
        if self.k_on < 0:
            raise ValueError("activation round must be non-negative")
        if self.kind == "static-value" and self.constant is None:
            raise ValueError("static-value needs a constant")
        if self.kind == "collusion-pair" and self.partner is None:
            raise ValueError("collusion-pair needs a partner")
        object.__setattr__(self, "fake_reports",
                           tuple((int(k), int(s)) for k, s in self.fake_reports))
        object.__setattr__(self, "overrides", {int(k): v for k, v in self.overrides.items()})

    def active(self, k: int) -> bool:
        return self.kind != "honest-shadow" and k >= self.k_on

    def fake_reports_at(self, k: int) -> frozenset:
        return frozenset(s for r, s in self.fake_reports if r == k)


@dataclass(frozen=True)
class WorldView:
    """Read-only knowledge handed to an attacker each round."""
    round: int
    node: int
    graph: DirectedGraph
    interval: tuple
    encode: Callable[[Any], Any]
    values: tuple = ()


def _clamp(v, interval):
    lo, hi = interval
    return min(max(v, lo), hi)


def _retune_own(msg: InformationSet, g: DirectedGraph, relays: dict):
    """Own value as the update rule would give it on the (tampered) relays."""
    members = sorted((g.in_neighbors(msg.sender) - msg.declared_malicious) | {msg.sender})
    vals = [relays.get(h) for h in members]
    if any(v is None for v in vals):
        return msg.own_value
    return canonical_mean(vals)


def _tamper(msg: InformationSet, victim: int | None, offset, view: WorldView) -> InformationSet:
    if victim is None or msg.neighbor_values.get(victim) is None:
        return msg
    relays = dict(msg.neighbor_values)
    relays[victim] = _clamp(relays[victim] + offset, view.interval)
    return replace(msg, neighbor_values=relays, own_value=_retune_own(msg, view.graph, relays))


def _scripted(msg: InformationSet, spec: dict, view: WorldView) -> InformationSet | None:
    if spec.get("silent"):
        return None
    relays = dict(msg.neighbor_values)
    for h, v in spec.get("relays", {}).items():
        relays[int(h)] = None if v is None else view.encode(v)
    for h in spec.get("drop_relays", ()):
        relays.pop(int(h), None)
    out = replace(msg, neighbor_values=relays)
    if "declared_malicious" in spec:
        out = replace(out, declared_malicious=frozenset(int(h) for h in spec["declared_malicious"]))
    if "own_value" in spec:
        out = replace(out, own_value=view.encode(spec["own_value"]))
    return out


def apply_attack(behavior: AttackBehavior, honest: InformationSet,
                 view: WorldView) -> InformationSet | None:
    """Transform the honest broadcast; None means the node stays silent."""
    k = honest.round
    if not behavior.active(k):
        return honest
    if behavior.kind == "crash":
        return None
    # An active attacker files only the reports it fabricates.
    msg = replace(honest, reports=behavior.fake_reports_at(k))
    if behavior.kind == "static-value":
        return replace(msg, own_value=view.encode(behavior.constant))
    if behavior.kind == "relay-tamper":
        return _tamper(msg, behavior.target, view.encode(behavior.offset), view)
    if behavior.kind == "collusion-pair":
        return _tamper(msg, behavior.partner, view.encode(behavior.offset), view)
    if behavior.kind == "scripted":
        spec = behavior.overrides.get(k)
        return msg if spec is None else _scripted(msg, spec, view)
    raise AssertionError(behavior.kind)


def choose_victim(g: DirectedGraph, node: int, seed: int) -> int | None:
    """Seeded pick of one in-neighbor whose relayed value gets tampered."""
    nbrs = sorted(g.in_neighbors(node))
    if not nbrs:
        return None
    rng = np.random.default_rng([seed, node])
    return int(nbrs[rng.integers(len(nbrs))])


def resolve_targets(attacks: Iterable[tuple[int, AttackBehavior]], g: DirectedGraph,
                    seed: int) -> list[tuple[int, AttackBehavior]]:
    """Fix the victim of every relay-tamper attack that does not name one."""
    out = []
    for node, b in attacks:
        if b.kind == "relay-tamper" and b.target is None:
            b = replace(b, target=choose_victim(g, node, seed))
        out.append((node, b))
    return out


def sample_attackers(n: int, f: int, seed: int) -> list[int]:
    """First f entries of a seeded permutation, so sets for larger f contain smaller ones."""
    if not 0 <= f <= n:
        raise ValueError(f"cannot pick {f} attackers from {n} nodes")
    order = np.random.default_rng(seed).permutation(n) + 1
    return [int(v) for v in order[:f]]


def threat_model_violations(g: DirectedGraph, attackers: Iterable[int], f: int,
                            model: str = "total") -> list:
    """Empty when the attacker set fits the f-total or f-local bound."""
    bad = set(attackers)
    if model == "total":
        return [] if len(bad) <= f else [("total", len(bad))]
    if model == "local":
        return [(i, len(g.in_neighbors(i) & bad)) for i in g.nodes
                if i not in bad and len(g.in_neighbors(i) & bad) > f]
    raise ValueError(f"unknown threat model {model!r}")
