"""Messages, update rules and the two detection procedures run by honest agents.

Values are opaque to this module apart from equality and `canonical_mean`.

Round convention: a message built at the end of round k-1 is the round-k
broadcast Phi_j[k]. It carries x_j[k], the values x_h[k-1] that j received
(plus its own previous value under key j), and A_j[k], the set j excluded
when computing x_j[k].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .arith import canonical_mean
from .graph import DirectedGraph


class Reason(str, Enum):
    BAD_IDENTITY_CLAIM = "bad-identity-claim"
    BAD_NEIGHBOR_IDS = "bad-neighbor-ids"
    RELAYED_VALUE_MISMATCH = "relayed-value-mismatch"
    UPDATE_RULE_VIOLATION = "update-rule-violation"
    OUT_OF_SAFETY_INTERVAL = "out-of-safety-interval"
    MISSING_MESSAGE = "missing-message"


class _Undecided:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDECIDED"

    def __bool__(self):
        return False


UNDECIDED = _Undecided()


@dataclass(frozen=True)
class InformationSet:
    sender: int
    round: int
    own_value: Any
    neighbor_values: Mapping[int, Any] = field(default_factory=dict)
    declared_malicious: frozenset = frozenset()
    # Scheme-2 detection reports riding on the broadcast: suspects only,
    # the reporter is the sender.
    reports: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "neighbor_values",
                           dict(sorted(self.neighbor_values.items())))
        object.__setattr__(self, "declared_malicious", frozenset(self.declared_malicious))
        object.__setattr__(self, "reports", frozenset(self.reports))

    def content(self) -> tuple:
        """Everything the detection steps look at (reports excluded)."""
        return (self.sender, self.round, self.own_value,
                tuple(self.neighbor_values.items()), self.declared_malicious)


@dataclass
class CheckSet:
    round: int
    values: dict = field(default_factory=dict)


@dataclass(frozen=True, order=True)
class DetectionVerdict:
    detector: int
    suspect: int
    round: int
    reason: Reason


@dataclass
class AgentState:
    id: int
    graph: DirectedGraph
    value: Any
    f: int = 0
    scheme: str = "scheme1"
    round: int = 0
    prev_value: Any = None
    check_set: CheckSet = field(default_factory=lambda: CheckSet(0))
    malicious_set: set = field(default_factory=set)
    own_detections: set = field(default_factory=set)
    inbox: dict | None = None
    prev_inbox: dict | None = None
    safety_interval: tuple = (0, 100)
    label_scope: frozenset | None = None
    undecided: list = field(default_factory=list)
    reported: list = field(default_factory=list)

    def __post_init__(self):
        if self.label_scope is None:
            self.label_scope = verifiable_nodes(self.graph, self.id, self.f)

    @property
    def neighbors(self) -> frozenset:
        return self.graph.in_neighbors(self.id)


def verifiable_nodes(g: DirectedGraph, i: int, f: int) -> frozenset:
    """Nodes whose previous value node i can pin down: itself, its in-neighbors,
    and two-hop sources with at least 2f+1 two-hop paths into i."""
    n_i = g.in_neighbors(i)
    far = set()
    for j in n_i:
        far |= g.in_neighbors(j)
    far -= n_i | {i}
    need = 2 * f + 1
    return frozenset(n_i | {i} | {h for h in far
                                  if len(g.out_neighbors(h) & n_i) >= need})


# -- updates ----------------------------------------------------------------

def normal_update(state: AgentState) -> Any:
    """Mean of own value and the values of unflagged in-neighbors."""
    members = {state.id: state.value}
    for j in state.neighbors - state.malicious_set:
        msg = (state.inbox or {}).get(j)
        if msg is None:
            raise ValueError(f"node {state.id}: no message from unflagged neighbor {j}")
        members[j] = msg.own_value
    return canonical_mean(members[k] for k in sorted(members))


def wmsr_update(own: Any, neighbor_values: Mapping[int, Any], f: int) -> Any:
    """Drop up to f neighbor values above own and up to f below, average the rest."""
    above = sorted((v, j) for j, v in neighbor_values.items() if v > own)
    below = sorted((v, j) for j, v in neighbor_values.items() if v < own)
    dropped = {j for _, j in above[len(above) - min(f, len(above)):]}
    dropped |= {j for _, j in below[:min(f, len(below))]}
    members = {j: v for j, v in neighbor_values.items() if j not in dropped}
    members[-1] = own  # sorts first; ids are positive
    return canonical_mean(members[k] for k in sorted(members))


def build_information_set(state: AgentState, new_value: Any) -> InformationSet:
    """Broadcast for the next round.

    On a fresh state (nothing received yet) this is the round-0 message with
    no relayed values. Otherwise it relays x_j[k] for every in-neighbor j,
    flagged or not, plus the agent's own x_i[k].
    """
    reports = state.own_detections if state.scheme == "scheme2" else ()
    if state.inbox is None:
        return InformationSet(state.id, 0, new_value, {}, frozenset(state.malicious_set),
                              frozenset(reports))
    relays = {j: (m.own_value if m is not None else None)
              for j, m in ((j, state.inbox.get(j)) for j in state.neighbors)}
    relays[state.id] = state.value
    return InformationSet(state.id, state.round + 1, new_value, relays,
                          frozenset(state.malicious_set), frozenset(reports))


# -- detection steps ----------------------------------------------------------

def identity_claims_ok(msg: InformationSet, g: DirectedGraph, known: frozenset | set,
                       label_scope: frozenset | None) -> bool:
    """Step 1. With no scope the declared set must equal ``known`` exactly;
    otherwise the two must agree on every in-neighbor of the sender inside
    the scope."""
    if label_scope is None:
        return msg.declared_malicious == frozenset(known)
    for h in g.in_neighbors(msg.sender) & label_scope:
        if (h in msg.declared_malicious) != (h in known):
            return False
    return True


def neighbor_ids_ok(msg: InformationSet, g: DirectedGraph, round: int) -> bool:
    """Step 2. Relayed keys must be exactly the sender's in-neighbors and itself
    (nothing at all in round 0)."""
    if round == 0:
        return not msg.neighbor_values
    expected = g.in_neighbors(msg.sender) | {msg.sender}
    return msg.neighbor_values.keys() == expected


def relayed_values_ok(msg: InformationSet, check_values: Mapping[int, Any]) -> bool:
    """Step 3. Every relayed value that has a reference copy must match it."""
    for h, v in msg.neighbor_values.items():
        if h in check_values and check_values[h] != v:
            return False
    return True


def update_rule_ok(msg: InformationSet, g: DirectedGraph) -> bool:
    """Step 4. Own value must be the mean the sender's own relays and declared set imply."""
    j = msg.sender
    members = sorted((g.in_neighbors(j) - msg.declared_malicious) | {j})
    vals = []
    for h in members:
        v = msg.neighbor_values.get(h)
        if v is None:
            return False
        vals.append(v)
    return canonical_mean(vals) == msg.own_value


def inspect_message(msg: InformationSet | None, *, g: DirectedGraph, round: int,
                    known: frozenset | set, check_values: Mapping[int, Any],
                    label_scope: frozenset | None,
                    safety_interval: tuple) -> Reason | None:
    """Run the detection steps on one received message; first failure wins."""
    if msg is None:
        return Reason.MISSING_MESSAGE
    if not identity_claims_ok(msg, g, known, label_scope):
        return Reason.BAD_IDENTITY_CLAIM
    if not neighbor_ids_ok(msg, g, round):
        return Reason.BAD_NEIGHBOR_IDS
    if round == 0:
        lo, hi = safety_interval
        if msg.own_value is None or not lo <= msg.own_value <= hi:
            return Reason.OUT_OF_SAFETY_INTERVAL
        return None
    if not relayed_values_ok(msg, check_values):
        return Reason.RELAYED_VALUE_MISMATCH
    if not update_rule_ok(msg, g):
        return Reason.UPDATE_RULE_VIOLATION
    return None


def direct_check_values(state: AgentState) -> dict:
    """Reference copies of x_h[k-1] for h in N_i and i itself."""
    values = {state.id: state.prev_value}
    prev = state.prev_inbox or {}
    for j in state.neighbors:
        m = prev.get(j)
        values[j] = m.own_value if m is not None else None
    return values


def _inspect_all(state: AgentState, label_scope, check_values) -> list[DetectionVerdict]:
    known = frozenset(state.malicious_set)
    verdicts = []
    for j in sorted(state.neighbors - known):
        reason = inspect_message(state.inbox.get(j), g=state.graph, round=state.round,
                                 known=known, check_values=check_values,
                                 label_scope=label_scope,
                                 safety_interval=state.safety_interval)
        if reason is not None:
            verdicts.append(DetectionVerdict(state.id, j, state.round, reason))
    for v in verdicts:
        state.malicious_set.add(v.suspect)
        state.own_detections.add(v.suspect)
    return verdicts


def algorithm1_detect(state: AgentState, shared_detections: Iterable[int]) -> list[DetectionVerdict]:
    """Common-neighbor scheme: absorb the share, then check every unflagged in-neighbor.

    All messages of the round are judged against the same known set; new
    suspects join ``malicious_set`` only after the whole inbox is checked.
    """
    state.malicious_set |= set(shared_detections)
    direct = direct_check_values(state) if state.round > 0 else {}
    state.check_set = CheckSet(state.round, direct)
    return _inspect_all(state, None, direct)


def majority_vote(values: Iterable) -> Any:
    """Strict-majority value, or UNDECIDED."""
    vals = list(values)
    if not vals:
        raise ValueError("vote over no values")
    value, count = Counter(vals).most_common(1)[0]
    return value if 2 * count > len(vals) else UNDECIDED


algorithm2_majority_vote = majority_vote


def absorb_reports(state: AgentState, report_inbox: Iterable[tuple[int, int]]) -> list[int]:
    """Add every suspect named by at least f+1 distinct unflagged reporters."""
    reporters: dict[int, set] = {}
    for reporter, suspect in report_inbox:
        if reporter in state.malicious_set or suspect == state.id:
            continue
        reporters.setdefault(suspect, set()).add(reporter)
    added = sorted(s for s, r in reporters.items()
                   if len(r) >= state.f + 1 and s not in state.malicious_set)
    state.malicious_set.update(added)
    state.reported = added
    return added


def voted_check_values(state: AgentState) -> tuple[dict, list[int]]:
    """Votes on two-hop values from the copies relayed by unflagged in-neighbors.

    Returns the decided values and the two-hop nodes whose vote was
    undecided even though the voting condition says it must decide.
    """
    g, i = state.graph, state.id
    direct = state.neighbors | {i}
    copies: dict[int, list] = {}
    for l in sorted(state.neighbors - state.malicious_set):
        msg = state.inbox.get(l)
        if msg is None:
            continue
        topo = g.in_neighbors(l)
        for h, v in msg.neighbor_values.items():
            if h not in direct and h in topo:
                copies.setdefault(h, []).append(v)
    decided, undecided = {}, []
    for h in sorted(copies):
        result = majority_vote(copies[h])
        if result is UNDECIDED:
            if h in state.label_scope:
                undecided.append(h)
        else:
            decided[h] = result
    return decided, undecided


def algorithm2_detect(state: AgentState,
                      report_inbox: Iterable[tuple[int, int]]) -> list[DetectionVerdict]:
    """Voting scheme: absorb reports, vote on two-hop values, then check messages."""
    absorb_reports(state, report_inbox)
    values = direct_check_values(state) if state.round > 0 else {}
    state.undecided = []
    if state.round > 0:
        decided, state.undecided = voted_check_values(state)
        values.update(decided)
    state.check_set = CheckSet(state.round, values)
    return _inspect_all(state, state.label_scope, values)
