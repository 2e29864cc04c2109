"""Synchronous round loop: broadcast, detect, share/report, update.

Two interchangeable backends produce identical records:

``reference``
    one `AgentState` per node driven through the functions in
    `twohop.protocol`; works with any value representation.
``batched``
    numpy arrays for the honest majority, with the protocol functions
    applied only to messages that differ from what an honest sender would
    have broadcast; fixed-point values only.

The backend equivalence is enforced by the test suite on randomized
configurations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple

import numpy as np

from .adversary import AttackBehavior, WorldView, apply_attack, threat_model_violations
from .arith import Fixed, canonical_mean, get_arithmetic
from .graph import DirectedGraph
from .protocol import (
    UNDECIDED,
    AgentState,
    DetectionVerdict,
    InformationSet,
    Reason,
    absorb_reports,
    algorithm1_detect,
    algorithm2_detect,
    build_information_set,
    identity_claims_ok,
    inspect_message,
    majority_vote,
    neighbor_ids_ok,
    normal_update,
    update_rule_ok,
    verifiable_nodes,
    wmsr_update,
)

SCHEMES = ("scheme1", "scheme2", "wmsr", "plain")
DETECTING = ("scheme1", "scheme2")
TRACE_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    graph: DirectedGraph
    scheme: str
    f: int
    initial_values: tuple
    attacks: tuple = ()
    safety_interval: tuple = (0.0, 100.0)
    max_rounds: int = 500
    convergence_epsilon: float = 1e-6
    seed: int = 0
    threat_model: str = "total"
    check_threat_model: bool = True
    arithmetic: str = "fixed"
    stop_on_convergence: bool = True
    backend: str = "auto"
    keep_messages: bool = False

    def __post_init__(self):
        object.__setattr__(self, "initial_values", tuple(self.initial_values))
        object.__setattr__(self, "attacks", tuple((int(i), b) for i, b in self.attacks))
        object.__setattr__(self, "safety_interval", tuple(self.safety_interval))

    @property
    def attackers(self) -> frozenset:
        return frozenset(i for i, _ in self.attacks)

    def validate(self) -> None:
        g = self.graph
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if len(self.initial_values) != g.n:
            raise ConfigError(f"{len(self.initial_values)} initial values for {g.n} nodes")
        if self.f < 0:
            raise ConfigError("f must be non-negative")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be non-negative")
        if not self.convergence_epsilon > 0:
            raise ConfigError("convergence_epsilon must be positive")
        lo, hi = self.safety_interval
        if lo > hi:
            raise ConfigError("safety interval is empty")
        attackers = {i for i, _ in self.attacks}
        outside = [i for i, x in enumerate(self.initial_values, start=1)
                   if i not in attackers and not lo <= x <= hi]
        if outside:
            raise ConfigError(f"normal nodes {outside} start outside the safety interval")
        if self.scheme == "scheme1" and not g.undirected:
            raise ConfigError("scheme1 runs on undirected graphs only")
        if self.threat_model not in ("total", "local"):
            raise ConfigError(f"unknown threat model {self.threat_model!r}")
        if self.scheme == "scheme1" and self.threat_model == "local":
            raise ConfigError("scheme1 is defined for the f-total model only")
        ids = [i for i, _ in self.attacks]
        if len(set(ids)) != len(ids):
            raise ConfigError("a node has more than one attack behavior")
        for i, b in self.attacks:
            if not 1 <= i <= g.n:
                raise ConfigError(f"attacker id {i} outside 1..{g.n}")
            if not isinstance(b, AttackBehavior):
                raise ConfigError(f"attack on node {i} is not an AttackBehavior")
        if self.check_threat_model:
            bad = threat_model_violations(g, ids, self.f, self.threat_model)
            if bad:
                raise ConfigError(f"attackers exceed the f-{self.threat_model} bound: {bad}")
        try:
            get_arithmetic(self.arithmetic)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.backend not in ("auto", "reference", "batched"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "batched" and self.arithmetic != "fixed":
            raise ConfigError("the batched backend needs fixed-point arithmetic")
        if self.keep_messages and self.backend == "batched":
            raise ConfigError("keep_messages needs the reference backend")


class FlagEvent(NamedTuple):
    round: int       # first round whose update excludes the suspect
    node: int
    suspect: int
    source: str      # detected | shared | reported


@dataclass
class RunRecord:
    n: int
    scheme: str
    arithmetic: str
    attackers: frozenset
    raw_values: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    flag_events: list = field(default_factory=list)
    condition_events: list = field(default_factory=list)
    deviation_rounds: dict = field(default_factory=dict)
    outcome: str = "diverged"
    rounds_to_converge: int | None = None
    final_spread: float = float("nan")
    safety_ok: bool = True
    safety_set: tuple = (0.0, 0.0)
    messages: list = field(default_factory=list)   # per round {node: message}, opt-in

    @property
    def rounds(self) -> int:
        """Index of the last simulated round."""
        return len(self.raw_values) - 1

    @property
    def normal_nodes(self) -> list[int]:
        return [i for i in range(1, self.n + 1) if i not in self.attackers]

    @property
    def values(self) -> np.ndarray:
        """Broadcast values as floats, rounds x nodes; NaN where a node was silent."""
        dec = get_arithmetic(self.arithmetic).decode
        return np.array([[np.nan if v is None else dec(v) for v in row]
                         for row in self.raw_values], dtype=float).reshape(-1, self.n)

    def malicious_sets(self, k: int) -> list[frozenset]:
        """A_i[k] for every node (index 0 is node 1)."""
        sets = [set() for _ in range(self.n)]
        for e in self.flag_events:
            if e.round <= k:
                sets[e.node - 1].add(e.suspect)
        return [frozenset(s) for s in sets]

    def first_flag_round(self, node: int, suspect: int) -> int | None:
        for e in self.flag_events:
            if e.node == node and e.suspect == suspect:
                return e.round
        return None

    def trace_lines(self) -> list[str]:
        dec = get_arithmetic(self.arithmetic).decode
        lines = [f"# twohop-trace v{TRACE_VERSION} scheme={self.scheme} n={self.n} "
                 f"rounds={self.rounds}",
                 "round,node,value,flags,verdicts"]
        events = sorted(self.flag_events)
        by_round: dict = {}
        for v in self.verdicts:
            by_round.setdefault((v.round, v.detector), []).append(f"{v.suspect}:{v.reason.value}")
        flags = [set() for _ in range(self.n + 1)]
        e = 0
        for k, row in enumerate(self.raw_values):
            while e < len(events) and events[e].round <= k:
                flags[events[e].node].add(events[e].suspect)
                e += 1
            for i, val in enumerate(row, start=1):
                text = "-" if val is None else format(dec(val), ".12g")
                fl = ";".join(map(str, sorted(flags[i])))
                vs = ";".join(by_round.get((k, i), ()))
                lines.append(f"{k},{i},{text},{fl},{vs}")
        return lines

    def trace_text(self) -> str:
        return "\n".join(self.trace_lines()) + "\n"

    def write_trace(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.trace_text())


@dataclass(frozen=True)
class OutcomeSummary:
    outcome: str
    safety_ok: bool
    safety_set: tuple
    rounds_to_converge: int | None
    final_spread: float
    latency: dict   # attacker -> (first deviation, network-wide flag round, latency)


def evaluate(record: RunRecord, cfg: RunConfig) -> OutcomeSummary:
    """Outcome plus per-attacker detection latency.

    The network-wide flag round of an attacker is the first round whose
    update excludes it at every normal out-neighbor.
    """
    g = cfg.graph
    latency = {}
    for a in sorted(record.deviation_rounds):
        d = record.deviation_rounds[a]
        watchers = [o for o in g.out_neighbors(a) if o not in record.attackers]
        rounds = [record.first_flag_round(o, a) for o in watchers]
        if not watchers or any(r is None for r in rounds):
            latency[a] = (d, None, None)
        else:
            flag = max(rounds)
            latency[a] = (d, flag, flag - d)
    return OutcomeSummary(record.outcome, record.safety_ok, record.safety_set,
                          record.rounds_to_converge, record.final_spread, latency)


# -- detection share ---------------------------------------------------------

class Report(NamedTuple):
    reporter: int
    suspect: int
    evidence: Any    # the verdict, or None for a fabricated report


def detection_share_oracle(reports: Iterable[Report], *, g: DirectedGraph, round: int,
                           known: frozenset, current: dict, previous: dict | None,
                           safety_interval: tuple) -> tuple[set, set]:
    """Replay each report against the archived messages of rounds k and k-1.

    ``current`` and ``previous`` map node ids to the messages (None for
    silence) broadcast in those rounds. Returns the validated suspects and
    the reporters whose evidence did not hold up.
    """
    valid, refuted = set(), set()
    for rep in reports:
        r, s = rep.reporter, rep.suspect
        ok = s in g.in_neighbors(r) and s not in known
        if ok:
            check = {}
            if round > 0:
                for h in g.in_neighbors(r) | {r}:
                    m = previous.get(h)
                    check[h] = m.own_value if m is not None else None
            reason = inspect_message(current.get(s), g=g, round=round, known=known,
                                     check_values=check, label_scope=None,
                                     safety_interval=safety_interval)
            ok = reason is not None
        (valid if ok else refuted).add(s if ok else r)
    return valid, refuted


# -- shared driver -------------------------------------------------------------

class _Run:
    """Bookkeeping common to both backends."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.g = cfg.graph
        self.n = cfg.graph.n
        self.arith = get_arithmetic(cfg.arithmetic)
        enc = self.arith.encode
        self.interval = (enc(cfg.safety_interval[0]), enc(cfg.safety_interval[1]))
        self.behaviors: dict[int, AttackBehavior] = dict(cfg.attacks)
        self.normal = [i for i in self.g.nodes if i not in self.behaviors]
        # convergence only counts once every scheduled misbehavior has happened
        last = [-1]
        for b in self.behaviors.values():
            if b.kind != "honest-shadow":
                last.append(b.k_on)
                last.extend(k for k in b.overrides if k >= b.k_on)
                last.extend(k for k, _ in b.fake_reports if k >= b.k_on)
        self.settle = max(last) + 1
        self.record = RunRecord(self.n, cfg.scheme, cfg.arithmetic, cfg.attackers)
        self.safe_lo = self.safe_hi = None

    def active(self, i: int, k: int) -> bool:
        b = self.behaviors.get(i)
        return b is not None and b.active(k)

    def emit(self, i: int, honest: InformationSet, k: int) -> InformationSet | None:
        b = self.behaviors.get(i)
        if b is None:
            return honest
        view = WorldView(k, i, self.g, self.interval, self.arith.encode)
        msg = apply_attack(b, honest, view)
        if msg is None or msg.content() != honest.content():
            self.deviated(i, k)
        return msg

    def deviated(self, i: int, k: int) -> None:
        d = self.record.deviation_rounds
        if i not in d or k < d[i]:
            d[i] = k

    def observe(self, k: int, row: tuple) -> bool:
        """Record round-k values; True when the run should stop."""
        rec, cfg = self.record, self.cfg
        rec.raw_values.append(row)
        if k == 0:
            lo, hi = self.interval
            inside = [v for v in row if v is not None and lo <= v <= hi]
            self.safe_lo = min(inside) if inside else lo
            self.safe_hi = max(inside) if inside else hi
            dec = self.arith.decode
            rec.safety_set = (dec(self.safe_lo), dec(self.safe_hi))
        vals = [row[i - 1] for i in self.normal]
        spread = self.arith.spread(vals) if vals else 0.0
        rec.final_spread = spread
        if any(not self.safe_lo <= v <= self.safe_hi for v in vals):
            rec.safety_ok = False
            rec.outcome = "safety-violated"
            return True
        if k >= self.settle and spread <= cfg.convergence_epsilon:
            if rec.rounds_to_converge is None:
                rec.rounds_to_converge = k
                rec.outcome = "converged"
            if cfg.stop_on_convergence:
                return True
        elif rec.rounds_to_converge is not None and k >= self.settle:
            # spread grew again after the first convergence round
            rec.rounds_to_converge = None
            rec.outcome = "diverged"
        if k >= cfg.max_rounds:
            if rec.outcome != "converged" and rec.condition_events:
                rec.outcome = "condition-violated"
            return True
        return False

    def flag(self, k: int, node: int, suspects: Iterable[int], source: str) -> None:
        for s in sorted(suspects):
            self.record.flag_events.append(FlagEvent(k + 1, node, s, source))


def run(cfg: RunConfig) -> RunRecord:
    """Simulate one configuration; raises ConfigError before round 0 when invalid."""
    cfg.validate()
    backend = cfg.backend
    if backend == "auto":
        fast = cfg.arithmetic == "fixed" and not cfg.keep_messages
        backend = "batched" if fast else "reference"
    if backend == "reference":
        return _run_reference(cfg)
    return _run_batched(cfg)


# -- reference backend -----------------------------------------------------------

def _lenient_update(st: AgentState) -> Any:
    """Update for nodes that skipped detection: silent neighbors are left out."""
    vals = {st.id: st.value}
    for j in st.neighbors - st.malicious_set:
        m = st.inbox.get(j)
        if m is not None:
            vals[j] = m.own_value
    return canonical_mean(vals[h] for h in sorted(vals))


def _run_reference(cfg: RunConfig) -> RunRecord:
    R = _Run(cfg)
    g, rec, scheme = R.g, R.record, cfg.scheme
    enc = R.arith.encode
    states = {i: AgentState(i, g, enc(cfg.initial_values[i - 1]), f=cfg.f, scheme=scheme,
                            safety_interval=R.interval,
                            label_scope=(verifiable_nodes(g, i, cfg.f)
                                         if scheme == "scheme2" else frozenset()))
              for i in g.nodes}
    msgs = {}
    for i, st in states.items():
        msgs[i] = R.emit(i, build_information_set(st, st.value), 0)
        if msgs[i] is not None and i in R.behaviors:
            st.value = msgs[i].own_value
    shared: set = set()
    prev_msgs = None
    k = 0
    while True:
        row = tuple(None if msgs[i] is None else msgs[i].own_value for i in g.nodes)
        if cfg.keep_messages:
            rec.messages.append(dict(msgs))
        if R.observe(k, row):
            break
        for i, st in states.items():
            st.prev_inbox = st.inbox
            st.inbox = {j: msgs[j] for j in g.in_neighbors(i)}
            st.round = k

        if scheme in DETECTING:
            before = {i: set(st.malicious_set) for i, st in states.items()}
            verdicts = []
            if scheme == "scheme1":
                reports = []
                for i, st in states.items():
                    if R.active(i, k):
                        continue
                    for v in algorithm1_detect(st, shared):
                        verdicts.append(v)
                        reports.append(Report(i, v.suspect, v))
                for i, b in R.behaviors.items():
                    if b.active(k):
                        for s in sorted(b.fake_reports_at(k)):
                            reports.append(Report(i, s, None))
                            R.deviated(i, k)
                valid, refuted = detection_share_oracle(
                    reports, g=g, round=k, known=frozenset(shared), current=msgs,
                    previous=prev_msgs, safety_interval=R.interval)
                shared |= valid | refuted
                for st in states.values():
                    st.malicious_set |= shared
            else:
                for i, st in states.items():
                    inbox = [(l, s) for l in sorted(g.in_neighbors(i)) if msgs[l] is not None
                             for s in sorted(msgs[l].reports)]
                    if R.active(i, k):
                        absorb_reports(st, inbox)
                        continue
                    verdicts.extend(algorithm2_detect(st, inbox))
                    rec.condition_events.extend((k, i, h) for h in st.undecided)
            detected = {(v.detector, v.suspect) for v in verdicts}
            rec.verdicts.extend(sorted(verdicts))
            for i, st in states.items():
                new = st.malicious_set - before[i]
                reported = set(st.reported) if scheme == "scheme2" else set()
                R.flag(k, i, {s for s in new if (i, s) in detected}, "detected")
                R.flag(k, i, {s for s in new if (i, s) not in detected and s in reported},
                       "reported")
                R.flag(k, i, {s for s in new if (i, s) not in detected and s not in reported},
                       "shared")
                st.reported = []

        new_values = {}
        for i, st in states.items():
            if scheme in DETECTING:
                new_values[i] = _lenient_update(st) if R.active(i, k) else normal_update(st)
            else:
                nbrs = {j: m.own_value for j, m in st.inbox.items() if m is not None}
                if scheme == "plain":
                    nbrs[i] = st.value
                    new_values[i] = canonical_mean(nbrs[h] for h in sorted(nbrs))
                else:
                    new_values[i] = wmsr_update(st.value, nbrs, cfg.f)

        prev_msgs = msgs
        msgs = {}
        for i, st in states.items():
            honest = build_information_set(st, new_values[i])
            st.prev_value = st.value
            st.value = new_values[i]
            msgs[i] = R.emit(i, honest, k + 1)
            if msgs[i] is not None and i in R.behaviors:
                st.value = msgs[i].own_value
        k += 1
    rec.flag_events.sort()
    return rec


# -- batched backend ---------------------------------------------------------------

def _run_batched(cfg: RunConfig) -> RunRecord:
    R = _Run(cfg)
    g, rec, scheme, f = R.g, R.record, cfg.scheme, cfg.f
    n = g.n
    enc = R.arith.encode
    lo, hi = int(R.interval[0]), int(R.interval[1])

    IN = np.zeros((n + 1, n + 1), dtype=bool)          # IN[i, j]: j -> i
    for u, v in g.edges:
        IN[v, u] = True
    nbr_lists = [sorted(g.in_neighbors(i)) if i else [] for i in range(n + 1)]
    eye = np.eye(n + 1, dtype=bool)
    if scheme == "scheme2":
        SCOPE = np.zeros((n + 1, n + 1), dtype=bool)
        for i in g.nodes:
            SCOPE[i, list(verifiable_nodes(g, i, f))] = True
    att = sorted(R.behaviors)
    is_att = np.zeros(n + 1, dtype=bool)
    is_att[att] = True

    V = np.zeros(n + 1, dtype=np.int64)                # internal state values
    V[1:] = [int(enc(x)) for x in cfg.initial_values]
    A = np.zeros((n + 1, n + 1), dtype=bool)           # current malicious sets
    OWN = np.zeros((n + 1, n + 1), dtype=bool)         # own detections (scheme2 reports)
    OWN_snap = OWN.copy()

    out_lists = [sorted(g.out_neighbors(i)) if i else [] for i in range(n + 1)]
    in_sets = [g.in_neighbors(i) if i else frozenset() for i in range(n + 1)]

    def _silenced(i, k):
        """True when no node that runs detection in round k can still inspect i."""
        if scheme == "scheme1":
            return bool(shared[i])
        return all(A[o, i] or R.active(o, k) for o in out_lists[i])

    def honest_message(i, k, own, Xp, Pp, Vi, D_row, own_row):
        if k == 0:
            relays = {}
        else:
            relays = {j: (Fixed(int(Xp[j])) if Pp[j] else None) for j in nbr_lists[i]}
            relays[i] = Fixed(int(Vi))
        reports = frozenset(np.flatnonzero(own_row).tolist()) if scheme == "scheme2" else ()
        return InformationSet(i, k, Fixed(int(own)), relays,
                              frozenset(np.flatnonzero(D_row).tolist()), reports)

    # round-0 broadcast
    X = V.copy()
    P = np.ones(n + 1, dtype=bool)
    P[0] = False
    D = A.copy()
    dev_msgs: dict[int, InformationSet | None] = {}
    att_msgs: dict[int, InformationSet | None] = {}
    for i in att:
        honest = honest_message(i, 0, V[i], None, None, V[i], D[i], OWN[i])
        msg = R.emit(i, honest, 0)
        att_msgs[i] = msg
        if msg is None:
            P[i] = False
            dev_msgs[i] = None
        else:
            X[i] = V[i] = int(msg.own_value)
            if msg.content() != honest.content() or R.active(i, 0):
                dev_msgs[i] = msg
    Xp = Pp = Vp = None
    prev_archive = None
    shared = np.zeros(n + 1, dtype=bool)
    k = 0
    while True:
        row = tuple(Fixed(int(X[i])) if P[i] else None for i in range(1, n + 1))
        if R.observe(k, row):
            break

        def archive_msg(j, _k=k, _X=X, _P=P, _Xp=Xp, _Pp=Pp, _V=Vp, _D=D,
                        _OWN=OWN_snap, _att=att_msgs):
            if j in _att:
                return _att[j]
            return honest_message(j, _k, _X[j], _Xp, _Pp, _V[j] if _V is not None else None,
                                  _D[j], _OWN[j])

        if scheme in DETECTING:
            verifiers = np.array([not R.active(i, k) for i in range(n + 1)])
            verifiers[0] = False
            A_before = A.copy()
            reported_add = np.zeros_like(A)
            if scheme == "scheme1":
                A |= shared[None, :]
                A[0] = False
            else:
                REP = OWN_snap.copy()
                for i in att:
                    REP[i] = False
                    m = att_msgs[i]
                    if m is not None and m.reports:
                        REP[i, list(m.reports)] = True
                REP[~P] = False
                w = (IN & ~A & P[None, :]).astype(np.float64)
                counts = w @ REP.astype(np.float64)
                add = (counts >= f + 1) & ~A & ~eye
                add[0] = False
                A |= add
                reported_add = add
            known = A.copy()

            if k > 0:
                def tval(h):
                    return Fixed(int(Xp[h])) if Pp[h] else None

            # two-hop votes touched by deviant copies (scheme2)
            votes: dict = {}
            if scheme == "scheme2" and k > 0:
                affected = set()
                for l, m in dev_msgs.items():
                    if m is None:
                        continue
                    topo = g.in_neighbors(l)
                    bad_h = [h for h, v in m.neighbor_values.items()
                             if h in topo and v != tval(h)]
                    if not bad_h:
                        continue
                    for i in g.out_neighbors(l):
                        if not verifiers[i] or known[i, l]:
                            continue
                        for h in bad_h:
                            if h != i and not IN[i, h]:
                                affected.add((i, h))
                for i, h in sorted(affected):
                    copies = []
                    for l in nbr_lists[i]:
                        if known[i, l] or not P[l] or not IN[l, h]:
                            continue
                        m = dev_msgs.get(l, 0)
                        if m == 0:
                            copies.append(tval(h))
                        elif h in m.neighbor_values:
                            copies.append(m.neighbor_values[h])
                    res = majority_vote(copies)
                    votes[(i, h)] = res
                    if res is UNDECIDED and SCOPE[i, h]:
                        rec.condition_events.append((k, i, h))

            verdicts = []
            # honest-path messages
            cand = IN & ~known & verifiers[:, None] & P[None, :]
            for j in dev_msgs:
                cand[:, j] = False
            if cand.any():
                if scheme == "scheme1":
                    bad1 = np.zeros_like(cand)
                    if D.any() or known.any():
                        for j in np.flatnonzero(cand.any(axis=0)):
                            bad1[:, j] = (known != D[j][None, :]).any(axis=1)
                else:
                    if D.any() or known.any():
                        NA = (IN & D).astype(np.float64)
                        NnA = (IN & ~D).astype(np.float64)
                        mis = NA @ (SCOPE & ~known).T.astype(np.float64) \
                            + NnA @ (SCOPE & known).T.astype(np.float64)
                        bad1 = (mis > 0).T
                    else:
                        bad1 = np.zeros_like(cand)
                fails = {}
                for i, j in zip(*np.nonzero(cand & bad1)):
                    fails[(int(i), int(j))] = Reason.BAD_IDENTITY_CLAIM
                if k == 0:
                    out = (X < lo) | (X > hi)
                    for i, j in zip(*np.nonzero(cand & ~bad1 & out[None, :])):
                        fails[(int(i), int(j))] = Reason.OUT_OF_SAFETY_INTERVAL
                else:
                    for (i, h), res in votes.items():
                        if res is UNDECIDED or res == tval(h):
                            continue
                        for j in g.out_neighbors(h):
                            if cand[i, j] and not bad1[i, j] and (i, j) not in fails:
                                fails[(i, j)] = Reason.RELAYED_VALUE_MISMATCH
                for (i, j), reason in fails.items():
                    verdicts.append(DetectionVerdict(i, j, k, reason))

            # deviant messages: full inspection per verifier
            step_cache = {}
            corrupt = {}     # sender -> relayed entries that differ from the truth
            votes_by = {}
            for (i, h), res in votes.items():
                votes_by.setdefault(i, {})[h] = res

            def step3_ok(i, m, bad):
                # Same answer as relayed_values_ok against i's check values: a
                # truthful entry can only clash with i's own value or a vote.
                own_prev = Fixed(int(Vp[i]))
                mine = votes_by.get(i, {})
                nbrs = in_sets[i]
                for h, v in bad:
                    if h == i:
                        if own_prev != v:
                            return False
                    elif h in nbrs:
                        return False
                    elif scheme == "scheme2":
                        if h in mine:
                            res = mine[h]
                            if res is not UNDECIDED and res != v:
                                return False
                        elif _has_copy(i, h, known, P, IN, nbr_lists, dev_msgs):
                            return False
                nv = m.neighbor_values
                if i in nv and nv[i] == tval(i) and own_prev != nv[i]:
                    return False
                for h, res in mine.items():
                    if (h != i and h not in nbrs and h in nv and nv[h] == tval(h)
                            and res is not UNDECIDED and res != nv[h]):
                        return False
                return True

            for j, m in sorted(dev_msgs.items()):
                for i in g.out_neighbors(j):
                    if not verifiers[i] or known[i, j]:
                        continue
                    if m is None:
                        verdicts.append(DetectionVerdict(i, j, k, Reason.MISSING_MESSAGE))
                        continue
                    kn = frozenset(np.flatnonzero(known[i]).tolist())
                    scope = (None if scheme == "scheme1"
                             else frozenset(np.flatnonzero(SCOPE[i]).tolist()))
                    if not identity_claims_ok(m, g, kn, scope):
                        reason = Reason.BAD_IDENTITY_CLAIM
                    else:
                        if (j, "ids") not in step_cache:
                            step_cache[(j, "ids")] = neighbor_ids_ok(m, g, k)
                        if not step_cache[(j, "ids")]:
                            reason = Reason.BAD_NEIGHBOR_IDS
                        elif k == 0:
                            ok = m.own_value is not None and lo <= m.own_value <= hi
                            reason = None if ok else Reason.OUT_OF_SAFETY_INTERVAL
                        else:
                            if j not in corrupt:
                                corrupt[j] = [(h, v) for h, v in m.neighbor_values.items()
                                              if v != tval(h)]
                            if not step3_ok(i, m, corrupt[j]):
                                reason = Reason.RELAYED_VALUE_MISMATCH
                            else:
                                if (j, "upd") not in step_cache:
                                    step_cache[(j, "upd")] = update_rule_ok(m, g)
                                reason = (None if step_cache[(j, "upd")]
                                          else Reason.UPDATE_RULE_VIOLATION)
                    if reason is not None:
                        verdicts.append(DetectionVerdict(i, j, k, reason))
            verdicts.sort()
            rec.verdicts.extend(verdicts)
            detected = np.zeros_like(A)
            for v in verdicts:
                detected[v.detector, v.suspect] = True
            A |= detected
            OWN |= detected

            if scheme == "scheme1":
                reports = [Report(v.detector, v.suspect, v) for v in verdicts]
                for i in att:
                    b = R.behaviors[i]
                    if b.active(k):
                        for s in sorted(b.fake_reports_at(k)):
                            reports.append(Report(i, s, None))
                            R.deviated(i, k)
                if reports:
                    involved = {r.suspect for r in reports}
                    for r in reports:
                        involved |= g.in_neighbors(r.reporter) | {r.reporter}
                    cur = {j: archive_msg(j) for j in involved}
                    prev = ({j: prev_archive(j) for j in involved} if k > 0 else None)
                    valid, refuted = detection_share_oracle(
                        reports, g=g, round=k,
                        known=frozenset(np.flatnonzero(shared).tolist()), current=cur,
                        previous=prev, safety_interval=R.interval)
                    for s in valid | refuted:
                        shared[s] = True
                A |= shared[None, :]
                A[0] = False

            new = A & ~A_before
            for i, s in zip(*np.nonzero(new)):
                src = ("detected" if detected[i, s]
                       else "reported" if reported_add[i, s] else "shared")
                rec.flag_events.append(FlagEvent(k + 1, int(i), int(s), src))

        # update
        Xz = np.where(P, X, 0)
        if scheme in DETECTING:
            W = IN & ~A & P[None, :]
        else:
            W = IN & P[None, :]
        total = V + W.astype(np.int64) @ Xz
        count = W.sum(axis=1) + 1
        if scheme == "wmsr" and f > 0:
            big = np.iinfo(np.int64).max
            above = W & (X[None, :] > V[:, None])
            below = W & (X[None, :] < V[:, None])
            top = np.sort(np.where(above, -X[None, :], big), axis=1)
            bot = np.sort(np.where(below, X[None, :], big), axis=1)
            na = np.minimum(above.sum(axis=1), f)
            nb = np.minimum(below.sum(axis=1), f)
            ctop = np.concatenate([np.zeros((n + 1, 1), np.int64),
                                   np.cumsum(np.where(top == big, 0, top), axis=1)], axis=1)
            cbot = np.concatenate([np.zeros((n + 1, 1), np.int64),
                                   np.cumsum(np.where(bot == big, 0, bot), axis=1)], axis=1)
            rows = np.arange(n + 1)
            total = total + ctop[rows, na] - cbot[rows, nb]
            count = count - na - nb
        newV = total // count

        # next broadcast
        OWN_snap = OWN.copy()
        D = A.copy()
        Xp, Pp, Vp = X, P, V
        prev_archive = archive_msg
        X = newV.copy()
        V = newV.copy()
        P = np.ones(n + 1, dtype=bool)
        P[0] = False
        dev_msgs = {}
        att_msgs = {}
        for i in att:
            b = R.behaviors[i]
            if (b.kind == "static-value" and b.active(k + 1)
                    and i in rec.deviation_rounds):
                if scheme not in DETECTING:
                    # only the broadcast value matters to these update rules
                    X[i] = V[i] = int(enc(b.constant))
                    continue
                if _silenced(i, k + 1):
                    # every verifier ignores the content; value and reports still count
                    msg = InformationSet(i, k + 1, enc(b.constant),
                                         reports=b.fake_reports_at(k + 1))
                    att_msgs[i] = dev_msgs[i] = msg
                    X[i] = V[i] = int(msg.own_value)
                    continue
            honest =honest_message(i, k + 1, newV[i], Xp, Pp, Vp[i], D[i], OWN_snap[i])
            msg = R.emit(i, honest, k + 1)
            att_msgs[i] = msg
            if msg is None:
                P[i] = False
                dev_msgs[i] = None
            else:
                X[i] = V[i] = int(msg.own_value)
                if msg.content() != honest.content() or R.active(i, k + 1):
                    dev_msgs[i] = msg
        k += 1
    rec.flag_events.sort()
    return rec


def _has_copy(i, h, known, P, IN, nbr_lists, dev_msgs) -> bool:
    """Whether i gets any usable copy of x_h from an unflagged relayer.

    Pairs with a deviant copy that differs from the truth are voted
    explicitly, so an unvoted pair with a copy has the true value as its
    check value.
    """
    for l in nbr_lists[i]:
        if known[i, l] or not P[l] or not IN[l, h]:
            continue
        m = dev_msgs.get(l, 0)
        if m == 0 or h in m.neighbor_values:
            return True
    return False
