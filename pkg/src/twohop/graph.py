"""Directed graph type, structural predicates and edge-list I/O.

Node ids are 1-based. An edge ``(j, i)`` means node ``i`` receives
information from node ``j``; ``j`` is then an in-neighbor of ``i``.

The exhaustive predicates (`is_rs_robust`, `has_k_connected_rooted_spanning_trees`
and the enumeration route of `vertex_connectivity`) are exponential in the
node count and refuse instances above a configurable cap instead of
approximating.
"""

from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np

DEFAULT_NODE_CAP = 16


class GraphError(ValueError):
    """Invalid graph construction or out-of-range node id."""


class InstanceTooLarge(ValueError):
    """Raised when an exhaustive check is requested above its node cap."""


class EdgeListParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    edges: frozenset
    undirected: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        for u, v in edges:
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise GraphError(f"edge ({u}, {v}) outside node range 1..{self.n}")
            if u == v:
                raise GraphError(f"self-loop at node {u}")
        if self.undirected:
            for u, v in edges:
                if (v, u) not in edges:
                    raise GraphError(f"undirected graph missing reverse of ({u}, {v})")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable, undirected: bool = False) -> "DirectedGraph":
        """Build a graph; with ``undirected`` each pair is added in both directions."""
        edges = list(edges)
        if undirected:
            edges = edges + [(v, u) for u, v in edges]
        return cls(n, frozenset(edges), undirected)

    @property
    def nodes(self) -> range:
        return range(1, self.n + 1)

    @cached_property
    def _in(self) -> tuple:
        sets = [set() for _ in range(self.n + 1)]
        for u, v in self.edges:
            sets[v].add(u)
        return tuple(frozenset(s) for s in sets)

    @cached_property
    def _out(self) -> tuple:
        sets = [set() for _ in range(self.n + 1)]
        for u, v in self.edges:
            sets[u].add(v)
        return tuple(frozenset(s) for s in sets)

    def _check(self, i: int) -> None:
        if not 1 <= i <= self.n:
            raise GraphError(f"node {i} outside 1..{self.n}")

    def in_neighbors(self, i: int) -> frozenset:
        self._check(i)
        return self._in[i]

    def out_neighbors(self, i: int) -> frozenset:
        self._check(i)
        return self._out[i]

    def in_degree(self, i: int) -> int:
        return len(self.in_neighbors(i))

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def without_nodes(self, removed: Iterable[int]) -> tuple[list[int], dict]:
        """Remaining node list and in-adjacency after deleting ``removed``."""
        removed = set(removed)
        keep = [v for v in self.nodes if v not in removed]
        adj = {v: self._in[v] - removed for v in keep}
        return keep, adj

    def adjacency_matrix(self) -> np.ndarray:
        """Boolean matrix ``M`` with ``M[u-1, v-1]`` true iff ``(u, v)`` is an edge."""
        m = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            e = np.array(sorted(self.edges)) - 1
            m[e[:, 0], e[:, 1]] = True
        return m


# -- constructors -----------------------------------------------------------

def complete_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, frozenset((u, v) for u in range(1, n + 1)
                                      for v in range(1, n + 1) if u != v), True)


def cycle_graph(n: int, directed: bool = False) -> DirectedGraph:
    pairs = [(i, i % n + 1) for i in range(1, n + 1)]
    return DirectedGraph.from_edges(n, pairs, undirected=not directed)


def path_graph(n: int) -> DirectedGraph:
    return DirectedGraph.from_edges(n, [(i, i + 1) for i in range(1, n)], undirected=True)


def layered_graph(layers: int, width: int) -> DirectedGraph:
    """Layers of ``width`` nodes, complete bipartite links between adjacent layers."""
    groups = [range(l * width + 1, (l + 1) * width + 1) for l in range(layers)]
    pairs = [(u, v) for a, b in zip(groups, groups[1:]) for u in a for v in b]
    return DirectedGraph.from_edges(layers * width, pairs, undirected=True)


def remove_edges(g: DirectedGraph, edges: Iterable) -> DirectedGraph:
    """Drop directed edges; the result is marked directed unless still symmetric."""
    remaining = g.edges - frozenset(edges)
    symmetric = all((v, u) in remaining for u, v in remaining)
    return DirectedGraph(g.n, remaining, g.undirected and symmetric)


def complete_minus_in_edges(n: int, node: int, sources: Iterable[int]) -> DirectedGraph:
    return remove_edges(complete_graph(n), [(s, node) for s in sources])


# -- reachability helpers ---------------------------------------------------

def _reach(start: int, out: dict) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in out[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def _undirected_connected(keep: list[int], g: DirectedGraph, removed: set) -> bool:
    if len(keep) <= 1:
        return True
    nbrs = {v: (g._in[v] | g._out[v]) - removed for v in keep}
    return len(_reach(keep[0], nbrs)) == len(keep)


def has_rooted_spanning_tree(g: DirectedGraph, removed: Iterable[int] = ()) -> bool:
    """True iff, after deleting ``removed``, some node reaches every other node."""
    removed = set(removed)
    keep = [v for v in g.nodes if v not in removed]
    if len(keep) <= 1:
        return True
    out = {v: g._out[v] - removed for v in keep}
    # The last node to finish in a DFS over all nodes is the only possible root.
    seen, order = set(), []
    for s in keep:
        if s in seen:
            continue
        stack = [(s, iter(out[s]))]
        seen.add(s)
        while stack:
            u, it = stack[-1]
            nxt = next((w for w in it if w not in seen), None)
            if nxt is None:
                stack.pop()
                order.append(u)
            else:
                seen.add(nxt)
                stack.append((nxt, iter(out[nxt])))
    return len(_reach(order[-1], out)) == len(keep)


def is_connected(g: DirectedGraph) -> bool:
    """Strong connectivity (plain connectivity for undirected graphs)."""
    out = {v: g._out[v] for v in g.nodes}
    inn = {v: g._in[v] for v in g.nodes}
    return len(_reach(1, out)) == g.n and len(_reach(1, inn)) == g.n


# -- connectivity -----------------------------------------------------------

def _split_network(g: DirectedGraph):
    """Unit-capacity node-split network: v_in = 2(v-1), v_out = 2(v-1)+1."""
    from scipy.sparse import csr_matrix

    rows, cols = [], []
    for v in range(g.n):
        rows.append(2 * v)
        cols.append(2 * v + 1)
    for u, v in sorted(g.edges):
        rows.append(2 * (u - 1) + 1)
        cols.append(2 * (v - 1))
    cap = np.ones(len(rows), dtype=np.int32)
    cap[g.n:] = g.n
    return csr_matrix((cap, (rows, cols)), shape=(2 * g.n, 2 * g.n))


def _local_vertex_connectivity(g: DirectedGraph, s: int, t: int, net=None) -> int:
    """Max number of internally vertex-disjoint s-t paths for non-adjacent s, t."""
    from scipy.sparse.csgraph import maximum_flow

    if net is None:
        net = _split_network(g)
    return int(maximum_flow(net, 2 * (s - 1) + 1, 2 * (t - 1)).flow_value)


def _connectivity_by_enumeration(g: DirectedGraph) -> int:
    for size in range(0, g.n - 1):
        for cut in itertools.combinations(g.nodes, size):
            removed = set(cut)
            keep = [v for v in g.nodes if v not in removed]
            if not _undirected_connected(keep, g, removed):
                return size
    return g.n - 1


def _connectivity_by_flow(g: DirectedGraph, limit: int | None = None) -> int:
    """Even's scheme: some minimum separator misses one of the first k+1 nodes.

    With ``limit`` the search stops once connectivity is known to be at
    least ``limit`` and returns ``limit``.
    """
    best = min(len(g._in[v]) for v in g.nodes)
    if limit is not None:
        best = min(best, limit)
    net = _split_network(g)
    adj = g.adjacency_matrix().astype(np.int32)
    # common neighbors are disjoint two-hop paths: a lower bound on the local value
    common = adj @ adj
    i = 1
    while i <= best:
        for j in range(i + 1, g.n + 1):
            if not g.has_edge(i, j) and common[i - 1, j - 1] < best:
                best = min(best, _local_vertex_connectivity(g, i, j, net))
                if best < i:
                    break
        i += 1
    return best


def capped_connectivity(g: DirectedGraph, limit: int) -> int:
    """min(kappa(G), limit) for an undirected graph; cheaper than kappa for small limits."""
    if limit <= 0:
        return 0
    if g.n < 2:
        return 0
    if not _undirected_connected(list(g.nodes), g, set()):
        return 0
    return min(_connectivity_by_flow(g, limit=limit), g.n - 1)


def is_k_connected(g: DirectedGraph, k: int) -> bool:
    """kappa(G) >= k for an undirected graph, without computing kappa exactly."""
    if k <= 0:
        return True
    if g.n < k + 1:
        return False
    if k == 1:
        return _undirected_connected(list(g.nodes), g, set())
    return _connectivity_by_flow(g, limit=k) >= k


def vertex_connectivity(g: DirectedGraph, method: str = "auto",
                        cap: int = DEFAULT_NODE_CAP) -> int:
    """kappa(G) of an undirected graph.

    ``method`` is ``"enumerate"``, ``"flow"`` or ``"auto"`` (enumeration up to
    ``cap`` nodes, max-flow above).
    """
    if g.n < 2:
        raise GraphError("vertex connectivity needs at least two nodes")
    if not g.undirected:
        raise GraphError("vertex connectivity is defined here for undirected graphs")
    if method == "auto":
        method = "enumerate" if g.n <= cap else "flow"
    if method == "enumerate":
        return _connectivity_by_enumeration(g)
    if method == "flow":
        return _connectivity_by_flow(g)
    raise ValueError(f"unknown method {method!r}")


def has_k_connected_rooted_spanning_trees(g: DirectedGraph, k: int,
                                          cap: int = DEFAULT_NODE_CAP) -> bool:
    """No set of k-1 nodes whose removal leaves a digraph without a rooted spanning tree."""
    if k < 1:
        raise ValueError("k must be positive")
    if g.n <= k:
        raise GraphError(f"need more than k={k} nodes, graph has {g.n}")
    if g.n > cap:
        raise InstanceTooLarge(f"{g.n} nodes exceeds enumeration cap {cap}")
    return all(has_rooted_spanning_tree(g, removed)
               for removed in itertools.combinations(g.nodes, k - 1))


# -- (r, s)-robustness ------------------------------------------------------

class RobustnessWitness(NamedTuple):
    subset_one: frozenset
    subset_two: frozenset
    reached_one: frozenset
    reached_two: frozenset


def _mask_to_set(mask: int) -> frozenset:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def is_rs_robust(g: DirectedGraph, r: int, s: int,
                 cap: int = DEFAULT_NODE_CAP) -> tuple[bool, RobustnessWitness | None]:
    """Exhaustive (r, s)-robustness check with a violating witness on failure.

    For every node subset S the set X(S) of members with at least ``r``
    in-neighbors outside S is tabulated over all 2^n bitmasks. A subset is
    *open* when X(S) != S. A subset-minimum transform then gives, for each mask,
    the smallest |X(V2)| over open nonempty V2 inside it, so the pair search
    is O(n 2^n) instead of O(3^n). Memory and time are exponential in n;
    instances above ``cap`` nodes are refused.
    """
    if r < 1 or s < 1:
        raise ValueError("r and s must be positive")
    if s > g.n:
        raise ValueError(f"s={s} exceeds node count {g.n}")
    if g.n > cap:
        raise InstanceTooLarge(f"{g.n} nodes exceeds enumeration cap {cap}")
    n = g.n
    full = (1 << n) - 1
    masks = np.arange(1 << n, dtype=np.int64)
    reached = np.zeros(1 << n, dtype=np.int64)
    for v in range(n):
        in_mask = sum(1 << (u - 1) for u in g._in[v + 1])
        outside = np.bitwise_count(in_mask & ~masks & full)
        member = (masks >> v) & 1
        reached |= ((outside >= r) & (member == 1)).astype(np.int64) << v
    size = np.bitwise_count(reached).astype(np.int64)
    open_ = (reached != masks)
    open_[0] = False

    inf = n + 1
    best = np.where(open_, size, inf)
    arg = np.where(open_, masks, -1)
    for v in range(n):
        bit = 1 << v
        with_bit = masks[(masks & bit) != 0]
        cand = best[with_bit ^ bit]
        better = cand < best[with_bit]
        best[with_bit[better]] = cand[better]
        arg[with_bit[better]] = arg[(with_bit ^ bit)[better]]

    comp = full ^ masks
    total = size + best[comp]
    bad = open_ & (total < s)
    if not bad.any():
        return True, None
    v1 = int(np.flatnonzero(bad)[0])
    v2 = int(arg[full ^ v1])
    return False, RobustnessWitness(_mask_to_set(v1), _mask_to_set(v2),
                                    _mask_to_set(int(reached[v1])),
                                    _mask_to_set(int(reached[v2])))


# -- two-hop structure ------------------------------------------------------

def two_hop_paths(g: DirectedGraph, source: int, target: int) -> frozenset:
    """Intermediate nodes m with edges source->m and m->target."""
    if source == target:
        raise GraphError("two-hop paths need distinct endpoints")
    return g.out_neighbors(source) & g.in_neighbors(target)


def check_scheme1_condition(g: DirectedGraph, f: int) -> tuple[bool, list]:
    """Every adjacent pair joined by at least f-1 two-hop paths."""
    if not g.undirected:
        raise GraphError("the common-neighbor condition applies to undirected graphs")
    need = f - 1
    bad = [(u, v) for u, v in sorted(g.edges)
           if u < v and len(g._out[u] & g._in[v]) < need]
    return not bad, bad


def check_scheme2_condition(g: DirectedGraph, f: int) -> tuple[bool, list]:
    """For i, j in N_i and h in N_j (h != i): h in N_i or >= 2f+1 two-hop paths h->i."""
    need = 2 * f + 1
    bad = []
    for i in g.nodes:
        n_i = g._in[i]
        for j in sorted(n_i):
            for h in sorted(g._in[j] - n_i - {i}):
                if len(g._out[h] & n_i) < need:
                    bad.append((i, j, h))
    return not bad, bad


def common_neighbor_floor(g: DirectedGraph) -> int | None:
    """Smallest two-hop path count over adjacent pairs (None without edges).

    The common-neighbor condition holds for ``f`` iff this is at least f-1.
    """
    counts = [len(g._out[u] & g._in[v]) for u, v in g.edges]
    return min(counts) if counts else None


def relay_support_floor(g: DirectedGraph) -> int | None:
    """Smallest two-hop path count h->i over triples that need voting.

    The voting condition holds for ``f`` iff this is at least 2f+1; None
    means no triple needs a vote and the condition holds for every f.
    """
    best = None
    for i in g.nodes:
        n_i = g._in[i]
        seen = set()
        for j in n_i:
            seen |= g._in[j]
        for h in seen - n_i - {i}:
            c = len(g._out[h] & n_i)
            if best is None or c < best:
                best = c
    return best


def full_access_nodes(g: DirectedGraph) -> frozenset:
    return frozenset(i for i in g.nodes if len(g._in[i]) == g.n - 1)


# -- edge-list files --------------------------------------------------------

def write_edge_list(g: DirectedGraph, path: str | os.PathLike) -> None:
    kind = "undirected" if g.undirected else "directed"
    lines = [f"{kind} {g.n}"]
    for u, v in sorted(g.edges):
        if g.undirected and u > v:
            continue
        lines.append(f"{u} {v}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_edge_list(text: str) -> DirectedGraph:
    header = None
    pairs = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2 or parts[0] not in ("directed", "undirected"):
                raise EdgeListParseError("expected 'directed <n>' or 'undirected <n>'", lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise EdgeListParseError(f"bad node count {parts[1]!r}", lineno) from None
            if n < 1:
                raise EdgeListParseError("node count must be positive", lineno)
            header = (parts[0] == "undirected", n)
            continue
        if len(parts) != 2:
            raise EdgeListParseError(f"expected '<u> <v>', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer node id in {line!r}", lineno) from None
        undirected, n = header
        if not (1 <= u <= n and 1 <= v <= n):
            raise EdgeListParseError(f"node id out of range 1..{n} in {line!r}", lineno)
        if u == v:
            raise EdgeListParseError(f"self-loop {line!r}", lineno)
        key = (min(u, v), max(u, v)) if undirected else (u, v)
        if key in seen:
            raise EdgeListParseError(f"duplicate edge {line!r}", lineno)
        seen.add(key)
        pairs.append((u, v))
    if header is None:
        raise EdgeListParseError("missing header line")
    undirected, n = header
    return DirectedGraph.from_edges(n, pairs, undirected=undirected)


def read_edge_list(path: str | os.PathLike) -> DirectedGraph:
    with open(path) as fh:
        return parse_edge_list(fh.read())
