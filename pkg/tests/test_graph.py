import itertools
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twohop.graph import (
    DirectedGraph,
    EdgeListParseError,
    GraphError,
    InstanceTooLarge,
    capped_connectivity,
    check_scheme1_condition,
    check_scheme2_condition,
    complete_graph,
    complete_minus_in_edges,
    cycle_graph,
    full_access_nodes,
    has_k_connected_rooted_spanning_trees,
    has_rooted_spanning_tree,
    is_connected,
    is_k_connected,
    is_rs_robust,
    layered_graph,
    parse_edge_list,
    path_graph,
    read_edge_list,
    remove_edges,
    two_hop_paths,
    vertex_connectivity,
    write_edge_list,
)


def random_graph(rng, n, undirected, p=None):
    p = rng.uniform(0.1, 0.9) if p is None else p
    pairs = itertools.combinations if undirected else itertools.permutations
    edges = [e for e in pairs(range(1, n + 1), 2) if rng.random() < p]
    return DirectedGraph.from_edges(n, edges, undirected=undirected)


def to_nx(g):
    h = nx.Graph() if g.undirected else nx.DiGraph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(g.edges)
    return h


directed_3_cycle = cycle_graph(3, directed=True)


# -- construction ----------------------------------------------------------------

def test_in_neighbors():
    assert complete_graph(9).in_neighbors(2) == frozenset({1, 3, 4, 5, 6, 7, 8, 9})
    g = DirectedGraph.from_edges(2, [(1, 2)])
    assert g.in_neighbors(2) == {1}
    assert g.in_neighbors(1) == frozenset()
    with pytest.raises(GraphError):
        g.in_neighbors(3)


@pytest.mark.parametrize("edges", [[(0, 1)], [(1, 4)], [(2, 2)]])
def test_bad_edges_rejected(edges):
    with pytest.raises(GraphError):
        DirectedGraph.from_edges(3, edges)


def test_undirected_needs_both_directions():
    with pytest.raises(GraphError):
        DirectedGraph(2, frozenset({(1, 2)}), undirected=True)


def test_remove_edges_keeps_flag_only_when_symmetric():
    g = complete_graph(4)
    assert remove_edges(g, [(1, 2), (2, 1)]).undirected
    assert not remove_edges(g, [(1, 2)]).undirected


def test_layered_graph_shape():
    g = layered_graph(3, 3)
    assert g.n == 9 and len(g.edges) == 2 * 2 * 9
    assert g.in_neighbors(4) == {1, 2, 3, 7, 8, 9}


def test_adjacency_matrix():
    g = DirectedGraph.from_edges(3, [(1, 3)])
    m = g.adjacency_matrix()
    assert m[0, 2] and m.sum() == 1


# -- connectivity ------------------------------------------------------------------

@pytest.mark.parametrize("g, kappa", [
    (complete_graph(9), 8),
    (path_graph(3), 1),
    (cycle_graph(4), 2),
    (DirectedGraph.from_edges(4, [(1, 2), (3, 4)], undirected=True), 0),
])
def test_vertex_connectivity_examples(g, kappa):
    assert vertex_connectivity(g) == kappa
    assert vertex_connectivity(g, method="flow") == kappa


@pytest.mark.parametrize("n", range(2, 10))
def test_complete_graph_connectivity(n):
    assert vertex_connectivity(complete_graph(n)) == n - 1


def test_vertex_connectivity_errors():
    with pytest.raises(GraphError):
        vertex_connectivity(complete_graph(1))
    with pytest.raises(GraphError):
        vertex_connectivity(directed_3_cycle)


def test_connectivity_routes_agree_with_networkx():
    rng = random.Random(1)
    for _ in range(150):
        g = random_graph(rng, rng.randint(2, 11), True)
        expected = nx.node_connectivity(to_nx(g))
        assert vertex_connectivity(g, method="enumerate") == expected
        assert vertex_connectivity(g, method="flow") == expected


def test_flow_route_on_larger_geometric_like_graphs():
    rng = random.Random(2)
    for _ in range(5):
        g = random_graph(rng, 40, True, p=rng.uniform(0.15, 0.5))
        assert vertex_connectivity(g) == nx.node_connectivity(to_nx(g))


def test_capped_connectivity():
    rng = random.Random(3)
    for _ in range(150):
        g = random_graph(rng, rng.randint(2, 10), True)
        kappa = vertex_connectivity(g, method="enumerate")
        for limit in range(0, g.n + 1):
            assert capped_connectivity(g, limit) == min(kappa, limit)
            assert is_k_connected(g, limit) == (kappa >= limit)


# -- rooted spanning trees -----------------------------------------------------

def rooted_tree_oracle(g, k):
    h = to_nx(g).to_directed()
    for cut in itertools.combinations(g.nodes, k - 1):
        rest = h.subgraph(set(g.nodes) - set(cut))
        if not any(len(nx.descendants(rest, v)) == rest.number_of_nodes() - 1 for v in rest):
            return False
    return True


def test_rooted_trees_examples():
    assert has_k_connected_rooted_spanning_trees(complete_graph(5), 4)
    assert has_k_connected_rooted_spanning_trees(directed_3_cycle, 1)
    # removing one node of a directed 3-cycle leaves one edge u -> v, rooted at u
    assert has_k_connected_rooted_spanning_trees(directed_3_cycle, 2)
    assert rooted_tree_oracle(directed_3_cycle, 2)
    assert not has_k_connected_rooted_spanning_trees(path_graph(4), 2)


def test_rooted_trees_errors():
    with pytest.raises(GraphError):
        has_k_connected_rooted_spanning_trees(complete_graph(3), 3)
    with pytest.raises(InstanceTooLarge):
        has_k_connected_rooted_spanning_trees(complete_graph(18), 2)


def test_rooted_trees_match_oracle():
    rng = random.Random(4)
    for _ in range(200):
        g = random_graph(rng, rng.randint(2, 8), rng.random() < 0.3, p=rng.uniform(0.1, 0.6))
        for k in range(1, g.n):
            assert has_k_connected_rooted_spanning_trees(g, k) == rooted_tree_oracle(g, k)


def test_rooted_spanning_tree_and_strong_connectivity():
    star_out = DirectedGraph.from_edges(4, [(1, 2), (1, 3), (1, 4)])
    assert has_rooted_spanning_tree(star_out)
    assert not is_connected(star_out)
    assert not has_rooted_spanning_tree(DirectedGraph.from_edges(3, [(2, 1), (3, 1)]))
    assert is_connected(directed_3_cycle)


# -- (r, s)-robustness -------------------------------------------------------------

def test_robustness_examples():
    assert is_rs_robust(complete_graph(9), 4, 4)[0]
    ok, witness = is_rs_robust(directed_3_cycle, 2, 1)
    assert not ok
    assert witness.subset_one and witness.subset_two
    assert not witness.subset_one & witness.subset_two


def test_robustness_errors():
    with pytest.raises(ValueError):
        is_rs_robust(complete_graph(3), 1, 4)
    with pytest.raises(ValueError):
        is_rs_robust(complete_graph(3), 0, 1)
    with pytest.raises(InstanceTooLarge):
        is_rs_robust(complete_graph(17), 1, 1)
    assert is_rs_robust(complete_graph(17), 1, 1, cap=17)[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**21 - 1))
def test_one_robust_iff_connected(n, bits):
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    g = DirectedGraph.from_edges(n, [p for k, p in enumerate(pairs) if bits >> k & 1], True)
    assert is_rs_robust(g, 1, 1)[0] == is_connected(g)


def test_robust_implies_connected():
    rng = random.Random(5)
    for _ in range(200):
        g = random_graph(rng, rng.randint(2, 7), True)
        for f in range(0, 3):
            if f + 1 <= g.n and is_rs_robust(g, f + 1, f + 1)[0]:
                assert vertex_connectivity(g) >= f + 1


# -- two-hop structure ---------------------------------------------------------------

def test_two_hop_paths():
    assert two_hop_paths(complete_graph(4), 1, 2) == {3, 4}
    assert two_hop_paths(DirectedGraph.from_edges(3, [(1, 3), (3, 2)]), 1, 2) == {3}
    assert two_hop_paths(DirectedGraph.from_edges(2, [(1, 2)]), 1, 2) == frozenset()
    with pytest.raises(GraphError):
        two_hop_paths(complete_graph(3), 1, 1)


def test_two_hop_paths_are_common_neighbors_when_undirected():
    rng = random.Random(6)
    g = random_graph(rng, 12, True, p=0.5)
    for u, v in g.edges:
        assert two_hop_paths(g, u, v) == g.in_neighbors(u) & g.in_neighbors(v)


def test_scheme1_condition():
    assert check_scheme1_condition(complete_graph(5), 3) == (True, [])
    ok, bad = check_scheme1_condition(cycle_graph(4), 2)
    assert not ok and bad == [(1, 2), (1, 4), (2, 3), (3, 4)]
    rng = random.Random(7)
    assert check_scheme1_condition(random_graph(rng, 9, True), 1)[0]
    with pytest.raises(GraphError):
        check_scheme1_condition(directed_3_cycle, 1)


def test_scheme2_condition():
    for n, f in itertools.product(range(2, 8), range(1, 4)):
        assert check_scheme2_condition(complete_graph(n), f)[0]
    assert check_scheme2_condition(layered_graph(3, 3), 1)[0]
    assert not check_scheme2_condition(layered_graph(3, 2), 1)[0]
    ok, bad = check_scheme2_condition(directed_3_cycle, 1)
    assert not ok and (1, 3, 2) in bad


def test_full_access_nodes():
    assert full_access_nodes(complete_graph(9)) == set(range(1, 10))
    assert full_access_nodes(complete_minus_in_edges(9, 1, (2, 3, 4, 5, 6))) == set(range(2, 10))
    assert full_access_nodes(DirectedGraph(3, frozenset())) == frozenset()


# -- edge-list files ---------------------------------------------------------------

def test_edge_list_round_trip(tmp_path):
    for g in (complete_graph(4), directed_3_cycle, DirectedGraph(3, frozenset()),
              complete_minus_in_edges(6, 1, (2, 3))):
        path = tmp_path / "g.txt"
        write_edge_list(g, path)
        assert read_edge_list(path) == g


def test_edge_list_parsing():
    g = parse_edge_list("# comment\ndirected 3\n1 2\n")
    assert g.edges == {(1, 2)} and not g.undirected
    g = parse_edge_list("undirected 3\n1 2\n  \n# x\n2 3\n")
    assert g.edges == {(1, 2), (2, 1), (2, 3), (3, 2)}


@pytest.mark.parametrize("text, line", [
    ("directed 3\n0 2\n", 2),
    ("directed 3\n1 2\n1 2\n", 3),
    ("undirected 3\n1 2\n2 1\n", 3),
    ("directed 3\n1 2 3\n", 2),
    ("directed 3\n1 x\n", 2),
    ("directed 3\n1 1\n", 2),
    ("graph 3\n", 1),
    ("directed 0\n", 1),
    ("# only a comment\n", None),
])
def test_edge_list_errors_carry_line(text, line):
    with pytest.raises(EdgeListParseError) as err:
        parse_edge_list(text)
    assert err.value.line == line
