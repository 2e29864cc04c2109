import numpy as np
import pytest

from twohop.geometric import (
    GeometricConfig,
    augment_with_relays,
    generate_geometric,
    graph_from_positions,
    relay_positions,
    sample_positions,
)


def test_radius_boundary_is_inclusive():
    pos = np.array([[10.0, 10.0], [40.0, 50.0]])      # distance 50
    assert not graph_from_positions(pos, 49).edges
    g = graph_from_positions(pos, 50)
    assert g.edges == {(1, 2), (2, 1)} and g.undirected


def test_same_seed_same_graph():
    cfg = GeometricConfig(node_count=50, radius=25, seed=4)
    g1, p1 = generate_geometric(cfg)
    g2, p2 = generate_geometric(cfg)
    assert g1 == g2 and np.array_equal(p1, p2)
    assert not np.array_equal(p1, sample_positions(GeometricConfig(node_count=50, seed=5)))


def test_positions_follow_the_documented_stream():
    cfg = GeometricConfig(node_count=3, seed=8)
    expected = np.random.default_rng(8).uniform(0, 100, 6).reshape(3, 2)
    assert np.array_equal(sample_positions(cfg), expected)


def test_relay_grid():
    pts = relay_positions(GeometricConfig(relay_count=16))
    expected = {(20.0 * x, 20.0 * y) for x in range(1, 5) for y in range(1, 5)}
    assert {tuple(p) for p in pts} == expected
    with pytest.raises(ValueError):
        GeometricConfig(relay_count=15)
    with pytest.raises(ValueError):
        GeometricConfig(relay_count=36)      # 120 lies outside the box


def test_no_relays_leaves_graph_unchanged():
    cfg = GeometricConfig(node_count=20, radius=20, seed=1)
    g, pos = generate_geometric(cfg)
    assert augment_with_relays(g, pos, cfg) is g


def test_relay_between_two_far_nodes():
    # relay at (40, 40); nodes 40 away on either side, 80 apart
    pos = np.array([[0.0, 40.0], [80.0, 40.0]])
    cfg = GeometricConfig(node_count=2, radius=45, relay_count=4, relay_grid_spacing=40,
                          relay_radius_bonus=27)
    g = graph_from_positions(pos, 45)
    assert not g.edges
    assert augment_with_relays(g, pos, cfg).edges == {(1, 2), (2, 1)}


def test_relay_edges_can_be_one_way():
    # node 1 is heard by the relay at (20, 20); node 2 only receives from it
    pos = np.array([[20.0, 25.0], [20.0, 80.0]])
    cfg = GeometricConfig(node_count=2, radius=10, relay_count=1, relay_grid_spacing=20,
                          relay_radius_bonus=50)
    g = augment_with_relays(graph_from_positions(pos, 10), pos, cfg)
    assert g.edges == {(1, 2)} and not g.undirected


@pytest.mark.parametrize("kwargs", [{"node_count": 0}, {"radius": -1}, {"relay_count": -1}])
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        GeometricConfig(**kwargs)
