"""Random geometric (sensor-field) graphs and relay augmentation.

Placement uses numpy's ``default_rng`` (PCG64). For a seed the stream is
consumed as ``uniform(0, box_side, size=(n, 2))``: x then y for node 1, then
node 2, and so on. Any PCG64 implementation seeded the same way reproduces the
positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DirectedGraph


@dataclass(frozen=True)
class GeometricConfig:
    node_count: int = 100
    box_side: float = 100.0
    radius: float = 20.0
    relay_count: int = 0
    relay_radius_bonus: float = 27.0
    relay_grid_spacing: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        if self.relay_count < 0:
            raise ValueError("relay_count must be non-negative")
        if self.relay_count:
            pts = relay_positions(self)
            if (pts < 0).any() or (pts > self.box_side).any():
                raise ValueError("relay grid does not fit inside the box")


def relay_positions(cfg: GeometricConfig) -> np.ndarray:
    """Relay points on the grid (spacing*x, spacing*y), x and y from 1, row-major.

    ``relay_count`` must be a perfect square; 16 gives the 4x4 grid at
    (20x, 20y), x, y in 1..4.
    """
    side = int(round(cfg.relay_count ** 0.5))
    if side * side != cfg.relay_count:
        raise ValueError(f"relay_count {cfg.relay_count} is not a perfect square")
    ticks = cfg.relay_grid_spacing * np.arange(1, side + 1)
    xs, ys = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel()])


def sample_positions(cfg: GeometricConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(0.0, cfg.box_side, size=(cfg.node_count, 2))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def graph_from_positions(positions: np.ndarray, radius: float) -> DirectedGraph:
    """Undirected edge between every pair at distance <= radius (closed ball)."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    near = _pairwise(positions, positions) <= radius
    np.fill_diagonal(near, False)
    u, v = np.nonzero(near)
    return DirectedGraph(n, frozenset(zip((u + 1).tolist(), (v + 1).tolist())), True)


def generate_geometric(cfg: GeometricConfig) -> tuple[DirectedGraph, np.ndarray]:
    pos = sample_positions(cfg)
    return graph_from_positions(pos, cfg.radius), pos


def augment_with_relays(g: DirectedGraph, positions: np.ndarray,
                        cfg: GeometricConfig) -> DirectedGraph:
    """Add the directed edges u -> w that some relay makes possible.

    A relay at p hears u when dist(u, p) <= radius and reaches w when
    dist(p, w) <= radius + relay_radius_bonus. Relays are not agents; they
    only contribute edges.
    """
    if cfg.relay_count == 0:
        return g
    relays = relay_positions(cfg)
    d = _pairwise(np.asarray(positions, dtype=float), relays)
    hear = (d <= cfg.radius).astype(np.int32)
    reach = (d <= cfg.radius + cfg.relay_radius_bonus).astype(np.int32)
    via = (hear @ reach.T) > 0
    np.fill_diagonal(via, False)
    u, w = np.nonzero(via)
    extra = frozenset(zip((u + 1).tolist(), (w + 1).tolist()))
    if extra <= g.edges:
        return g
    edges = g.edges | extra
    symmetric = all((b, a) in edges for a, b in edges)
    return DirectedGraph(g.n, edges, symmetric)
