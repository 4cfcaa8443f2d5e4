"""Topology predicates: radiality cutoff, spanning-tree test, tree orientation."""

import logging
from typing import List, Sequence

import networkx as nx
import numpy as np

from ..models.decision import TopologyState
from ..models.grid import GridModel
from .exceptions import DimensionMismatch, InfeasibleRadiality

logger = logging.getLogger(__name__)


def cutoff_L(grid: GridModel) -> int:
    """Number of switches closed in any radial topology: (N-1) - (M - M_sw)."""
    n_fixed = grid.line_count - grid.switch_count
    cutoff = (grid.node_count - 1) - n_fixed
    if cutoff < 0 or cutoff > grid.switch_count:
        raise InfeasibleRadiality(
            f"cutoff L={cutoff} outside [0, {grid.switch_count}] for grid {grid.name}"
        )
    return cutoff


def closed_line_mask(grid: GridModel, y: Sequence[float]) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.switch_count,):
        raise DimensionMismatch(f"expected {grid.switch_count} switch states, got {y.shape}")
    closed = ~grid.switch_mask.copy()
    closed[grid.switch_positions] = y > 0.5
    return closed


def closed_switch_ids(grid: GridModel, y: Sequence[float]) -> List[int]:
    return [sid for sid, state in zip(grid.switch_ids, y) if state > 0.5]


def _closed_graph(grid: GridModel, closed: np.ndarray) -> nx.MultiGraph:
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(grid.node_count))
    for k in np.flatnonzero(closed):
        graph.add_edge(int(grid.from_nodes[k]), int(grid.to_nodes[k]), line=int(k))
    return graph


def is_radial(grid: GridModel, y: Sequence[float]) -> bool:
    """True iff fixed lines plus closed switches form a spanning tree."""
    closed = closed_line_mask(grid, y)
    if int(closed.sum()) != grid.node_count - 1:
        return False
    return nx.is_tree(_closed_graph(grid, closed))


def orient_tree(grid: GridModel, y: Sequence[float]) -> TopologyState:
    """Direction indicators pointing away from the PCC along the closed tree.

    For a line listed as (i, j): z_ij = 1 when i is the parent of j.
    Open switches get z_ij = z_ji = 0.
    """
    closed = closed_line_mask(grid, y)
    graph = _closed_graph(grid, closed)
    z_ij = np.zeros(grid.line_count)
    z_ji = np.zeros(grid.line_count)
    for parent, child in nx.bfs_edges(graph, grid.pcc_node):
        k = next(iter(graph.get_edge_data(parent, child).values()))["line"]
        if grid.from_nodes[k] == parent:
            z_ij[k] = 1.0
        else:
            z_ji[k] = 1.0
    return TopologyState(y=np.asarray(y, dtype=float).copy(), z_ij=z_ij, z_ji=z_ji)


def default_topology(grid: GridModel) -> TopologyState:
    """Normally closed switches closed, ties open."""
    return orient_tree(grid, grid.default_switch_state)
