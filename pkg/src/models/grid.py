"""Grid data model: nodes, lines, switches and per-unit bases."""

from functools import cached_property
from typing import List, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


class Line(BaseModel):
    """A distribution line between two nodes, optionally switchable."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., description="Line number as printed in the feeder tables")
    from_node: int = Field(..., ge=0)
    to_node: int = Field(..., ge=0)
    resistance: float = Field(..., gt=0, description="R_ij in pu")
    reactance: float = Field(..., gt=0, description="X_ij in pu")
    is_switch: bool = False
    default_closed: bool = Field(True, description="Switch position in the default topology")


class VoltageBounds(BaseModel):
    """Bounds on the squared voltage magnitude (pu^2)."""

    model_config = ConfigDict(frozen=True)

    v_lo: float = Field(..., gt=0)
    v_hi: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "VoltageBounds":
        if self.v_lo >= self.v_hi:
            raise ValueError(f"v_lo={self.v_lo} must be below v_hi={self.v_hi}")
        return self


class GridModel(BaseModel):
    """Immutable distribution network.

    Node ids are 0..N-1. Line parameters and nominal loads are per-unit on
    ``base_kv`` / ``base_power``. The PCC is the slack node; every entry of
    ``substations`` (the PCC included) is supplied by the bulk grid.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    node_count: int = Field(..., gt=1)
    pcc_node: int = Field(0, ge=0)
    substations: Tuple[int, ...] = ()
    lines: Tuple[Line, ...]
    base_kv: float = Field(..., gt=0)
    base_power: float = Field(..., gt=0, description="Base power in kVA")
    voltage_bounds: VoltageBounds
    nominal_p: Tuple[float, ...] = ()
    nominal_q: Tuple[float, ...] = ()

    @field_validator("lines")
    @classmethod
    def _sorted_lines(cls, lines: Tuple[Line, ...]) -> Tuple[Line, ...]:
        ids = [line.id for line in lines]
        if len(set(ids)) != len(ids):
            raise ValueError("line ids must be unique")
        return tuple(sorted(lines, key=lambda line: line.id))

    @model_validator(mode="after")
    def _check_network(self) -> "GridModel":
        n = self.node_count
        if self.pcc_node >= n:
            raise ValueError(f"PCC node {self.pcc_node} does not exist")
        for line in self.lines:
            if line.from_node >= n or line.to_node >= n:
                raise ValueError(f"line {line.id} references a missing node")
            if line.from_node == line.to_node:
                raise ValueError(f"line {line.id} is a self loop")
        if not any(line.is_switch for line in self.lines):
            raise ValueError("grid needs at least one switchable line")
        if self.substations and self.pcc_node not in self.substations:
            raise ValueError("substations must include the PCC")
        if any(s >= n for s in self.substations):
            raise ValueError("substation node does not exist")
        for loads in (self.nominal_p, self.nominal_q):
            if loads and len(loads) != n:
                raise ValueError("nominal loads need one entry per node")

        full = nx.MultiGraph()
        full.add_nodes_from(range(n))
        full.add_edges_from((line.from_node, line.to_node) for line in self.lines)
        if not nx.is_connected(full):
            raise ValueError(f"grid {self.name} is not connected")

        fixed = nx.MultiGraph()
        fixed.add_nodes_from(range(n))
        fixed.add_edges_from(
            (line.from_node, line.to_node) for line in self.lines if not line.is_switch
        )
        # A connected graph whose fixed lines form a forest always admits a
        # spanning tree containing that forest.
        if not nx.is_forest(fixed):
            raise ValueError(f"fixed lines of grid {self.name} contain a cycle")
        return self

    @property
    def line_count(self) -> int:
        return len(self.lines)

    @property
    def supply_nodes(self) -> Tuple[int, ...]:
        return self.substations or (self.pcc_node,)

    @cached_property
    def line_ids(self) -> List[int]:
        return [line.id for line in self.lines]

    @cached_property
    def switch_mask(self) -> np.ndarray:
        return _frozen(np.array([line.is_switch for line in self.lines], dtype=bool))

    @cached_property
    def switch_positions(self) -> np.ndarray:
        return _frozen(np.flatnonzero(self.switch_mask))

    @cached_property
    def fixed_positions(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.switch_mask))

    @property
    def switch_count(self) -> int:
        return int(self.switch_mask.sum())

    @cached_property
    def switch_ids(self) -> List[int]:
        return [self.lines[k].id for k in self.switch_positions]

    @cached_property
    def from_nodes(self) -> np.ndarray:
        return _frozen(np.array([line.from_node for line in self.lines], dtype=int))

    @cached_property
    def to_nodes(self) -> np.ndarray:
        return _frozen(np.array([line.to_node for line in self.lines], dtype=int))

    @cached_property
    def resistance(self) -> np.ndarray:
        return _frozen(np.array([line.resistance for line in self.lines], dtype=float))

    @cached_property
    def reactance(self) -> np.ndarray:
        return _frozen(np.array([line.reactance for line in self.lines], dtype=float))

    @cached_property
    def incidence(self) -> np.ndarray:
        """Node-line incidence: +1 at the from node, -1 at the to node."""
        matrix = np.zeros((self.node_count, self.line_count))
        cols = np.arange(self.line_count)
        matrix[self.from_nodes, cols] = 1.0
        matrix[self.to_nodes, cols] = -1.0
        return _frozen(matrix)

    @cached_property
    def non_pcc_nodes(self) -> np.ndarray:
        return _frozen(np.array([j for j in range(self.node_count) if j != self.pcc_node]))

    @cached_property
    def default_switch_state(self) -> np.ndarray:
        return _frozen(
            np.array(
                [1.0 if self.lines[k].default_closed else 0.0 for k in self.switch_positions]
            )
        )

    @cached_property
    def load_p(self) -> np.ndarray:
        values = self.nominal_p or (0.0,) * self.node_count
        return _frozen(np.array(values, dtype=float))

    @cached_property
    def load_q(self) -> np.ndarray:
        values = self.nominal_q or (0.0,) * self.node_count
        return _frozen(np.array(values, dtype=float))

    @property
    def base_impedance(self) -> float:
        """Base impedance in ohms: kV^2 / MVA."""
        return self.base_kv**2 / (self.base_power / 1000.0)
