"""Decision variables: switch states, flow directions and the power state.

Single-instance containers hold 1-D arrays; ``DecisionBatch`` stacks the same
fields along a leading batch axis for vectorized completion and evaluation.
"""

from dataclasses import dataclass, fields
from typing import List

import numpy as np


@dataclass(frozen=True)
class TopologyState:
    """Switch states y (per switch) and direction indicators (per line)."""

    y: np.ndarray
    z_ij: np.ndarray
    z_ji: np.ndarray

    @property
    def line_status(self) -> np.ndarray:
        return self.z_ij + self.z_ji


@dataclass(frozen=True)
class PowerState:
    """Squared voltages, directed flows, dispatch and loads in pu."""

    v: np.ndarray
    p_ij: np.ndarray
    p_ji: np.ndarray
    q_ij: np.ndarray
    q_ji: np.ndarray
    p_gen: np.ndarray
    q_gen: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray

    @classmethod
    def zeros(cls, node_count: int, line_count: int) -> "PowerState":
        nodes = np.zeros(node_count)
        lines = np.zeros(line_count)
        return cls(
            v=np.ones(node_count),
            p_ij=lines.copy(),
            p_ji=lines.copy(),
            q_ij=lines.copy(),
            q_ji=lines.copy(),
            p_gen=nodes.copy(),
            q_gen=nodes.copy(),
            p_load=nodes.copy(),
            q_load=nodes.copy(),
        )

    @property
    def voltage_magnitude(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.v, 0.0))


@dataclass(frozen=True)
class DecisionVector:
    """Full decision vector: topology plus power state."""

    topology: TopologyState
    state: PowerState


@dataclass(frozen=True)
class DecisionBatch:
    """Batch of decision vectors; every array has a leading batch axis."""

    y: np.ndarray
    z_ij: np.ndarray
    z_ji: np.ndarray
    v: np.ndarray
    p_ij: np.ndarray
    p_ji: np.ndarray
    q_ij: np.ndarray
    q_ji: np.ndarray
    p_gen: np.ndarray
    q_gen: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray

    def __len__(self) -> int:
        return self.v.shape[0]

    def __getitem__(self, k: int) -> DecisionVector:
        topology = TopologyState(y=self.y[k], z_ij=self.z_ij[k], z_ji=self.z_ji[k])
        state = PowerState(
            v=self.v[k],
            p_ij=self.p_ij[k],
            p_ji=self.p_ji[k],
            q_ij=self.q_ij[k],
            q_ji=self.q_ji[k],
            p_gen=self.p_gen[k],
            q_gen=self.q_gen[k],
            p_load=self.p_load[k],
            q_load=self.q_load[k],
        )
        return DecisionVector(topology=topology, state=state)

    @classmethod
    def from_vectors(cls, vectors: List[DecisionVector]) -> "DecisionBatch":
        values = {}
        for name in ("y", "z_ij", "z_ji"):
            values[name] = np.stack([getattr(d.topology, name) for d in vectors])
        for f in fields(PowerState):
            values[f.name] = np.stack([getattr(d.state, f.name) for d in vectors])
        return cls(**values)

    def take(self, rows: np.ndarray) -> "DecisionBatch":
        return DecisionBatch(**{f.name: getattr(self, f.name)[rows] for f in fields(self)})
