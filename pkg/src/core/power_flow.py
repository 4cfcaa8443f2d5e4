"""Linearized DistFlow relations, the loss-proxy objective and physical losses.

All functions accept single states or batches (leading axes broadcast).
"""

from typing import Optional

import numpy as np

from ..models.decision import PowerState, TopologyState
from ..models.grid import GridModel
from .exceptions import DegenerateVoltage


def nodal_injection(grid: GridModel, forward: np.ndarray, backward: np.ndarray) -> np.ndarray:
    """Net flow leaving each node given flows along and against line orientation."""
    return (forward - backward) @ grid.incidence.T


def ohm_drop(grid: GridModel, state: PowerState) -> np.ndarray:
    """Per-line residual v_j - v_i + 2(R dP + X dQ); zero where Ohm's law holds."""
    v = state.v
    dp = state.p_ij - state.p_ji
    dq = state.q_ij - state.q_ji
    return (
        v[..., grid.to_nodes]
        - v[..., grid.from_nodes]
        + 2.0 * (grid.resistance * dp + grid.reactance * dq)
    )


def distflow_residuals(
    grid: GridModel, topo: Optional[TopologyState], state: PowerState
) -> np.ndarray:
    """Stacked equality residuals.

    Order: real balance (N), reactive balance (N), Ohm's law on fixed lines
    (M - M_sw). When ``topo`` is given, direction residuals follow: per line
    z_ij + z_ji - 1 (fixed) or z_ij + z_ji - y (switch).
    """
    p_bal = state.p_gen - state.p_load - nodal_injection(grid, state.p_ij, state.p_ji)
    q_bal = state.q_gen - state.q_load - nodal_injection(grid, state.q_ij, state.q_ji)
    ohm = ohm_drop(grid, state)[..., grid.fixed_positions]
    parts = [p_bal, q_bal, ohm]
    if topo is not None:
        parts.append(direction_residuals(grid, topo))
    return np.concatenate(parts, axis=-1)


def direction_residuals(grid: GridModel, topo: TopologyState) -> np.ndarray:
    status = np.ones(topo.z_ij.shape)
    status[..., grid.switch_positions] = topo.y
    return topo.z_ij + topo.z_ji - status


def objective_f(grid: GridModel, state: PowerState) -> np.ndarray:
    """Sum over lines of R (P_ij^2 + P_ji^2 + Q_ij^2 + Q_ji^2)."""
    squares = state.p_ij**2 + state.p_ji**2 + state.q_ij**2 + state.q_ji**2
    return np.sum(grid.resistance * squares, axis=-1)


def line_losses(grid: GridModel, state: PowerState) -> np.ndarray:
    """Sum over lines of R ((P_ij - P_ji)^2 + (Q_ij - Q_ji)^2) / v_i.

    v_i is the sending-end voltage: the from node unless net real power
    flows against the line orientation.
    """
    dp = state.p_ij - state.p_ji
    dq = state.q_ij - state.q_ji
    v_from = state.v[..., grid.from_nodes]
    v_to = state.v[..., grid.to_nodes]
    v_send = np.where(dp >= 0, v_from, v_to)
    carrying = (dp != 0) | (dq != 0)
    if np.any(v_send[carrying] <= 0):
        raise DegenerateVoltage("non-positive sending-end voltage on a loaded line")
    safe = np.where(carrying, v_send, 1.0)
    return np.sum(grid.resistance * (dp**2 + dq**2) / safe, axis=-1)
