"""Vectorized evaluation of the full reconfiguration constraint set.

Inequalities are reported as max(0, h), equalities as |g| and binaries as
the distance to the nearest integer. Every constraint carries a stable id and
the warm-start variables it involves.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..models.decision import DecisionBatch, PowerState, TopologyState
from ..models.grid import GridModel
from ..models.scenario import ScenarioBatch
from .power_flow import direction_residuals, distflow_residuals, ohm_drop
from .topology import cutoff_L


def var_pg(j: int) -> str:
    return f"P_G[{j}]"


def var_qg(j: int) -> str:
    return f"Q_G[{j}]"


def var_v(j: int) -> str:
    return f"v[{j}]"


def var_y(line_id: int) -> str:
    return f"y[{line_id}]"


def var_z(i: int, j: int) -> str:
    return f"z[{i},{j}]"


@dataclass(frozen=True)
class ConstraintCatalog:
    """Ids and involved warm-start variables for each constraint class."""

    ids: Dict[str, List[str]]
    variables: Dict[str, List[Tuple[str, ...]]]


def _z_names(grid: GridModel, k: int) -> Tuple[str, str]:
    i, j = int(grid.from_nodes[k]), int(grid.to_nodes[k])
    return var_z(i, j), var_z(j, i)


def pcc_inward(grid: GridModel) -> Tuple[np.ndarray, np.ndarray]:
    """Lines touching the PCC and whether their to-node is the PCC."""
    lines = np.flatnonzero((grid.from_nodes == grid.pcc_node) | (grid.to_nodes == grid.pcc_node))
    return lines, grid.to_nodes[lines] == grid.pcc_node


def build_catalog(grid: GridModel, no_export: bool = False) -> ConstraintCatalog:
    ids: Dict[str, List[str]] = {}
    variables: Dict[str, List[Tuple[str, ...]]] = {}

    def add(cls: str, cid: str, names: Tuple[str, ...] = ()) -> None:
        ids.setdefault(cls, []).append(cid)
        variables.setdefault(cls, []).append(names)

    for sign in ("+", "-"):
        for k in grid.switch_positions:
            i, j, lid = int(grid.from_nodes[k]), int(grid.to_nodes[k]), grid.lines[k].id
            add("ohm-switch", f"ohm-switch[{lid}]{sign}", (var_v(i), var_v(j), var_y(lid)))
    for label in ("P_ij", "P_ji", "Q_ij", "Q_ji"):
        for k in range(grid.line_count):
            zij, zji = _z_names(grid, k)
            add("flow-existence", f"{label}<=Mz[{grid.lines[k].id}]", (zij if label.endswith("ij") else zji,))
    for label in ("P_ij", "P_ji", "Q_ij", "Q_ji"):
        for k in range(grid.line_count):
            add("flow-existence", f"{label}>=0[{grid.lines[k].id}]")
    for label, name in (("P_G<=max", var_pg), ("P_G>=min", var_pg), ("Q_G<=max", var_qg), ("Q_G>=min", var_qg)):
        for j in range(grid.node_count):
            add("gen-limit", f"{label}[{j}]", (name(j),))
    for label in ("v<=v_hi", "v>=v_lo"):
        for j in grid.non_pcc_nodes:
            add("voltage", f"{label}[{j}]", (var_v(int(j)),))
    absolute = np.abs(grid.incidence)
    for j in range(grid.node_count):
        names = tuple(n for k in np.flatnonzero(absolute[j]) for n in _z_names(grid, k))
        add("connectivity", f"connected[{j}]", names)
    if no_export:
        lines, to_pcc = pcc_inward(grid)
        for k, inward_is_ij in zip(lines, to_pcc):
            zij, zji = _z_names(grid, k)
            lid = grid.lines[k].id
            add("no-export", f"z_in=0[{lid}]", (zij if inward_is_ij else zji,))
            add("no-export", f"P_in<=0[{lid}]")
            add("no-export", f"Q_in<=0[{lid}]")
        add("no-export", "P_feeder=P_G[pcc]", (var_pg(grid.pcc_node),))
        add("no-export", "Q_feeder=Q_G[pcc]", (var_qg(grid.pcc_node),))

    for prefix in ("P-balance", "Q-balance"):
        for j in range(grid.node_count):
            add("equality", f"{prefix}[{j}]")
    for k in grid.fixed_positions:
        add("equality", f"ohm[{grid.lines[k].id}]")
    for k in range(grid.line_count):
        add("equality", f"direction[{grid.lines[k].id}]")
    add("equality", "radiality")
    add("equality", "v_slack")

    for k, lid in zip(grid.switch_positions, grid.switch_ids):
        add("integrality", f"binary y[{lid}]", (var_y(lid),))
    for k in range(grid.line_count):
        zij, zji = _z_names(grid, k)
        add("integrality", f"binary {zij}", (zij,))
    for k in range(grid.line_count):
        zij, zji = _z_names(grid, k)
        add("integrality", f"binary {zji}", (zji,))
    return ConstraintCatalog(ids=ids, variables=variables)


def _state(batch: DecisionBatch) -> Tuple[TopologyState, PowerState]:
    topo = TopologyState(y=batch.y, z_ij=batch.z_ij, z_ji=batch.z_ji)
    state = PowerState(
        v=batch.v, p_ij=batch.p_ij, p_ji=batch.p_ji, q_ij=batch.q_ij, q_ji=batch.q_ji,
        p_gen=batch.p_gen, q_gen=batch.q_gen, p_load=batch.p_load, q_load=batch.q_load,
    )  # fmt: skip
    return topo, state


def evaluate_constraints(
    grid: GridModel,
    scenarios: ScenarioBatch,
    batch: DecisionBatch,
    big_m: float = 10.0,
    no_export: bool = False,
) -> Dict[str, np.ndarray]:
    """Violation magnitudes per class, each of shape (batch, constraints).

    Column order matches :func:`build_catalog`.
    """
    topo, state = _state(batch)
    sw = grid.switch_positions
    bounds = grid.voltage_bounds
    relax = big_m * (1.0 - batch.y)
    bracket = ohm_drop(grid, state)[:, sw]
    out: Dict[str, np.ndarray] = {}
    out["ohm-switch"] = np.maximum(np.concatenate([bracket - relax, -bracket - relax], axis=1), 0.0)

    upper = [
        batch.p_ij - big_m * batch.z_ij,
        batch.p_ji - big_m * batch.z_ji,
        batch.q_ij - big_m * batch.z_ij,
        batch.q_ji - big_m * batch.z_ji,
    ]
    lower = [-batch.p_ij, -batch.p_ji, -batch.q_ij, -batch.q_ji]
    out["flow-existence"] = np.maximum(np.concatenate(upper + lower, axis=1), 0.0)

    out["gen-limit"] = np.maximum(
        np.concatenate(
            [
                batch.p_gen - scenarios.p_gen_cap,
                -batch.p_gen,
                batch.q_gen - scenarios.q_gen_hi,
                scenarios.q_gen_lo - batch.q_gen,
            ],
            axis=1,
        ),
        0.0,
    )
    v = batch.v[:, grid.non_pcc_nodes]
    out["voltage"] = np.maximum(np.concatenate([v - bounds.v_hi, bounds.v_lo - v], axis=1), 0.0)
    touching = (batch.z_ij + batch.z_ji) @ np.abs(grid.incidence).T
    out["connectivity"] = np.maximum(1.0 - touching, 0.0)

    if no_export:
        lines, to_pcc = pcc_inward(grid)
        z_in = np.where(to_pcc, batch.z_ij[:, lines], batch.z_ji[:, lines])
        p_in = np.where(to_pcc, batch.p_ij[:, lines], batch.p_ji[:, lines])
        q_in = np.where(to_pcc, batch.q_ij[:, lines], batch.q_ji[:, lines])
        p_out = np.where(to_pcc, batch.p_ji[:, lines], batch.p_ij[:, lines]).sum(axis=1)
        q_out = np.where(to_pcc, batch.q_ji[:, lines], batch.q_ij[:, lines]).sum(axis=1)
        per_line = np.stack([np.abs(z_in), np.maximum(p_in, 0.0), np.maximum(q_in, 0.0)], axis=2)
        feeder = np.stack(
            [
                np.abs(p_out - batch.p_gen[:, grid.pcc_node]),
                np.abs(q_out - batch.q_gen[:, grid.pcc_node]),
            ],
            axis=1,
        )
        out["no-export"] = np.concatenate([per_line.reshape(len(batch), -1), feeder], axis=1)

    radial = np.abs(batch.y.sum(axis=1) - cutoff_L(grid))[:, None]
    slack = np.abs(batch.v[:, grid.pcc_node] - 1.0)[:, None]
    out["equality"] = np.concatenate(
        [
            np.abs(distflow_residuals(grid, None, state)),
            np.abs(direction_residuals(grid, topo)),
            radial,
            slack,
        ],
        axis=1,
    )
    binaries = np.concatenate([batch.y, batch.z_ij, batch.z_ji], axis=1)
    out["integrality"] = np.abs(binaries - np.round(binaries))
    return out
