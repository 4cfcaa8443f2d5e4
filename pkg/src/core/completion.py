"""Variable-space completion.

The network predicts the independent variables (direction indicators, switch
states, non-PCC voltages, three of the four flow families and Q on switch
lines). Everything else follows in closed form from the equality constraints:

- z_ij from the direction constraints (z_ij + z_ji = status)
- the last switch from the radiality count, when the head does not round
- Q_ij on fixed lines from Ohm's law
- P^G and Q^G from the nodal balances

The map is linear, so its backward pass is a fixed sequence of transposed
products. The losses below return their gradients with respect to every
field of the completed ``DecisionBatch``.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from ..models.decision import DecisionBatch
from ..models.grid import GridModel
from ..models.scenario import ScenarioBatch
from .constraints import pcc_inward
from .exceptions import DimensionMismatch
from .phyr import scale_to_box, scale_to_box_grad
from .power_flow import ohm_drop
from .topology import cutoff_L

STATE_FIELDS = ("y", "z_ij", "z_ji", "v", "p_ij", "p_ji", "q_ij", "q_ji", "p_gen", "q_gen")


class VectorLayout:
    """Named contiguous slots of a flat vector."""

    def __init__(self, slots: Iterable[Tuple[str, int]]):
        self.slots = tuple(slots)
        self._slices: Dict[str, slice] = {}
        start = 0
        for name, width in self.slots:
            self._slices[name] = slice(start, start + width)
            start += width
        self.size = start

    def __getitem__(self, name: str) -> slice:
        return self._slices[name]

    def structure(self, vector: np.ndarray) -> Dict[str, np.ndarray]:
        vector = np.asarray(vector)
        if vector.shape[-1] != self.size:
            raise DimensionMismatch(f"expected trailing size {self.size}, got {vector.shape[-1]}")
        return {name: vector[..., s] for name, s in self._slices.items()}

    def flatten(self, parts: Dict[str, np.ndarray]) -> np.ndarray:
        for name, width in self.slots:
            if np.shape(parts[name])[-1] != width:
                raise DimensionMismatch(f"slot '{name}' needs width {width}")
        return np.concatenate([parts[name] for name, _ in self.slots], axis=-1)


class IndexMap:
    """Layouts of the independent vector, the dependent vector and the network output."""

    def __init__(self, grid: GridModel):
        self.grid = grid
        m, m_sw, n = grid.line_count, grid.switch_count, grid.node_count
        self.cutoff = cutoff_L(grid)
        self.independent = VectorLayout(
            [
                ("z_ji", m),
                ("y", m_sw - 1),
                ("v", n - 1),
                ("p_ji", m),
                ("p_ij", m),
                ("q_ji", m),
                ("q_ij_switch", m_sw),
                ("p_load_pcc", 1),
                ("q_load_pcc", 1),
            ]
        )
        self.dependent = VectorLayout(
            [
                ("z_ij", m),
                ("y_last", 1),
                ("p_gen", n),
                ("q_gen", n),
                ("q_ij_fixed", m - m_sw),
            ]
        )
        self.output = VectorLayout(
            [
                ("switch", m_sw),
                ("direction", m),
                ("v", n - 1),
                ("p_ji", m),
                ("p_ij", m),
                ("q_ji", m),
                ("q_ij_switch", m_sw),
            ]
        )

    @property
    def input_size(self) -> int:
        return 2 * (self.grid.node_count - 1)

    @property
    def output_size(self) -> int:
        return self.output.size


@dataclass(frozen=True)
class BoxBounds:
    """Boxes that the continuous network outputs are squashed into."""

    v_lo: float
    v_hi: float
    flow_cap: float = 10.0

    @classmethod
    def for_grid(cls, grid: GridModel, flow_cap: float = 10.0) -> "BoxBounds":
        return cls(grid.voltage_bounds.v_lo, grid.voltage_bounds.v_hi, flow_cap)


@dataclass(frozen=True)
class Independents:
    """Batched independent variables; ``y`` carries every switch."""

    y: np.ndarray
    z_ji: np.ndarray
    v: np.ndarray
    p_ij: np.ndarray
    p_ji: np.ndarray
    q_ji: np.ndarray
    q_ij_switch: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray


_CONTINUOUS = ("p_ji", "p_ij", "q_ji", "q_ij_switch")


def assemble_independents(
    imap: IndexMap,
    raw: np.ndarray,
    y: np.ndarray,
    z_ji: np.ndarray,
    scenarios: ScenarioBatch,
    bounds: BoxBounds,
) -> Independents:
    """Scale raw continuous outputs onto their boxes and attach loads.

    Voltages land in (v_lo, v_hi), flows in (0, flow_cap). Switch states and
    direction indicators come from the rounding and InSi heads.
    """
    if raw.shape[-1] != imap.output_size:
        raise DimensionMismatch(f"expected {imap.output_size} outputs, got {raw.shape[-1]}")
    if y.shape[-1] != imap.grid.switch_count or z_ji.shape[-1] != imap.grid.line_count:
        raise DimensionMismatch("switch or direction head has the wrong width")
    parts = imap.output.structure(raw)
    flows = {name: scale_to_box(parts[name], 0.0, bounds.flow_cap) for name in _CONTINUOUS}
    return Independents(
        y=y,
        z_ji=z_ji,
        v=scale_to_box(parts["v"], bounds.v_lo, bounds.v_hi),
        p_load=scenarios.p_load,
        q_load=scenarios.q_load,
        **flows,
    )


def assemble_backward(
    imap: IndexMap, raw: np.ndarray, grads: Independents, bounds: BoxBounds
) -> np.ndarray:
    """Gradient with respect to the continuous slots of the raw output.

    Switch and direction slots are left at zero; their heads fill them in.
    """
    parts = imap.output.structure(raw)
    d_raw = np.zeros_like(raw)
    d_raw[..., imap.output["v"]] = grads.v * scale_to_box_grad(parts["v"], bounds.v_lo, bounds.v_hi)
    for name in _CONTINUOUS:
        d_raw[..., imap.output[name]] = getattr(grads, name) * scale_to_box_grad(
            parts[name], 0.0, bounds.flow_cap
        )
    return d_raw


def _line_status(grid: GridModel, y: np.ndarray) -> np.ndarray:
    status = np.ones(y.shape[:-1] + (grid.line_count,))
    status[..., grid.switch_positions] = y
    return status


def complete(grid: GridModel, ind: Independents, recover_last: bool = False) -> DecisionBatch:
    """Recover the dependent variables and return the full decision batch.

    With ``recover_last`` the last switch state is L minus the others, so the
    radiality count holds exactly whatever the head produced.
    """
    y = np.array(ind.y, dtype=float, copy=True)
    if recover_last:
        y[..., -1] = cutoff_L(grid) - y[..., :-1].sum(axis=-1)
    z_ij = _line_status(grid, y) - ind.z_ji

    batch_shape = ind.v.shape[:-1]
    v = np.ones(batch_shape + (grid.node_count,))
    v[..., grid.non_pcc_nodes] = ind.v

    C = grid.incidence
    fix, sw = grid.fixed_positions, grid.switch_positions
    q_ij = np.zeros(batch_shape + (grid.line_count,))
    q_ij[..., sw] = ind.q_ij_switch
    drop = (v @ C)[..., fix]
    dp = (ind.p_ij - ind.p_ji)[..., fix]
    q_ij[..., fix] = ind.q_ji[..., fix] + (drop / 2.0 - grid.resistance[fix] * dp) / grid.reactance[fix]

    p_gen = ind.p_load + (ind.p_ij - ind.p_ji) @ C.T
    q_gen = ind.q_load + (q_ij - ind.q_ji) @ C.T
    return DecisionBatch(
        y=y,
        z_ij=z_ij,
        z_ji=np.asarray(ind.z_ji, dtype=float),
        v=v,
        p_ij=np.asarray(ind.p_ij, dtype=float),
        p_ji=np.asarray(ind.p_ji, dtype=float),
        q_ij=q_ij,
        q_ji=np.asarray(ind.q_ji, dtype=float),
        p_gen=p_gen,
        q_gen=q_gen,
        p_load=np.asarray(ind.p_load, dtype=float),
        q_load=np.asarray(ind.q_load, dtype=float),
    )


def complete_backward(
    grid: GridModel, grads: Dict[str, np.ndarray], recover_last: bool = False
) -> Independents:
    """Pull gradients on the completed batch back to the independents.

    ``grads`` maps field names of :data:`STATE_FIELDS` to arrays; missing
    entries count as zero. Load gradients are returned as zeros.
    """
    C = grid.incidence
    fix, sw = grid.fixed_positions, grid.switch_positions
    batch_shape = next(iter(grads.values())).shape[:-1]

    def g(name: str, width: int) -> np.ndarray:
        return grads[name] if name in grads else np.zeros(batch_shape + (width,))

    m, n = grid.line_count, grid.node_count
    d_pgen, d_qgen = g("p_gen", n), g("q_gen", n)
    d_qij = g("q_ij", m) + d_qgen @ C
    d_qji = g("q_ji", m) - d_qgen @ C
    d_pij = g("p_ij", m) + d_pgen @ C
    d_pji = g("p_ji", m) - d_pgen @ C
    d_v = np.array(g("v", n), dtype=float, copy=True)

    d_fixed = d_qij[..., fix]
    r_over_x = grid.resistance[fix] / grid.reactance[fix]
    d_qji[..., fix] += d_fixed
    d_v += (d_fixed / (2.0 * grid.reactance[fix])) @ C[:, fix].T
    d_pij[..., fix] -= d_fixed * r_over_x
    d_pji[..., fix] += d_fixed * r_over_x

    d_zij = g("z_ij", m)
    d_zji = g("z_ji", m) - d_zij
    d_y = g("y", grid.switch_count) + d_zij[..., sw]
    if recover_last:
        d_y = d_y.copy()
        d_y[..., :-1] -= d_y[..., -1:]
        d_y[..., -1] = 0.0

    return Independents(
        y=d_y,
        z_ji=d_zji,
        v=d_v[..., grid.non_pcc_nodes],
        p_ij=d_pij,
        p_ji=d_pji,
        q_ji=d_qji,
        q_ij_switch=d_qij[..., sw],
        p_load=np.zeros(batch_shape + (n,)),
        q_load=np.zeros(batch_shape + (n,)),
    )


def _zeros_like_batch(batch: DecisionBatch) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(getattr(batch, name)) for name in STATE_FIELDS}


def objective_with_grad(grid: GridModel, batch: DecisionBatch) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Per-instance loss proxy and its gradient."""
    r = grid.resistance
    value = np.sum(r * (batch.p_ij**2 + batch.p_ji**2 + batch.q_ij**2 + batch.q_ji**2), axis=-1)
    grads = _zeros_like_batch(batch)
    for name in ("p_ij", "p_ji", "q_ij", "q_ji"):
        grads[name] = 2.0 * r * getattr(batch, name)
    return value, grads


def penalty_with_grad(
    grid: GridModel,
    scenarios: ScenarioBatch,
    batch: DecisionBatch,
    big_m: float = 10.0,
    no_export: bool = False,
    recover_last: bool = False,
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Per-instance sum of squared hinge violations over dependent-variable inequalities.

    Covered: generator limits, flow existence (including Q_ij >= 0 on fixed
    lines), big-M Ohm's law on switch lines, no-export when enabled, and the
    [0, 1] range of completed binaries. Box-scaled independents cannot
    violate their own bounds and are not penalized.
    """
    grads = _zeros_like_batch(batch)
    total = np.zeros(len(batch))

    def hinge(h: np.ndarray) -> np.ndarray:
        nonlocal total
        r = np.maximum(h, 0.0)
        total = total + np.sum(r**2, axis=-1)
        return 2.0 * r

    # generator limits
    g = hinge(batch.p_gen - scenarios.p_gen_cap)
    grads["p_gen"] += g
    grads["p_gen"] -= hinge(-batch.p_gen)
    grads["q_gen"] += hinge(batch.q_gen - scenarios.q_gen_hi)
    grads["q_gen"] -= hinge(scenarios.q_gen_lo - batch.q_gen)

    # flow existence
    for flow, z in (("p_ij", "z_ij"), ("p_ji", "z_ji"), ("q_ij", "z_ij"), ("q_ji", "z_ji")):
        g = hinge(getattr(batch, flow) - big_m * getattr(batch, z))
        grads[flow] += g
        grads[z] -= big_m * g
    fix = grid.fixed_positions
    grads["q_ij"][..., fix] -= hinge(-batch.q_ij[..., fix])

    # big-M Ohm's law on switch lines
    sw = grid.switch_positions
    bracket = ohm_drop(grid, batch)[..., sw]
    relax = big_m * (1.0 - batch.y)
    g_plus = hinge(bracket - relax)
    g_minus = hinge(-bracket - relax)
    g_bracket = np.zeros(batch.p_ij.shape)
    g_bracket[..., sw] = g_plus - g_minus
    grads["y"] += big_m * (g_plus + g_minus)
    grads["v"] -= g_bracket @ grid.incidence.T
    grads["p_ij"] += 2.0 * grid.resistance * g_bracket
    grads["p_ji"] -= 2.0 * grid.resistance * g_bracket
    grads["q_ij"] += 2.0 * grid.reactance * g_bracket
    grads["q_ji"] -= 2.0 * grid.reactance * g_bracket

    if no_export:
        lines, to_pcc = pcc_inward(grid)
        for k, inward_ij in zip(lines, to_pcc):
            suffix = "ij" if inward_ij else "ji"
            for name in (f"z_{suffix}", f"p_{suffix}", f"q_{suffix}"):
                grads[name][..., k] += hinge(getattr(batch, name)[..., k : k + 1])[..., 0]

    # completed binaries stay in [0, 1]
    grads["z_ij"] -= hinge(-batch.z_ij)
    grads["z_ij"] += hinge(batch.z_ij - 1.0)
    if recover_last:
        last = batch.y[..., -1:]
        grads["y"][..., -1] -= hinge(-last)[..., 0]
        grads["y"][..., -1] += hinge(last - 1.0)[..., 0]
    return total, grads


def training_loss(
    grid: GridModel,
    scenarios: ScenarioBatch,
    batch: DecisionBatch,
    lambda_h: float = 100.0,
    big_m: float = 10.0,
    no_export: bool = False,
    recover_last: bool = False,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Batch mean of f + lambda_h * sum(max(0, h)^2) and its gradient."""
    value, grads = objective_with_grad(grid, batch)
    if lambda_h:
        pen, pen_grads = penalty_with_grad(grid, scenarios, batch, big_m, no_export, recover_last)
        value = value + lambda_h * pen
        for name in STATE_FIELDS:
            grads[name] = grads[name] + lambda_h * pen_grads[name]
    size = len(batch)
    return float(value.mean()), {name: grads[name] / size for name in STATE_FIELDS}


def supervised_loss(
    batch: DecisionBatch, labels: DecisionBatch
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Batch mean of summed squared errors on V, P^G, Q^G and y."""
    v_mag = np.sqrt(batch.v)
    dv = v_mag - np.sqrt(labels.v)
    dp = batch.p_gen - labels.p_gen
    dq = batch.q_gen - labels.q_gen
    dy = batch.y - labels.y
    per_instance = (dv**2).sum(-1) + (dp**2).sum(-1) + (dq**2).sum(-1) + (dy**2).sum(-1)
    size = len(batch)
    grads = _zeros_like_batch(batch)
    grads["v"] = dv / v_mag / size
    grads["p_gen"] = 2.0 * dp / size
    grads["q_gen"] = 2.0 * dq / size
    grads["y"] = 2.0 * dy / size
    return float(per_instance.mean()), grads


def independent_vector(imap: IndexMap, ind: Independents) -> np.ndarray:
    """Flat z in the layout of ``imap.independent``."""
    pcc = imap.grid.pcc_node
    return imap.independent.flatten(
        {
            "z_ji": ind.z_ji,
            "y": ind.y[..., :-1],
            "v": ind.v,
            "p_ji": ind.p_ji,
            "p_ij": ind.p_ij,
            "q_ji": ind.q_ji,
            "q_ij_switch": ind.q_ij_switch,
            "p_load_pcc": ind.p_load[..., pcc : pcc + 1],
            "q_load_pcc": ind.q_load[..., pcc : pcc + 1],
        }
    )


def dependent_vector(imap: IndexMap, batch: DecisionBatch) -> np.ndarray:
    """Flat phi in the layout of ``imap.dependent``."""
    return imap.dependent.flatten(
        {
            "z_ij": batch.z_ij,
            "y_last": batch.y[..., -1:],
            "p_gen": batch.p_gen,
            "q_gen": batch.q_gen,
            "q_ij_fixed": batch.q_ij[..., imap.grid.fixed_positions],
        }
    )
