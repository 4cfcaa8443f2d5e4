"""Dataset generation, splitting and CSV serialization.

Loads are either uniformly perturbed around nominal values or driven by the
parametric profiles in :mod:`profiles`. Solar sites follow the embedded
layouts with availability from the solar profile, flat at nameplate, or off.
Reactive load always scales with active load so each node keeps its nominal
power factor.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..models.grid import GridModel
from ..models.scenario import DatasetSpec, ScenarioInstance
from .exceptions import DatasetError
from .grid_data import TPC94_COMMERCIAL, get_grid, solar_layout
from .profiles import RESIDENTIAL_KINDS, synth_profile

logger = logging.getLogger(__name__)

DELTA_RANGE = (0.3, 1.7)
SOLAR_Q_RATIO = 0.44  # 0.9 pf envelope
SUPPLY_HEADROOM = 2.0
CSV_FLOAT_FORMAT = "%.12g"

SeedLike = Union[int, np.random.Generator]


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def input_vector(grid: GridModel, p_load: np.ndarray, q_load: np.ndarray) -> np.ndarray:
    """Network input: P^L then Q^L at non-PCC nodes in ascending node order."""
    idx = grid.non_pcc_nodes
    return np.concatenate([p_load[..., idx], q_load[..., idx]], axis=-1)


def make_instance(
    grid: GridModel,
    p_load: np.ndarray,
    q_load: np.ndarray,
    solar_available: Optional[np.ndarray] = None,
    solar_nameplate: Optional[np.ndarray] = None,
    index: int = 0,
    timestamp: float = 0.0,
) -> ScenarioInstance:
    """Attach generator limits to a load vector.

    Supply nodes get P in [0, 2x peak load] and Q in +-2x peak reactive load.
    Solar nodes add their available output to the P cap and +-0.44x
    nameplate to the Q range.
    """
    n = grid.node_count
    solar_available = np.zeros(n) if solar_available is None else np.asarray(solar_available, float)
    solar_nameplate = solar_available if solar_nameplate is None else np.asarray(solar_nameplate, float)
    supply = np.zeros(n)
    supply[list(grid.supply_nodes)] = 1.0
    peak_p = float(grid.load_p.sum())
    peak_q = float(grid.load_q.sum())
    p_gen_cap = supply * SUPPLY_HEADROOM * peak_p + solar_available
    q_span = supply * SUPPLY_HEADROOM * peak_q + SOLAR_Q_RATIO * solar_nameplate
    p_load = np.asarray(p_load, dtype=float)
    q_load = np.asarray(q_load, dtype=float)
    return ScenarioInstance(
        index=index,
        timestamp=timestamp,
        p_load=p_load,
        q_load=q_load,
        p_gen_cap=p_gen_cap,
        q_gen_lo=-q_span,
        q_gen_hi=q_span,
        solar_cap=solar_available,
        x=input_vector(grid, p_load, q_load),
    )


def perturb_loads(
    grid: GridModel,
    seed: SeedLike,
    index: int = 0,
    delta_range: Tuple[float, float] = DELTA_RANGE,
) -> ScenarioInstance:
    """Scale each nominal load by an independent uniform delta.

    Q is scaled by the same delta as P, keeping the power factor.
    """
    rng = _rng(seed)
    lo, hi = delta_range
    delta = rng.uniform(lo, hi, size=grid.node_count) if hi > lo else np.full(grid.node_count, lo)
    return make_instance(grid, grid.load_p * delta, grid.load_q * delta, index=index)


def _load_kinds(grid: GridModel, spec: DatasetSpec, rng: np.random.Generator) -> List[str]:
    """Profile kind per node for profile-driven load modes."""
    weekday_kinds = [k for k in RESIDENTIAL_KINDS if k != "weekend"]
    kinds = [weekday_kinds[i] for i in rng.integers(0, len(weekday_kinds), size=grid.node_count)]
    if spec.load_mode == "mixed":
        if spec.grid != "tpc94":
            raise DatasetError("mixed load mode needs the tpc94 commercial load table")
        for node, kind in TPC94_COMMERCIAL.items():
            kinds[node - 1] = kind
    return kinds


def build_dataset(spec: DatasetSpec, grid: Optional[GridModel] = None) -> List[ScenarioInstance]:
    """Generate ``spec.count`` consecutive time steps.

    Raises:
        UnknownLayout: if the layout is not defined for the grid
        DatasetError: if the load mode does not apply to the grid or the count is zero
    """
    if spec.count == 0:
        raise DatasetError("dataset request for zero instances")
    grid = grid or get_grid(spec.grid)
    layout = solar_layout(spec.grid, spec.solar_layout)
    solar_nodes = np.array(sorted(layout), dtype=int)
    nameplate = np.zeros(grid.node_count)
    for node, kw in layout.items():
        nameplate[node] = kw / grid.base_power

    rng = np.random.default_rng(spec.seed)
    kinds = _load_kinds(grid, spec, rng) if spec.load_mode != "perturbed" else []
    loaded = grid.load_p > 0

    instances = []
    for k in range(spec.count):
        hours = k * spec.interval_hours
        day = spec.start_day + int(hours // 24)
        tod = hours % 24.0

        if spec.load_mode == "perturbed":
            scale = rng.uniform(spec.delta_lo, spec.delta_hi, size=grid.node_count)
        else:
            weekend = day % 7 >= 5
            scale = np.array(
                [
                    synth_profile(
                        "weekend" if weekend and kind in RESIDENTIAL_KINDS else kind, tod, day
                    )
                    for kind in kinds
                ]
            )
            scale *= rng.uniform(1 - spec.noise, 1 + spec.noise, size=grid.node_count)
        scale = np.where(loaded, scale, 0.0)

        available = np.zeros(grid.node_count)
        if spec.solar_mode == "flat":
            available[solar_nodes] = nameplate[solar_nodes]
        elif spec.solar_mode == "profile" and len(solar_nodes):
            noise = rng.uniform(1 - spec.noise, 1 + spec.noise, size=len(solar_nodes))
            factor = np.clip(synth_profile("solar", tod, day) * noise, 0.0, 1.0)
            available[solar_nodes] = nameplate[solar_nodes] * factor

        instances.append(
            make_instance(
                grid,
                grid.load_p * scale,
                grid.load_q * scale,
                solar_available=available,
                solar_nameplate=nameplate,
                index=k,
                timestamp=round(hours, 10),
            )
        )
    logger.info(
        f"Built {len(instances)} {spec.grid} instances "
        f"(loads={spec.load_mode}, solar={spec.solar_layout}/{spec.solar_mode})"
    )
    return instances


def split_dataset(
    data: Sequence[ScenarioInstance],
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> Tuple[List[ScenarioInstance], List[ScenarioInstance], List[ScenarioInstance]]:
    """Random train/validation/test partition under ``seed``."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DatasetError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_val = min(n_val, n - n_train)
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    return tuple([data[i] for i in sorted(part)] for part in parts)  # type: ignore[return-value]


def save_scenarios(path: Union[str, Path], grid: GridModel, instances: Sequence[ScenarioInstance]) -> None:
    """Write scenarios.csv: index, timestamp, loads per node, then generator limits.

    Column suffixes are 0-based node ids.
    """
    if not instances:
        raise DatasetError("refusing to write an empty dataset")
    gen_nodes = sorted(
        set(grid.supply_nodes)
        | {int(j) for s in instances for j in np.flatnonzero((s.q_gen_hi > 0) | (s.p_gen_cap > 0))}
    )
    columns = {
        "index": [s.index for s in instances],
        "timestamp": [s.timestamp for s in instances],
    }
    nodes = range(grid.node_count)
    for prefix, attr in (("P", "p_load"), ("Q", "q_load")):
        matrix = np.stack([getattr(s, attr) for s in instances])
        for j in nodes:
            columns[f"{prefix}_{j}"] = matrix[:, j]
    for prefix, attr in (
        ("PGMAX", "p_gen_cap"),
        ("SOLAR", "solar_cap"),
        ("QGMIN", "q_gen_lo"),
        ("QGMAX", "q_gen_hi"),
    ):
        matrix = np.stack([getattr(s, attr) for s in instances])
        for j in gen_nodes:
            columns[f"{prefix}_{j}"] = matrix[:, j]
    pd.DataFrame(columns).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(instances)} scenarios to {path}")


def load_scenarios(path: Union[str, Path], grid: GridModel) -> List[ScenarioInstance]:
    frame = pd.read_csv(path)
    n = grid.node_count

    def block(prefix: str) -> np.ndarray:
        matrix = np.zeros((len(frame), n))
        for column in frame.columns:
            head, _, node = column.rpartition("_")
            if head == prefix:
                matrix[:, int(node)] = frame[column].to_numpy(dtype=float)
        return matrix

    p, q = block("P"), block("Q")
    p_cap, solar = block("PGMAX"), block("SOLAR")
    q_lo, q_hi = block("QGMIN"), block("QGMAX")
    return [
        ScenarioInstance(
            index=int(frame["index"].iloc[k]),
            timestamp=float(frame["timestamp"].iloc[k]),
            p_load=p[k],
            q_load=q[k],
            p_gen_cap=p_cap[k],
            q_gen_lo=q_lo[k],
            q_gen_hi=q_hi[k],
            solar_cap=solar[k],
            x=input_vector(grid, p[k], q[k]),
        )
        for k in range(len(frame))
    ]
