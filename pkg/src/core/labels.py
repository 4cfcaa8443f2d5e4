"""Oracle labelling of scenario datasets and the labels.csv format."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..models.decision import DecisionBatch
from ..models.grid import GridModel
from ..models.reports import FixedTopologySolution
from ..models.scenario import ScenarioBatch, ScenarioInstance
from .exceptions import AllInfeasible, DatasetError, MissingLabels
from .oracle import OracleSolver

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"


@dataclass(frozen=True)
class LabelSet:
    """Oracle optima aligned with a scenario dataset.

    Rows whose status is not ``optimal`` hold NaN in every decision field.
    """

    index: np.ndarray
    status: np.ndarray
    objective: np.ndarray
    batch: DecisionBatch

    @property
    def feasible(self) -> np.ndarray:
        return self.status == "optimal"

    def __len__(self) -> int:
        return len(self.index)


def label_dataset(
    grid: GridModel,
    instances: Sequence[ScenarioInstance],
    solver: Optional[OracleSolver] = None,
) -> List[Optional[FixedTopologySolution]]:
    """Brute-force optimum for each instance; None where every topology is infeasible."""
    solver = solver or OracleSolver(grid)
    labels: List[Optional[FixedTopologySolution]] = []
    for scenario in instances:
        try:
            labels.append(solver.brute_force_optimum(scenario))
        except AllInfeasible:
            logger.warning(f"Scenario {scenario.index}: no feasible radial topology")
            labels.append(None)
    solved = sum(label is not None for label in labels)
    logger.info(f"Labelled {solved}/{len(labels)} scenarios on {grid.name}")
    return labels


def _columns(grid: GridModel):
    lines = [ln.id for ln in grid.lines]
    nodes = range(grid.node_count)
    yield "y", [f"y_{sid}" for sid in grid.switch_ids]
    for name in ("z_ij", "z_ji", "p_ij", "p_ji", "q_ij", "q_ji"):
        yield name, [f"{name}_{lid}" for lid in lines]
    for name in ("v", "p_gen", "q_gen"):
        yield name, [f"{name}_{j}" for j in nodes]


def save_labels(
    path: Union[str, Path],
    grid: GridModel,
    instances: Sequence[ScenarioInstance],
    labels: Sequence[Optional[FixedTopologySolution]],
) -> None:
    if len(instances) != len(labels):
        raise DatasetError("one label per scenario is required")
    rows = []
    for scenario, label in zip(instances, labels):
        row = {"index": scenario.index}
        if label is None or not label.ok:
            row.update(status="infeasible", objective=np.nan, closed="")
            rows.append(row)
            continue
        row.update(
            status=label.status,
            objective=label.objective,
            closed=";".join(str(s) for s in label.closed_switches),
        )
        topo, state = label.topology, label.state
        for name, columns in _columns(grid):
            source = topo if name in ("y", "z_ij", "z_ji") else state
            row.update(zip(columns, getattr(source, name)))
        rows.append(row)
    frame = pd.DataFrame(rows)
    for _, columns in _columns(grid):
        for column in columns:
            if column not in frame:
                frame[column] = np.nan
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"Wrote {len(rows)} labels to {path}")


def load_labels(
    path: Union[str, Path], grid: GridModel, scenarios: Optional[ScenarioBatch] = None
) -> LabelSet:
    """Read labels.csv; loads are taken from ``scenarios`` when given.

    Raises:
        MissingLabels: if ``scenarios`` has a different number of rows
    """
    frame = pd.read_csv(path, keep_default_na=True)
    if scenarios is not None and len(scenarios) != len(frame):
        raise MissingLabels(f"{len(frame)} labels for {len(scenarios)} scenarios")
    values = {name: frame[columns].to_numpy(dtype=float) for name, columns in _columns(grid)}
    rows = len(frame)
    if scenarios is not None:
        values["p_load"] = scenarios.p_load
        values["q_load"] = scenarios.q_load
    else:
        values["p_load"] = np.zeros((rows, grid.node_count))
        values["q_load"] = np.zeros((rows, grid.node_count))
    return LabelSet(
        index=frame["index"].to_numpy(dtype=int),
        status=frame["status"].astype(str).to_numpy(),
        objective=frame["objective"].to_numpy(dtype=float),
        batch=DecisionBatch(**values),
    )


def labels_from_solutions(
    grid: GridModel, scenarios: ScenarioBatch, labels: Sequence[Optional[FixedTopologySolution]]
) -> LabelSet:
    """In-memory equivalent of save_labels followed by load_labels."""
    rows = len(labels)
    values = {}
    for name, columns in _columns(grid):
        values[name] = np.full((rows, len(columns)), np.nan)
    status = np.array(["infeasible"] * rows, dtype=object)
    objective = np.full(rows, np.nan)
    for k, label in enumerate(labels):
        if label is None or not label.ok:
            continue
        status[k] = "optimal"
        objective[k] = label.objective
        for name in values:
            source = label.topology if name in ("y", "z_ij", "z_ji") else label.state
            values[name][k] = getattr(source, name)
    return LabelSet(
        index=np.arange(rows),
        status=status.astype(str),
        objective=objective,
        batch=DecisionBatch(p_load=scenarios.p_load, q_load=scenarios.q_load, **values),
    )
