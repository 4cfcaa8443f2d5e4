"""Experiment sweeps and the reconfiguration-regime power-system report."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..models.decision import PowerState, TopologyState
from ..models.grid import GridModel
from ..models.reports import FixedTopologySolution, MetricsRecord, ReportRow
from ..models.scenario import ScenarioBatch, ScenarioInstance
from ..models.training import ExperimentConfig, TrainConfig
from .exceptions import DatasetError, MissingLabels
from .grid_data import get_grid
from .labels import LabelSet, load_labels
from .metrics import UNDERVOLTAGE_PU
from .oracle import OracleSolver, select_best
from .power_flow import line_losses
from .scenario_data import load_scenarios, split_dataset
from .topology import closed_switch_ids, default_topology, is_radial
from .training import Committee, train_committee, variant_name

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"
SCENARIOS_FILE = "scenarios.csv"
LABELS_FILE = "labels.csv"


@dataclass
class Dataset:
    """A stored dataset: scenarios plus optional oracle labels."""

    name: str
    instances: List[ScenarioInstance]
    labels: Optional[LabelSet] = None

    @property
    def batch(self) -> ScenarioBatch:
        return ScenarioBatch.from_instances(self.instances)

    def subset(self, positions: Sequence[int], name: str) -> "Dataset":
        rows = np.asarray(positions, dtype=int)
        labels = None
        if self.labels is not None:
            labels = LabelSet(
                index=self.labels.index[rows],
                status=self.labels.status[rows],
                objective=self.labels.objective[rows],
                batch=self.labels.batch.take(rows),
            )
        return Dataset(name, [self.instances[k] for k in rows], labels)


def load_dataset_dir(path: Union[str, Path], grid: GridModel) -> Dataset:
    """Read scenarios.csv and, when present, labels.csv from a directory."""
    path = Path(path)
    scenario_file = path / SCENARIOS_FILE
    if not scenario_file.exists():
        raise DatasetError(f"{scenario_file} not found")
    instances = load_scenarios(scenario_file, grid)
    labels = None
    if (path / LABELS_FILE).exists():
        labels = load_labels(path / LABELS_FILE, grid, ScenarioBatch.from_instances(instances))
    return Dataset(path.name, instances, labels)


def interval_hours(instances: Sequence[ScenarioInstance]) -> float:
    """Spacing of consecutive timestamps; 1 h when it cannot be inferred."""
    stamps = np.array([s.timestamp for s in instances])
    steps = np.diff(stamps)
    steps = steps[steps > 0]
    return float(np.median(steps)) if steps.size else 1.0


@dataclass
class ExperimentBundle:
    metrics: List[MetricsRecord] = field(default_factory=list)
    curves: List[Dict[str, object]] = field(default_factory=list)
    committees: Dict[str, Committee] = field(default_factory=dict)


def write_metrics_csv(path: Union[str, Path], records: Sequence[MetricsRecord]) -> None:
    """metrics.csv; the violation count column is a per-instance average."""
    frame = pd.DataFrame([r.model_dump() for r in records])
    frame = frame.rename(columns={"num_ineq": "num_ineq_per_instance"})
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def write_curves_csv(path: Union[str, Path], curves: Sequence[Dict[str, object]]) -> None:
    pd.DataFrame(list(curves)).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def _labels_for(dataset: Dataset):
    return dataset.labels.batch if dataset.labels is not None else None


def run_experiment(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> ExperimentBundle:
    """Train every (config, variant, mode) combination and evaluate it.

    The training directory is split into train/validation/test parts under
    the training seed; every entry of ``test_dirs`` is evaluated in full as a
    cross-dataset test.
    """
    grid = get_grid(config.grid)
    source = load_dataset_dir(config.train_dir, grid)
    tests = [load_dataset_dir(d, grid) for d in config.test_dirs]
    bundle = ExperimentBundle()
    train_configs = config.train_configs()

    for sweep_id, base in enumerate(train_configs):
        positions = split_dataset(list(range(len(source.instances))), config.split, seed=base.seed)
        train_part = source.subset(positions[0], f"{source.name}:train")
        val_part = source.subset(positions[1], f"{source.name}:val")
        test_part = source.subset(positions[2], f"{source.name}:test")
        for mode in config.modes:
            if mode != "unsupervised" and source.labels is None:
                raise MissingLabels(f"mode '{mode}' needs {LABELS_FILE} in {config.train_dir}")
            for head in config.variants:
                cfg: TrainConfig = base.model_copy(update={"head": head, "mode": mode})
                name = variant_name(cfg) + (f"#{sweep_id}" if len(train_configs) > 1 else "")
                logger.info(f"Experiment run {name}")
                committee = train_committee(
                    grid,
                    cfg,
                    train_part.batch,
                    _labels_for(train_part),
                    val_part.batch if val_part.instances else None,
                    _labels_for(val_part),
                    eps=config.eps,
                )
                bundle.committees[name] = committee
                for k, run in enumerate(committee.runs):
                    bundle.curves.extend({"variant": name, "member": k, **point} for point in run.curve)
                for dataset in [test_part] + tests:
                    if not dataset.instances:
                        continue
                    record = committee.evaluate(dataset.batch, _labels_for(dataset), config.eps, dataset.name)
                    bundle.metrics.append(record.model_copy(update={"variant": name}))

    out = Path(output_dir or config.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", bundle.metrics)
    write_curves_csv(out / "curves.csv", bundle.curves)
    logger.info(f"Wrote {len(bundle.metrics)} metric rows to {out / 'metrics.csv'}")
    return bundle


class DispatchCache:
    """Fixed-topology solutions keyed by (instance position, closed switches)."""

    def __init__(self, solver: OracleSolver):
        self.solver = solver
        self._store: Dict[Tuple[int, Tuple[int, ...]], FixedTopologySolution] = {}

    def get(self, position: int, scenario: ScenarioInstance, topology: TopologyState) -> FixedTopologySolution:
        key = (position, tuple(closed_switch_ids(self.solver.grid, topology.y)))
        if key not in self._store:
            self._store[key] = self.solver.solve_fixed_topology(scenario, topology)
        return self._store[key]

    def all_topologies(self, position: int, scenario: ScenarioInstance) -> List[FixedTopologySolution]:
        return [self.get(position, scenario, t) for t in self.solver.topologies]


def _row(
    grid: GridModel,
    mode: str,
    topology: str,
    instances: Sequence[ScenarioInstance],
    solutions: Sequence[Optional[FixedTopologySolution]],
    hours: float,
) -> ReportRow:
    feasible = [(s, sol.state) for s, sol in zip(instances, solutions) if sol is not None and sol.ok]
    objective = sum(sol.objective for sol in solutions if sol is not None and sol.ok)
    states: List[PowerState] = [state for _, state in feasible]
    losses = float(sum(line_losses(grid, state) for state in states))
    magnitudes = np.array([state.voltage_magnitude for state in states]) if states else np.zeros((0, 1))
    available = sum(float(s.solar_cap.sum()) for s, _ in feasible)
    dispatched = sum(
        float(np.minimum(np.maximum(state.p_gen, 0.0), s.solar_cap)[s.solar_cap > 0].sum()) for s, state in feasible
    )
    return ReportRow(
        mode=mode,
        topology=topology,
        instances=len(instances),
        infeasible=len(instances) - len(feasible),
        objective_total=float(objective),
        losses_total_pu=losses,
        energy_loss_kwh=losses * grid.base_power * hours,
        undervoltage=int((magnitudes < UNDERVOLTAGE_PU).sum()),
        avg_voltage=float(magnitudes.mean()) if magnitudes.size else 0.0,
        pv_util=dispatched / available if available > 0 else None,
    )


def power_system_report(
    grid: GridModel,
    instances: Sequence[ScenarioInstance],
    modes: Sequence[str] = ("none", "static", "dynamic"),
    solver: Optional[OracleSolver] = None,
    hours: Optional[float] = None,
    cache: Optional[DispatchCache] = None,
) -> List[ReportRow]:
    """Compare no reconfiguration, the best static topology and per-instance optima.

    Topologies are ranked by the loss-proxy objective; reductions are relative
    to the no-reconfiguration physical losses. All three rows share one cache
    of fixed-topology solves.
    """
    if not instances:
        raise DatasetError("power-system report needs at least one scenario")
    solver = solver or OracleSolver(grid)
    cache = cache or DispatchCache(solver)
    hours = interval_hours(instances) if hours is None else hours
    rows: List[ReportRow] = []

    if "none" in modes:
        if is_radial(grid, grid.default_switch_state):
            topo = default_topology(grid)
            solutions = [cache.get(k, s, topo) for k, s in enumerate(instances)]
            label = ",".join(str(i) for i in closed_switch_ids(grid, topo.y))
            rows.append(_row(grid, "none", label, instances, solutions, hours))
        else:
            logger.warning(f"{grid.name}: default topology is not radial, skipping the no-reconfiguration row")

    if "static" in modes or "dynamic" in modes:
        table = [cache.all_topologies(k, s) for k, s in enumerate(instances)]

    if "static" in modes:
        scores = []
        for t, topo in enumerate(solver.topologies):
            column = [table[k][t] for k in range(len(instances))]
            infeasible = sum(not sol.ok for sol in column)
            total = sum(sol.objective for sol in column if sol.ok)
            scores.append((infeasible, total, column[0].closed_switches, t))
        _, _, closed, best_t = min(scores)
        column = [table[k][best_t] for k in range(len(instances))]
        rows.append(_row(grid, "static", ",".join(map(str, closed)), instances, column, hours))

    if "dynamic" in modes:
        best = []
        for k, scenario in enumerate(instances):
            feasible = [sol for sol in table[k] if sol.ok]
            best.append(select_best(feasible) if feasible else None)
            if not feasible:
                logger.warning(f"Scenario {scenario.index}: no feasible topology")
        rows.append(_row(grid, "dynamic", "per-instance", instances, best, hours))

    reference = next((r for r in rows if r.mode == "none"), None)
    if reference is not None and reference.losses_total_pu > 0:
        base = reference.losses_total_pu
        rows = [r.model_copy(update={"reduction_pct": 100.0 * (base - r.losses_total_pu) / base}) for r in rows]
    for r in rows:
        logger.info(f"{r.mode:>8}: objective {r.objective_total:.6g}, losses {r.energy_loss_kwh:.1f} kWh")
    return rows


def write_report_csv(path: Union[str, Path], rows: Sequence[ReportRow]) -> None:
    pd.DataFrame([r.model_dump() for r in rows]).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
