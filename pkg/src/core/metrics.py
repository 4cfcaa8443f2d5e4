"""Optimality, feasibility and power-system metrics for predicted decisions."""

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from ..models.decision import DecisionBatch
from ..models.grid import GridModel
from ..models.reports import INEQUALITY_CLASSES, MetricsRecord
from ..models.scenario import ScenarioBatch
from .constraints import evaluate_constraints
from .exceptions import MissingLabels
from .power_flow import line_losses

logger = logging.getLogger(__name__)

UNDERVOLTAGE_PU = 0.95


def disp_err(pred: DecisionBatch, labels: DecisionBatch) -> np.ndarray:
    """Per-instance (1/N) sum of squared P^G and Q^G errors."""
    n = pred.p_gen.shape[-1]
    return (((pred.p_gen - labels.p_gen) ** 2) + ((pred.q_gen - labels.q_gen) ** 2)).sum(-1) / n


def volt_err(pred: DecisionBatch, labels: DecisionBatch) -> np.ndarray:
    """Per-instance (1/N) sum of squared voltage-magnitude errors."""
    n = pred.v.shape[-1]
    return ((np.sqrt(np.maximum(pred.v, 0.0)) - np.sqrt(labels.v)) ** 2).sum(-1) / n


def top_err(pred: DecisionBatch, labels: DecisionBatch) -> np.ndarray:
    """Per-instance (1/M_sw) sum of squared switch-state errors.

    A recovered last switch can leave [0, 1]; states are clipped first.
    """
    m = pred.y.shape[-1]
    return ((np.clip(pred.y, 0.0, 1.0) - labels.y) ** 2).sum(-1) / m


def inequality_stats(
    grid: GridModel,
    scenarios: ScenarioBatch,
    pred: DecisionBatch,
    eps: float,
    big_m: float = 10.0,
    no_export: bool = False,
) -> Dict[str, np.ndarray]:
    """Per-instance mean, max and count-above-eps over inequality violations."""
    magnitudes = evaluate_constraints(grid, scenarios, pred, big_m=big_m, no_export=no_export)
    ineq = np.concatenate([magnitudes[c] for c in INEQUALITY_CLASSES if c in magnitudes], axis=1)
    return {
        "mean": ineq.mean(axis=1),
        "max": ineq.max(axis=1),
        "count": (ineq > eps).sum(axis=1).astype(float),
    }


def pv_utilization(scenarios: ScenarioBatch, pred: DecisionBatch) -> Optional[float]:
    """Dispatched solar over available solar; None when no solar is available."""
    available = scenarios.solar_cap
    total = float(available.sum())
    if total <= 0:
        return None
    dispatched = np.minimum(np.maximum(pred.p_gen, 0.0), available)
    return float(dispatched[available > 0].sum() / total)


def _aligned(pred: DecisionBatch, labels: Optional[DecisionBatch]) -> Optional[np.ndarray]:
    """Rows usable for optimality metrics, or None without labels."""
    if labels is None:
        return None
    if len(labels) != len(pred):
        raise MissingLabels(f"{len(labels)} labels for {len(pred)} predictions")
    return np.all(np.isfinite(labels.v), axis=1) & np.all(np.isfinite(labels.y), axis=1)


def eval_metrics(
    grid: GridModel,
    scenarios: ScenarioBatch,
    pred: DecisionBatch,
    labels: Optional[DecisionBatch] = None,
    eps: float = 1e-3,
    big_m: float = 10.0,
    no_export: bool = False,
    members: Sequence[DecisionBatch] = (),
    variant: str = "",
    dataset: str = "",
) -> MetricsRecord:
    """Metrics of ``pred`` against oracle ``labels``.

    Without labels only the feasibility and power-system fields are filled.
    When ``members`` is given, the best member (lowest TopErr, then DispErr)
    is reported alongside the ensemble.

    Raises:
        MissingLabels: if labels and predictions have different lengths
    """
    record: Dict[str, object] = {"variant": variant, "dataset": dataset, "instances": len(pred)}
    rows = _aligned(pred, labels)
    if rows is None:
        logger.warning("No labels given: skipping optimality metrics")
    elif not rows.any():
        logger.warning("Every label is infeasible: skipping optimality metrics")
    else:
        sub_pred, sub_labels = pred.take(rows), labels.take(rows)
        record["disp_err"] = float(disp_err(sub_pred, sub_labels).mean())
        record["volt_err"] = float(volt_err(sub_pred, sub_labels).mean())
        record["top_err"] = float(top_err(sub_pred, sub_labels).mean())
        if members:
            scores = []
            for member in members:
                sub = member.take(rows)
                scores.append((float(top_err(sub, sub_labels).mean()), float(disp_err(sub, sub_labels).mean())))
            best_top, best_disp = min(scores)
            record["top_err_best"] = best_top
            record["disp_err_best"] = best_disp

    stats = inequality_stats(grid, scenarios, pred, eps, big_m, no_export)
    record["mean_ineq"] = float(stats["mean"].mean())
    record["max_ineq"] = float(stats["max"].max())
    record["num_ineq"] = float(stats["count"].mean())

    magnitude = np.sqrt(np.maximum(pred.v, 0.0))
    record["line_losses"] = float(line_losses(grid, pred).mean())
    record["undervoltage"] = float((magnitude < UNDERVOLTAGE_PU).sum(axis=1).mean())
    record["avg_voltage"] = float(magnitude.mean())
    record["pv_util"] = pv_utilization(scenarios, pred)
    return MetricsRecord(**record)
