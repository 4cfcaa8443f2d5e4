"""Prediction pipeline, training loops, committees and checkpoints.

The pipeline chains the network, the switch head (sigmoid, clamp or InSi,
optionally followed by physics-informed rounding), InSi direction
indicators, box scaling and completion. ``Pipeline.backward`` walks the same
chain in reverse with the rounding permutation frozen from the forward pass.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.decision import DecisionBatch
from ..models.grid import GridModel
from ..models.reports import MetricsRecord
from ..models.scenario import ScenarioBatch
from ..models.training import TrainConfig
from .completion import (
    STATE_FIELDS,
    BoxBounds,
    IndexMap,
    assemble_backward,
    assemble_independents,
    complete,
    complete_backward,
    penalty_with_grad,
    supervised_loss,
    training_loss,
)
from .exceptions import BatchTooSmall, CheckpointError, DimensionMismatch, MissingLabels
from .metrics import eval_metrics
from .neural import MLP, Adam, ForwardCache
from .phyr import (
    RoundingPlan,
    clamp01,
    clamp01_grad,
    insi,
    insi_grad,
    phyr_backward,
    phyr_round,
    sigmoid,
    sigmoid_grad,
)

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

_SQUASH = {
    "SiPhyR": (sigmoid, sigmoid_grad),
    "ClaPhyR": (clamp01, clamp01_grad),
    "InSiPhyR": (insi, insi_grad),
    "InSi": (insi, insi_grad),
    "InSi2R": (insi, insi_grad),
}


@dataclass
class PipelineCache:
    """Everything ``Pipeline.backward`` needs from a forward pass."""

    raw: np.ndarray
    net: Optional[ForwardCache]
    plan: Optional[RoundingPlan]
    batch: DecisionBatch


class Pipeline:
    """Network outputs to completed decisions for one grid and head variant."""

    def __init__(self, grid: GridModel, config: TrainConfig):
        self.grid = grid
        self.config = config
        self.imap = IndexMap(grid)
        self.bounds = BoxBounds.for_grid(grid, config.flow_cap)
        self.squash, self.squash_grad = _SQUASH[config.head]

    @property
    def recover_last(self) -> bool:
        return not self.config.uses_phyr

    def new_model(self, seed: int) -> MLP:
        return MLP(self.imap.input_size, self.config.hidden, self.imap.output_size, seed=seed)

    def probabilities(self, raw: np.ndarray) -> np.ndarray:
        """Switch-closing probabilities before rounding."""
        return self.squash(raw[..., self.imap.output["switch"]])

    def decode(
        self,
        raw: np.ndarray,
        probs: np.ndarray,
        scenarios: ScenarioBatch,
        training: bool,
    ) -> Tuple[DecisionBatch, Optional[RoundingPlan]]:
        """Round, scale and complete; ``probs`` may be an ensemble average."""
        plan = None
        cutoff = self.imap.cutoff
        if self.config.uses_phyr:
            y, plan = phyr_round(probs, cutoff, "train" if training else "inference")
        elif self.config.head == "InSi2R" and not training:
            y = (probs >= 0.5).astype(float)
        else:
            y = probs
        z_ji = insi(raw[..., self.imap.output["direction"]])
        ind = assemble_independents(self.imap, raw, y, z_ji, scenarios, self.bounds)
        return complete(self.grid, ind, recover_last=self.recover_last), plan

    def forward(self, model: MLP, scenarios: ScenarioBatch, training: bool) -> PipelineCache:
        raw, net = model.forward(scenarios.x, "train" if training else "eval")
        if raw.shape[-1] != self.imap.output_size:
            raise DimensionMismatch(f"model emits {raw.shape[-1]} outputs, grid needs {self.imap.output_size}")
        batch, plan = self.decode(raw, self.probabilities(raw), scenarios, training)
        return PipelineCache(raw=raw, net=net, plan=plan, batch=batch)

    def backward(self, cache: PipelineCache, grads: Dict[str, np.ndarray]) -> np.ndarray:
        """Gradient of the loss with respect to the raw network outputs."""
        g = complete_backward(self.grid, grads, recover_last=self.recover_last)
        d_raw = assemble_backward(self.imap, cache.raw, g, self.bounds)
        direction = self.imap.output["direction"]
        d_raw[..., direction] = g.z_ji * insi_grad(cache.raw[..., direction])
        d_probs = phyr_backward(g.y, cache.plan) if cache.plan is not None else g.y
        switch = self.imap.output["switch"]
        d_raw[..., switch] = d_probs * self.squash_grad(cache.raw[..., switch])
        return d_raw

    def loss(
        self,
        scenarios: ScenarioBatch,
        batch: DecisionBatch,
        labels: Optional[DecisionBatch] = None,
    ) -> Tuple[float, Dict[str, np.ndarray]]:
        """Loss of the configured supervision mode and its gradient on the batch."""
        cfg = self.config
        if cfg.mode == "unsupervised":
            return training_loss(
                self.grid, scenarios, batch, cfg.lambda_h, cfg.big_m, cfg.no_export, self.recover_last
            )
        if labels is None:
            raise MissingLabels(f"training mode '{cfg.mode}' needs oracle labels")
        value, grads = supervised_loss(batch, labels)
        if cfg.mode == "supervised-pen" and cfg.lambda_h:
            pen, pen_grads = penalty_with_grad(
                self.grid, scenarios, batch, cfg.big_m, cfg.no_export, self.recover_last
            )
            size = len(batch)
            value += cfg.lambda_h * float(pen.mean())
            grads = {k: grads[k] + cfg.lambda_h * pen_grads[k] / size for k in STATE_FIELDS}
        return value, grads

    def loss_and_grads(
        self,
        model: MLP,
        scenarios: ScenarioBatch,
        labels: Optional[DecisionBatch] = None,
    ) -> Tuple[float, Dict[str, np.ndarray], PipelineCache]:
        """Train-mode loss and parameter gradients for one minibatch."""
        cache = self.forward(model, scenarios, training=True)
        value, grads = self.loss(scenarios, cache.batch, labels)
        d_raw = self.backward(cache, grads)
        return value, model.backward(d_raw, cache.net), cache


@dataclass
class TrainingRun:
    """A trained member and its learning curve."""

    model: MLP
    seed: int
    curve: List[Dict[str, float]] = field(default_factory=list)


def _minibatches(count: int, size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(count)
    batches = [order[k : k + size] for k in range(0, count, size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def train_model(
    grid: GridModel,
    config: TrainConfig,
    train: ScenarioBatch,
    labels: Optional[DecisionBatch] = None,
    validation: Optional[ScenarioBatch] = None,
    validation_labels: Optional[DecisionBatch] = None,
    seed: Optional[int] = None,
    eps: float = 1e-3,
) -> TrainingRun:
    """Train one network with ADAM on shuffled minibatches.

    Raises:
        BatchTooSmall: if the training set has fewer than two rows
        MissingLabels: supervised modes without aligned labels
    """
    seed = config.seed if seed is None else seed
    if len(train) < 2:
        raise BatchTooSmall("training needs at least two scenarios")
    if labels is not None and len(labels) != len(train):
        raise MissingLabels(f"{len(labels)} labels for {len(train)} training scenarios")
    if config.mode != "unsupervised":
        if labels is None:
            raise MissingLabels(f"training mode '{config.mode}' needs oracle labels")
        solved = np.all(np.isfinite(labels.v), axis=1)
        if not solved.all():
            logger.warning(f"Dropping {int((~solved).sum())} scenarios without a feasible label")
            train, labels = train.take(solved), labels.take(solved)
        if len(train) < 2:
            raise BatchTooSmall("fewer than two labelled training scenarios")
    pipeline = Pipeline(grid, config)
    model = pipeline.new_model(seed)
    adam = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng(seed)
    run = TrainingRun(model=model, seed=seed)
    monitor = validation if validation is not None and len(validation) else train
    monitor_labels = validation_labels if validation is not None and len(validation) else labels

    for epoch in range(1, config.epochs + 1):
        losses = []
        for rows in _minibatches(len(train), config.batch_size, rng):
            value, grads, cache = pipeline.loss_and_grads(
                model, train.take(rows), labels.take(rows) if labels is not None else None
            )
            model.update_running_stats(cache.net)
            adam.step(model.params, grads)
            losses.append(value)
        loss = float(np.mean(losses))
        if epoch % config.curve_every == 0 or epoch == config.epochs:
            pred = pipeline.forward(model, monitor, training=False).batch
            record = eval_metrics(
                grid, monitor, pred, monitor_labels, eps=eps, big_m=config.big_m, no_export=config.no_export
            )
            run.curve.append(
                {
                    "epoch": epoch,
                    "loss": loss,
                    "top_err": np.nan if record.top_err is None else record.top_err,
                    "disp_err": np.nan if record.disp_err is None else record.disp_err,
                    "mean_ineq": record.mean_ineq,
                    "max_ineq": record.max_ineq,
                    "num_ineq": record.num_ineq,
                }
            )
        if epoch % config.log_every == 0:
            logger.info(f"[seed {seed}] epoch {epoch}/{config.epochs} loss {loss:.6g}")
    return run


class Committee:
    """Independently seeded members whose outputs are averaged.

    Switch probabilities are averaged before rounding and raw continuous and
    direction outputs before scaling, so the ensemble still rounds to hard
    switch states.
    """

    def __init__(self, grid: GridModel, config: TrainConfig, runs: Sequence[TrainingRun]):
        if not runs:
            raise ValueError("a committee needs at least one member")
        self.grid = grid
        self.config = config
        self.runs = list(runs)
        self.pipeline = Pipeline(grid, config)

    @property
    def members(self) -> List[MLP]:
        return [run.model for run in self.runs]

    def predict_member(self, k: int, scenarios: ScenarioBatch) -> DecisionBatch:
        return self.pipeline.forward(self.members[k], scenarios, training=False).batch

    def predict(self, scenarios: ScenarioBatch) -> DecisionBatch:
        raws = [model.forward(scenarios.x, "eval")[0] for model in self.members]
        probs = np.mean([self.pipeline.probabilities(raw) for raw in raws], axis=0)
        raw = np.mean(raws, axis=0)
        batch, _ = self.pipeline.decode(raw, probs, scenarios, training=False)
        return batch

    def evaluate(
        self,
        scenarios: ScenarioBatch,
        labels: Optional[DecisionBatch] = None,
        eps: float = 1e-3,
        dataset: str = "",
    ) -> MetricsRecord:
        """Ensemble metrics with best-member optimality fields."""
        members = [self.predict_member(k, scenarios) for k in range(len(self.runs))]
        return eval_metrics(
            self.grid,
            scenarios,
            self.predict(scenarios),
            labels,
            eps=eps,
            big_m=self.config.big_m,
            no_export=self.config.no_export,
            members=members if labels is not None else (),
            variant=variant_name(self.config),
            dataset=dataset,
        )


def variant_name(config: TrainConfig) -> str:
    """Row label such as ``SiPhyR`` or ``Supervised-pen-InSi``."""
    if config.mode == "unsupervised":
        return config.head
    prefix = "Supervised" if config.mode == "supervised" else "Supervised-pen"
    return f"{prefix}-{config.head}"


def train_committee(
    grid: GridModel,
    config: TrainConfig,
    train: ScenarioBatch,
    labels: Optional[DecisionBatch] = None,
    validation: Optional[ScenarioBatch] = None,
    validation_labels: Optional[DecisionBatch] = None,
    eps: float = 1e-3,
) -> Committee:
    """Train ``config.committee`` members with seeds seed, seed+1, ..."""
    runs = []
    for k in range(config.committee):
        member_seed = config.seed + k
        logger.info(f"Training {variant_name(config)} member {k + 1}/{config.committee} (seed {member_seed})")
        runs.append(
            train_model(grid, config, train, labels, validation, validation_labels, seed=member_seed, eps=eps)
        )
    return Committee(grid, config, runs)


def save_committee(path: Union[str, Path], committee: Committee) -> None:
    """Write the committee as one .npz with a JSON header."""
    header = {
        "version": CHECKPOINT_VERSION,
        "grid": committee.grid.name,
        "config": committee.config.model_dump(),
        "seeds": [run.seed for run in committee.runs],
        "sizes": list(committee.members[0].sizes),
    }
    arrays = {"header": np.array(json.dumps(header, sort_keys=True))}
    for k, model in enumerate(committee.members):
        for name, tensor in model.tensors().items():
            arrays[f"m{k}/{name}"] = tensor
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    logger.info(f"Saved {len(committee.runs)}-member committee to {path}")


def load_committee(path: Union[str, Path], grid: Optional[GridModel] = None) -> Committee:
    """
    Raises:
        CheckpointError: unreadable file, wrong version or grid mismatch
    """
    from .grid_data import get_grid

    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            tensors = {name: data[name] for name in data.files if name != "header"}
    except (OSError, ValueError, KeyError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {header.get('version')} is not supported")
    grid = grid or get_grid(header["grid"])
    if grid.name != header["grid"]:
        raise CheckpointError(f"checkpoint is for grid {header['grid']}, not {grid.name}")
    config = TrainConfig(**header["config"])
    sizes = tuple(header["sizes"])
    runs = []
    for k, seed in enumerate(header["seeds"]):
        prefix = f"m{k}/"
        member = {name[len(prefix) :]: t for name, t in tensors.items() if name.startswith(prefix)}
        try:
            runs.append(TrainingRun(model=MLP.from_tensors(sizes, member), seed=seed))
        except KeyError as e:
            raise CheckpointError(f"checkpoint member {k} lacks tensor {e}") from e
    return Committee(grid, config, runs)
