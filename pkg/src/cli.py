"""Command-line entry point.

Usage: python -m src.cli [global flags] <command> [options]

Commands:
- generate: build a scenario dataset into a directory (scenarios.csv)
- label: solve every scenario with the enumeration oracle (labels.csv)
- train: train a committee and write checkpoint.npz and curves.csv
- eval: evaluate a checkpoint on a dataset (metrics.csv)
- report: compare no reconfiguration, static and dynamic regimes (report.csv)
- warmstart: export a warm-start record for one scenario
- experiment: run a variant/mode sweep from a config file
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .core.exceptions import ReconfigError
from .core.experiment import (
    LABELS_FILE,
    SCENARIOS_FILE,
    load_dataset_dir,
    power_system_report,
    run_experiment,
    write_curves_csv,
    write_metrics_csv,
    write_report_csv,
)
from .core.grid_data import get_grid
from .core.labels import label_dataset, save_labels
from .core.oracle import OracleSolver, export_warmstart
from .core.run_config import RunSettings, load_dataset_spec, load_experiment_config, load_train_config
from .core.scenario_data import build_dataset, save_scenarios, split_dataset
from .core.training import load_committee, save_committee, train_committee
from .models.scenario import DatasetSpec, ScenarioBatch
from .models.training import TrainConfig

logger = logging.getLogger(__name__)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reconfig", description="Learning-based grid reconfiguration")
    parser.add_argument("--seed", type=int, help="Random seed (RECONFIG_SEED)")
    parser.add_argument("--eps", type=float, help="Violation threshold (RECONFIG_EPS)")
    parser.add_argument("--big-m", type=float, help="Big-M constant (RECONFIG_BIG_M)")
    parser.add_argument("--no-export", action="store_true", default=None, help="Forbid export at the PCC")
    parser.add_argument("--log-level", help="Logging level (RECONFIG_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate a scenario dataset")
    gen.add_argument("out", help="Dataset directory")
    gen.add_argument("--config", help="key=value DatasetSpec file")
    gen.add_argument("--grid")
    gen.add_argument("--count", type=int)
    gen.add_argument("--load-mode")
    gen.add_argument("--solar-layout")
    gen.add_argument("--solar-mode")

    lab = sub.add_parser("label", help="Label a dataset with oracle optima")
    lab.add_argument("dataset")
    lab.add_argument("--grid", default="bw33")

    tr = sub.add_parser("train", help="Train a committee on a dataset")
    tr.add_argument("dataset")
    tr.add_argument("--grid", default="bw33")
    tr.add_argument("--config", help="key=value TrainConfig file")
    tr.add_argument("--head")
    tr.add_argument("--mode")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--committee", type=int)
    tr.add_argument("--out", help="Output directory (RECONFIG_OUTPUT_DIR)")

    ev = sub.add_parser("eval", help="Evaluate a checkpoint")
    ev.add_argument("dataset")
    ev.add_argument("--checkpoint", help="Committee checkpoint (RECONFIG_CHECKPOINT)")
    ev.add_argument("--part", choices=("all", "test"), default="all")
    ev.add_argument("--out")

    rep = sub.add_parser("report", help="Power-system comparison of reconfiguration regimes")
    rep.add_argument("dataset")
    rep.add_argument("--grid", default="bw33")
    rep.add_argument("--modes", default="none,static,dynamic")
    rep.add_argument("--out")

    ws = sub.add_parser("warmstart", help="Export a warm-start record from a prediction")
    ws.add_argument("dataset")
    ws.add_argument("--row", type=int, default=0)
    ws.add_argument("--checkpoint")
    ws.add_argument("--out", help="Record file; stdout when omitted")

    ex = sub.add_parser("experiment", help="Run an experiment sweep")
    ex.add_argument("config")
    ex.add_argument("--out")
    return parser


def _settings(args: argparse.Namespace) -> RunSettings:
    settings = RunSettings.from_env()
    updates = {
        "seed": args.seed,
        "eps": args.eps,
        "big_m": args.big_m,
        "no_export": args.no_export,
        "log_level": args.log_level,
    }
    return settings.model_copy(update={k: v for k, v in updates.items() if v is not None})


def cmd_generate(args, settings: RunSettings) -> None:
    overrides = {
        "grid": args.grid,
        "count": args.count,
        "load_mode": args.load_mode,
        "solar_layout": args.solar_layout,
        "solar_mode": args.solar_mode,
        "seed": args.seed if args.config else settings.seed,
    }
    if args.config:
        spec = load_dataset_spec(args.config, **overrides)
    else:
        spec = DatasetSpec(**{k: v for k, v in overrides.items() if v is not None})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = get_grid(spec.grid)
    save_scenarios(out / SCENARIOS_FILE, grid, build_dataset(spec, grid))


def cmd_label(args, settings: RunSettings) -> None:
    grid = get_grid(args.grid)
    dataset = load_dataset_dir(args.dataset, grid)
    solver = OracleSolver(grid, no_export=settings.no_export, big_m=settings.big_m)
    labels = label_dataset(grid, dataset.instances, solver)
    save_labels(Path(args.dataset) / LABELS_FILE, grid, dataset.instances, labels)


def _train_config(args, settings: RunSettings) -> TrainConfig:
    overrides = {
        "head": args.head,
        "mode": args.mode,
        "epochs": args.epochs,
        "committee": args.committee,
        "seed": args.seed if args.config else settings.seed,
        "big_m": settings.big_m,
        "no_export": settings.no_export,
    }
    if args.config:
        return load_train_config(args.config, **overrides)
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_train(args, settings: RunSettings) -> None:
    grid = get_grid(args.grid)
    config = _train_config(args, settings)
    dataset = load_dataset_dir(args.dataset, grid)
    train_pos, val_pos, _ = split_dataset(list(range(len(dataset.instances))), seed=config.seed)
    train, val = dataset.subset(train_pos, "train"), dataset.subset(val_pos, "val")
    committee = train_committee(
        grid,
        config,
        train.batch,
        train.labels.batch if train.labels is not None else None,
        val.batch if val.instances else None,
        val.labels.batch if val.labels is not None and val.instances else None,
        eps=settings.eps,
    )
    out = Path(args.out or settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_committee(out / "checkpoint.npz", committee)
    write_curves_csv(
        out / "curves.csv",
        [{"member": k, **point} for k, run in enumerate(committee.runs) for point in run.curve],
    )


def _committee(args, settings: RunSettings):
    path = args.checkpoint or settings.checkpoint
    if not path:
        raise ReconfigError("no checkpoint given (use --checkpoint or RECONFIG_CHECKPOINT)")
    return load_committee(path)


def cmd_eval(args, settings: RunSettings) -> None:
    committee = _committee(args, settings)
    dataset = load_dataset_dir(args.dataset, committee.grid)
    if args.part == "test":
        _, _, test_pos = split_dataset(list(range(len(dataset.instances))), seed=committee.config.seed)
        dataset = dataset.subset(test_pos, f"{dataset.name}:test")
    labels = dataset.labels.batch if dataset.labels is not None else None
    record = committee.evaluate(dataset.batch, labels, settings.eps, dataset.name)
    out = Path(args.out or settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", [record])


def cmd_report(args, settings: RunSettings) -> None:
    grid = get_grid(args.grid)
    dataset = load_dataset_dir(args.dataset, grid)
    solver = OracleSolver(grid, no_export=settings.no_export, big_m=settings.big_m)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    rows = power_system_report(grid, dataset.instances, modes, solver)
    out = Path(args.out or settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", rows)


def cmd_warmstart(args, settings: RunSettings) -> None:
    committee = _committee(args, settings)
    grid = committee.grid
    dataset = load_dataset_dir(args.dataset, grid)
    if not 0 <= args.row < len(dataset.instances):
        raise ReconfigError(f"row {args.row} outside dataset of {len(dataset.instances)}")
    scenario = dataset.instances[args.row]
    psi = committee.predict(ScenarioBatch.from_instances([scenario]))[0]
    record = export_warmstart(grid, scenario, psi, big_m=settings.big_m, no_export=settings.no_export)
    text = record.to_text()
    if args.out:
        Path(args.out).write_text(text)
        logger.info(f"Wrote warm start with {len(record.variables)} variables to {args.out}")
    else:
        sys.stdout.write(text)


def cmd_experiment(args, settings: RunSettings) -> None:
    config = load_experiment_config(args.config)
    run_experiment(config, args.out or config.output_dir or settings.output_dir)


COMMANDS = {
    "generate": cmd_generate,
    "label": cmd_label,
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "warmstart": cmd_warmstart,
    "experiment": cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        settings = _settings(args)
    except ValidationError as e:
        print(f"error: invalid settings: {e.errors()[0]['msg']}", file=sys.stderr)
        return 2
    logging.basicConfig(level=settings.log_level.upper(), format="[%(levelname)s] %(message)s")
    try:
        COMMANDS[args.command](args, settings)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        print(f"error: invalid value for {location}: {first['msg']}", file=sys.stderr)
        return 2
    except ReconfigError as e:
        logger.error(f"{args.command} failed: {e}")
        logger.exception("Full traceback:")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
