"""Run settings from the environment and key=value config files."""

import itertools
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from ..models.scenario import DatasetSpec
from ..models.training import ExperimentConfig, TrainConfig
from ..utils.kv_format import read_kv_file

logger = logging.getLogger(__name__)

SWEEP_SEPARATOR = "|"


class RunSettings(BaseModel):
    """Global knobs shared by the CLI and the API."""

    seed: int = 0
    eps: float = Field(1e-3, gt=0)
    big_m: float = Field(10.0, gt=0)
    no_export: bool = False
    output_dir: str = "./runs"
    checkpoint: Optional[str] = None
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "RunSettings":
        """Read ``RECONFIG_*`` variables, loading a .env file first if present."""
        load_dotenv()
        values = {
            "seed": os.getenv("RECONFIG_SEED"),
            "eps": os.getenv("RECONFIG_EPS"),
            "big_m": os.getenv("RECONFIG_BIG_M"),
            "no_export": os.getenv("RECONFIG_NO_EXPORT"),
            "output_dir": os.getenv("RECONFIG_OUTPUT_DIR"),
            "checkpoint": os.getenv("RECONFIG_CHECKPOINT"),
            "log_level": os.getenv("RECONFIG_LOG_LEVEL"),
        }
        return cls(**{k: v for k, v in values.items() if v not in (None, "")})


def load_dataset_spec(path: Union[str, Path], **overrides) -> DatasetSpec:
    values = read_kv_file(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return DatasetSpec(**values)


def expand_sweep(values: Dict[str, str]) -> List[Dict[str, str]]:
    """One mapping per combination of ``a|b`` alternatives, in file order."""
    keys = list(values)
    options = [str(values[k]).split(SWEEP_SEPARATOR) for k in keys]
    return [dict(zip(keys, (o.strip() for o in combo))) for combo in itertools.product(*options)]


def load_train_config(path: Union[str, Path], **overrides) -> TrainConfig:
    values = read_kv_file(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def load_experiment_config(path: Union[str, Path], **overrides) -> ExperimentConfig:
    """Experiment keys and TrainConfig keys share one flat file.

    TrainConfig values may carry ``|`` alternatives; each combination becomes
    one entry of the sweep.
    """
    values = read_kv_file(path)
    values.update({k: v for k, v in overrides.items() if v is not None})
    train_keys = set(TrainConfig.model_fields)
    train_values = {k: v for k, v in values.items() if k in train_keys}
    experiment_values = {k: v for k, v in values.items() if k not in train_keys}
    combos = expand_sweep(train_values)
    configs = [TrainConfig(**combo) for combo in combos]
    if len(configs) > 1:
        logger.info(f"Hyperparameter sweep with {len(configs)} configurations")
    return ExperimentConfig(
        train=configs[0],
        sweep=configs if len(configs) > 1 else [],
        **experiment_values,
    )
