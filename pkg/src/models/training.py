"""Training and experiment configuration models."""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

HeadVariant = Literal["SiPhyR", "ClaPhyR", "InSiPhyR", "InSi", "InSi2R"]
TrainMode = Literal["unsupervised", "supervised", "supervised-pen"]

HEAD_VARIANTS: Tuple[str, ...] = ("SiPhyR", "ClaPhyR", "InSiPhyR", "InSi", "InSi2R")
PHYR_HEADS: Tuple[str, ...] = ("SiPhyR", "ClaPhyR", "InSiPhyR")


class TrainConfig(BaseModel):
    """Hyperparameters of one committee training run."""

    model_config = ConfigDict(frozen=True)

    epochs: int = Field(1500, gt=0)
    batch_size: int = Field(200, gt=1)
    learning_rate: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    lambda_h: float = Field(100.0, ge=0, description="Weight of the squared-hinge penalty")
    hidden: int = Field(5, gt=0, description="Width of both hidden layers")
    committee: int = Field(10, ge=1)
    seed: int = 0
    mode: TrainMode = "unsupervised"
    head: HeadVariant = "SiPhyR"
    big_m: float = Field(10.0, gt=0)
    flow_cap: float = Field(10.0, gt=0, description="Upper box for predicted flows (pu)")
    no_export: bool = False
    log_every: int = Field(100, gt=0)
    curve_every: int = Field(10, gt=0, description="Epochs between validation curve points")

    @property
    def uses_phyr(self) -> bool:
        return self.head in PHYR_HEADS


class ExperimentConfig(BaseModel):
    """A sweep of head variants and supervision modes over stored datasets.

    Each dataset is a directory holding ``scenarios.csv`` and, for supervised
    modes or optimality metrics, ``labels.csv``.
    """

    grid: Literal["bw33", "tpc94"] = "bw33"
    train_dir: str
    test_dirs: List[str] = Field(default_factory=list)
    variants: List[HeadVariant] = Field(default_factory=lambda: ["SiPhyR"])
    modes: List[TrainMode] = Field(default_factory=lambda: ["unsupervised"])
    split: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    eps: float = Field(1e-3, gt=0)
    train: TrainConfig = Field(default_factory=TrainConfig)
    sweep: List[TrainConfig] = Field(default_factory=list)
    output_dir: Optional[str] = None

    @field_validator("variants", "modes", "test_dirs", mode="before")
    @classmethod
    def _split_commas(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("split", mode="before")
    @classmethod
    def _split_ratios(cls, value):
        if isinstance(value, str):
            return tuple(float(item) for item in value.split(","))
        return value

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if not self.variants or not self.modes:
            raise ValueError("an experiment needs at least one variant and one mode")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split}")
        return self

    def train_configs(self) -> List[TrainConfig]:
        """Hyperparameter alternatives; the base config when no sweep is set."""
        return list(self.sweep) or [self.train]
