"""Scenario instances and dataset requests."""

from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


@dataclass(frozen=True)
class ScenarioInstance:
    """One time step of the dataset, all quantities in pu.

    ``p_gen_cap`` is the total active-power cap per node: substation supply
    plus available solar. ``solar_cap`` keeps the solar part alone for PV
    utilization. ``x`` is the network input: P^L then Q^L over non-PCC nodes
    in ascending node order.
    """

    index: int
    timestamp: float
    p_load: np.ndarray
    q_load: np.ndarray
    p_gen_cap: np.ndarray
    q_gen_lo: np.ndarray
    q_gen_hi: np.ndarray
    solar_cap: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class ScenarioBatch:
    """Stacked scenario arrays with a leading batch axis."""

    p_load: np.ndarray
    q_load: np.ndarray
    p_gen_cap: np.ndarray
    q_gen_lo: np.ndarray
    q_gen_hi: np.ndarray
    solar_cap: np.ndarray
    x: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_instances(cls, instances: List[ScenarioInstance]) -> "ScenarioBatch":
        return cls(
            p_load=np.stack([s.p_load for s in instances]),
            q_load=np.stack([s.q_load for s in instances]),
            p_gen_cap=np.stack([s.p_gen_cap for s in instances]),
            q_gen_lo=np.stack([s.q_gen_lo for s in instances]),
            q_gen_hi=np.stack([s.q_gen_hi for s in instances]),
            solar_cap=np.stack([s.solar_cap for s in instances]),
            x=np.stack([s.x for s in instances]),
        )

    def take(self, rows: np.ndarray) -> "ScenarioBatch":
        return ScenarioBatch(
            p_load=self.p_load[rows],
            q_load=self.q_load[rows],
            p_gen_cap=self.p_gen_cap[rows],
            q_gen_lo=self.q_gen_lo[rows],
            q_gen_hi=self.q_gen_hi[rows],
            solar_cap=self.solar_cap[rows],
            x=self.x[rows],
        )


class DatasetSpec(BaseModel):
    """Request for a generated dataset."""

    model_config = ConfigDict(frozen=True)

    grid: Literal["bw33", "tpc94"] = "bw33"
    load_mode: Literal["perturbed", "residential", "mixed"] = "perturbed"
    solar_layout: str = Field("DD-U", description="Layout id, or 'none' for no solar")
    solar_mode: Literal["profile", "flat", "none"] = "profile"
    count: int = Field(..., ge=0, description="Number of instances")
    seed: int = 0
    start_day: int = Field(0, ge=0)
    interval_minutes: Optional[int] = Field(
        None, gt=0, description="Defaults to 60 for bw33 and 5 for tpc94"
    )
    noise: float = Field(0.05, ge=0, lt=1, description="Multiplicative profile noise")
    delta_lo: float = Field(0.3, ge=0)
    delta_hi: float = Field(1.7, gt=0)

    @model_validator(mode="after")
    def _delta_range(self) -> "DatasetSpec":
        if self.delta_lo > self.delta_hi:
            raise ValueError("delta_lo must not exceed delta_hi")
        return self

    @property
    def interval_hours(self) -> float:
        minutes = self.interval_minutes or (60 if self.grid == "bw33" else 5)
        return minutes / 60.0
