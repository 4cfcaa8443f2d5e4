"""Result records: subproblem solutions, violations, metrics and warm starts."""

from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from ..core.exceptions import InfeasibleDispatch, MaxIterations
from .decision import PowerState, TopologyState

ConstraintClass = Literal[
    "ohm-switch",
    "flow-existence",
    "gen-limit",
    "voltage",
    "connectivity",
    "no-export",
    "equality",
    "integrality",
]

# Classes counted as inequality violations in mean/max/count statistics.
INEQUALITY_CLASSES = (
    "ohm-switch",
    "flow-existence",
    "gen-limit",
    "voltage",
    "connectivity",
    "no-export",
)


@dataclass(frozen=True)
class FixedTopologySolution:
    """Optimal dispatch for one radial topology."""

    topology: TopologyState
    state: Optional[PowerState]
    objective: float
    kkt_residual: float
    status: Literal["optimal", "infeasible", "max_iter"]
    closed_switches: Tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def raise_for_status(self) -> None:
        if self.status == "infeasible":
            raise InfeasibleDispatch(f"no feasible dispatch for switches {self.closed_switches}")
        if self.status == "max_iter":
            raise MaxIterations(f"subproblem for switches {self.closed_switches} hit the cap")


class ViolationEntry(BaseModel):
    """One violated constraint."""

    constraint_id: str
    cls: ConstraintClass
    magnitude: float = Field(..., ge=0)


class ViolationReport(BaseModel):
    """Constraint violations of a decision vector."""

    entries: List[ViolationEntry] = Field(default_factory=list)
    eps: float
    inequality_count: int = Field(..., ge=0, description="|h_x|")
    mean_violation: float = Field(0.0, ge=0)
    max_violation: float = Field(0.0, ge=0)
    count_above_eps: int = Field(0, ge=0)
    class_max: Dict[str, float] = Field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not self.entries

    def by_class(self, cls: str) -> List[ViolationEntry]:
        return [entry for entry in self.entries if entry.cls == cls]


class MetricsRecord(BaseModel):
    """Optimality, feasibility and power-system metrics over a test set."""

    variant: str = ""
    dataset: str = ""
    instances: int = Field(0, ge=0)
    disp_err: Optional[float] = Field(None, ge=0)
    volt_err: Optional[float] = Field(None, ge=0)
    top_err: Optional[float] = Field(None, ge=0, le=1)
    disp_err_best: Optional[float] = Field(None, ge=0)
    top_err_best: Optional[float] = Field(None, ge=0, le=1)
    mean_ineq: float = Field(0.0, ge=0)
    max_ineq: float = Field(0.0, ge=0)
    num_ineq: float = Field(0.0, ge=0, description="Per-instance average count above eps")
    line_losses: float = Field(0.0, ge=0)
    undervoltage: float = Field(0.0, ge=0, description="Per-instance average of nodes below 0.95 pu")
    avg_voltage: float = Field(0.0, ge=0)
    pv_util: Optional[float] = Field(None, ge=0)


class WarmStartRecord(BaseModel):
    """Warm-start point: dispatch, voltages, switch and direction binaries."""

    variables: Dict[str, float] = Field(default_factory=dict)
    omitted: List[str] = Field(default_factory=list)

    def to_text(self) -> str:
        from ..utils.kv_format import dump_kv

        return dump_kv(self.variables, comments=[f"omitted: {name}" for name in self.omitted])

    @classmethod
    def from_text(cls, text: str) -> "WarmStartRecord":
        from ..utils.kv_format import parse_kv

        values, comments = parse_kv(text, keep_comments=True)
        omitted = [c.split(":", 1)[1].strip() for c in comments if c.startswith("omitted:")]
        return cls(variables={k: float(v) for k, v in values.items()}, omitted=omitted)


class ReportRow(BaseModel):
    """One reconfiguration regime in the power-system comparison.

    Static and dynamic topologies are chosen by ``objective_total``, the
    R(P^2 + Q^2) proxy. ``losses_total_pu`` and ``reduction_pct`` report the
    physical losses of that choice, so only the objective is ordered across
    regimes.
    """

    mode: Literal["none", "static", "dynamic"]
    topology: str
    instances: int
    infeasible: int = 0
    objective_total: float
    losses_total_pu: float
    energy_loss_kwh: float
    reduction_pct: Optional[float] = None
    undervoltage: int = 0
    avg_voltage: float = 0.0
    pv_util: Optional[float] = None
