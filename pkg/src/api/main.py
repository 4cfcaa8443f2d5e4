"""FastAPI application for the Grid Reconfiguration Engine.

The application exposes the following endpoints:
- GET /health: Health check endpoint
- GET /: Root endpoint
- GET /grids/{name}: Grid summary with the radiality cutoff and topology count
- POST /optimize: Exact reconfiguration of one scenario by topology enumeration
- POST /predict: Committee prediction for one scenario, with a warm-start record

/predict serves the committee checkpoint named by RECONFIG_CHECKPOINT and
answers 503 when none is configured.
"""

import logging
from functools import lru_cache
from typing import Dict, List, Literal, Optional

import numpy as np
from dotenv import load_dotenv
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..core.exceptions import ReconfigError
from ..core.grid_data import get_grid
from ..core.oracle import OracleSolver, check_feasibility, export_warmstart
from ..core.run_config import RunSettings
from ..core.scenario_data import make_instance
from ..core.topology import closed_switch_ids, cutoff_L
from ..core.training import Committee, load_committee
from ..models.decision import DecisionVector
from ..models.grid import GridModel
from ..models.scenario import ScenarioBatch, ScenarioInstance

load_dotenv()

settings = RunSettings.from_env()
logging.basicConfig(level=settings.log_level.upper(), format="[%(levelname)s] %(message)s")
logger = logging.getLogger(__name__)

app = FastAPI(
    title="Grid Reconfiguration Engine",
    description=(
        "Minimum-loss distribution grid reconfiguration with an exact enumeration "
        "oracle and physics-informed neural predictors"
    ),
    version="1.0.0",
)


class ScenarioRequest(BaseModel):
    grid: Literal["bw33", "tpc94"] = "bw33"
    p_load_kw: Optional[List[float]] = Field(None, description="Per-node active load; nominal when omitted")
    q_load_kvar: Optional[List[float]] = Field(None, description="Per-node reactive load; nominal when omitted")
    solar_kw: Optional[List[float]] = Field(None, description="Per-node available solar output")
    no_export: bool = False


@lru_cache(maxsize=None)
def _solver(grid_name: str, no_export: bool) -> OracleSolver:
    return OracleSolver(get_grid(grid_name), no_export=no_export, big_m=settings.big_m)


@lru_cache(maxsize=1)
def _committee(path: str) -> Committee:
    return load_committee(path)


def _per_unit(grid: GridModel, values: Optional[List[float]], default: np.ndarray) -> np.ndarray:
    if values is None:
        return default.copy()
    if len(values) != grid.node_count:
        raise ReconfigError(f"expected {grid.node_count} node values, got {len(values)}")
    return np.asarray(values, dtype=float) / grid.base_power


def _scenario(request: ScenarioRequest) -> ScenarioInstance:
    grid = get_grid(request.grid)
    p = _per_unit(grid, request.p_load_kw, grid.load_p)
    q = _per_unit(grid, request.q_load_kvar, grid.load_q)
    solar = _per_unit(grid, request.solar_kw, np.zeros(grid.node_count))
    return make_instance(grid, p, q, solar_available=solar)


def _describe(grid: GridModel, scenario: ScenarioInstance, psi: DecisionVector, no_export: bool) -> Dict:
    report = check_feasibility(grid, scenario, psi, big_m=settings.big_m, eps=settings.eps, no_export=no_export)
    state = psi.state
    return {
        "closed_switches": closed_switch_ids(grid, psi.topology.y),
        "v": state.v.tolist(),
        "voltage_magnitude": state.voltage_magnitude.tolist(),
        "p_gen": state.p_gen.tolist(),
        "q_gen": state.q_gen.tolist(),
        "violations": {
            "count_above_eps": report.count_above_eps,
            "max_violation": report.max_violation,
            "class_max": report.class_max,
        },
    }


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy"}


@app.get("/")
async def root():
    """Root endpoint."""
    return {"message": "Grid Reconfiguration Engine is running"}


@app.get("/grids/{name}")
def grid_summary(name: str):
    try:
        grid = get_grid(name)
        solver = _solver(name, False)
        return {
            "name": grid.name,
            "nodes": grid.node_count,
            "lines": grid.line_count,
            "switches": grid.switch_count,
            "switch_ids": list(grid.switch_ids),
            "cutoff": cutoff_L(grid),
            "radial_topologies": len(solver.topologies),
        }
    except ReconfigError as e:
        return _error(404, str(e))


@app.post("/optimize")
def optimize(request: ScenarioRequest):
    try:
        grid = get_grid(request.grid)
        scenario = _scenario(request)
        best = _solver(request.grid, request.no_export).brute_force_optimum(scenario)
        body = _describe(grid, scenario, DecisionVector(best.topology, best.state), request.no_export)
        body["objective"] = best.objective
        return body
    except ReconfigError as e:
        logger.error(f"Error optimizing scenario: {str(e)}")
        logger.exception("Full traceback:")
        return _error(422, str(e))


@app.post("/predict")
def predict(request: ScenarioRequest):
    if not settings.checkpoint:
        return _error(503, "no committee checkpoint configured (RECONFIG_CHECKPOINT)")
    try:
        committee = _committee(settings.checkpoint)
        if committee.grid.name != request.grid:
            raise ReconfigError(f"checkpoint serves grid {committee.grid.name}, not {request.grid}")
        grid = committee.grid
        scenario = _scenario(request)
        psi = committee.predict(ScenarioBatch.from_instances([scenario]))[0]
        body = _describe(grid, scenario, psi, request.no_export)
        warm = export_warmstart(grid, scenario, psi, big_m=settings.big_m, no_export=request.no_export)
        body["warm_start"] = warm.model_dump()
        return body
    except ReconfigError as e:
        logger.error(f"Error predicting scenario: {str(e)}")
        logger.exception("Full traceback:")
        return _error(422, str(e))
