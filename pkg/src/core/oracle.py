"""Exact enumeration oracle.

The oracle enumerates every radial topology, solves the fixed-topology
dispatch subproblem on each, and keeps the best. It also certifies decision
vectors against the full constraint set and exports warm-start points.

On a fixed tree rooted at the PCC, the flow into each node equals the net
demand of its subtree. The subproblem therefore reduces to a convex QP over
the dispatch of non-PCC generators. Real and reactive flow on a line share one
direction indicator. Lines whose unconstrained optimum sends P and Q opposite
ways are branched on (both directions, each a convex QP), which keeps the
result exact.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ..models.decision import DecisionBatch, DecisionVector, PowerState, TopologyState
from ..models.grid import GridModel
from ..models.reports import (
    INEQUALITY_CLASSES,
    FixedTopologySolution,
    ViolationEntry,
    ViolationReport,
    WarmStartRecord,
)
from ..models.scenario import ScenarioBatch, ScenarioInstance
from .constraints import build_catalog, evaluate_constraints, var_pg, var_qg, var_v, var_y, var_z
from .exceptions import AllInfeasible, NonRadialTopology, TooManyTopologies
from .power_flow import objective_f
from .qp_solver import ActiveSetQP, QPResult
from .topology import closed_line_mask, closed_switch_ids, cutoff_L, is_radial, orient_tree

logger = logging.getLogger(__name__)

MAX_CANDIDATES = 10**6
DEFAULT_BIG_M = 10.0
SIGN_TOL = 1e-9


def enumerate_radial(grid: GridModel, max_candidates: int = MAX_CANDIDATES) -> List[TopologyState]:
    """All radial topologies, in lexicographic order of closed switch ids.

    Raises:
        TooManyTopologies: if C(M_sw, L) exceeds ``max_candidates``
    """
    cutoff = cutoff_L(grid)
    m = grid.switch_count
    candidates = math.comb(m, cutoff)
    if candidates > max_candidates:
        raise TooManyTopologies(f"C({m},{cutoff})={candidates} exceeds guard {max_candidates}")
    radial = []
    for closed in combinations(range(m), cutoff):
        y = np.zeros(m)
        y[list(closed)] = 1.0
        if is_radial(grid, y):
            radial.append(orient_tree(grid, y))
    logger.info(f"{grid.name}: {len(radial)} radial topologies out of {candidates} candidates")
    return radial


@dataclass(frozen=True)
class _Tree:
    """Tree structure of one radial topology, edges indexed by child node."""

    children: np.ndarray  # child node of each edge (all non-PCC nodes)
    lines: np.ndarray  # line index of each edge
    forward: np.ndarray  # True when the line is listed parent -> child
    subtree: np.ndarray  # (edges, nodes): 1 if node lies in the edge's subtree
    from_pcc: np.ndarray  # True for edges leaving the PCC


def _build_tree(grid: GridModel, y: np.ndarray) -> _Tree:
    closed = closed_line_mask(grid, y)
    graph = nx.Graph()
    graph.add_nodes_from(range(grid.node_count))
    for k in np.flatnonzero(closed):
        graph.add_edge(int(grid.from_nodes[k]), int(grid.to_nodes[k]), line=int(k))
    parent = {grid.pcc_node: -1}
    for u, v in nx.bfs_edges(graph, grid.pcc_node):
        parent[v] = u
    children = np.array(sorted(set(range(grid.node_count)) - {grid.pcc_node}))
    position = {int(c): e for e, c in enumerate(children)}
    lines = np.array([graph.edges[parent[c], c]["line"] for c in children])
    forward = grid.from_nodes[lines] == np.array([parent[c] for c in children])
    subtree = np.zeros((len(children), grid.node_count))
    for node in range(grid.node_count):
        walk = node
        while walk != grid.pcc_node:
            subtree[position[walk], node] = 1.0
            walk = parent[walk]
    from_pcc = np.array([parent[c] == grid.pcc_node for c in children])
    return _Tree(children, lines, forward, subtree, from_pcc)


@dataclass
class _Reduced:
    """Dispatch QP in the variables [P^G, Q^G] of non-PCC generator nodes."""

    gen_nodes: np.ndarray
    B: np.ndarray
    a_p: np.ndarray
    a_q: np.ndarray
    H: np.ndarray
    c: np.ndarray
    const: float
    A: np.ndarray
    b: np.ndarray


class OracleSolver:
    """Fixed-topology and brute-force dispatch with a per-topology tree cache."""

    def __init__(
        self,
        grid: GridModel,
        no_export: bool = False,
        big_m: float = DEFAULT_BIG_M,
        tol: float = 1e-6,
        max_iter: int = 100_000,
    ):
        self.grid = grid
        self.no_export = no_export
        self.big_m = big_m
        self.tol = tol
        self.qp = ActiveSetQP(max_iter=max_iter)
        self._trees: Dict[Tuple[int, ...], _Tree] = {}
        self._topologies: Optional[List[TopologyState]] = None

    @property
    def topologies(self) -> List[TopologyState]:
        if self._topologies is None:
            self._topologies = enumerate_radial(self.grid)
        return self._topologies

    def _tree(self, y: np.ndarray) -> _Tree:
        key = tuple(int(v > 0.5) for v in y)
        if key not in self._trees:
            self._trees[key] = _build_tree(self.grid, np.asarray(key, dtype=float))
        return self._trees[key]

    def _reduce(self, tree: _Tree, scenario: ScenarioInstance) -> _Reduced:
        grid = self.grid
        pcc = grid.pcc_node
        has_gen = (scenario.p_gen_cap > 0) | (scenario.q_gen_lo < 0) | (scenario.q_gen_hi > 0)
        gen_nodes = np.array([j for j in np.flatnonzero(has_gen) if j != pcc], dtype=int)
        g = len(gen_nodes)
        r = grid.resistance[tree.lines]
        x = grid.reactance[tree.lines]
        B = tree.subtree[:, gen_nodes]
        a_p = tree.subtree @ scenario.p_load
        a_q = tree.subtree @ scenario.q_load

        brb = B.T @ (r[:, None] * B)
        H = np.zeros((2 * g, 2 * g))
        H[:g, :g] = 2.0 * brb
        H[g:, g:] = 2.0 * brb
        c = np.concatenate([-2.0 * B.T @ (r * a_p), -2.0 * B.T @ (r * a_q)])
        const = float(r @ a_p**2 + r @ a_q**2)

        rows: List[np.ndarray] = []
        rhs: List[float] = []

        def add(row: np.ndarray, bound: float) -> None:
            rows.append(row)
            rhs.append(bound)

        eye = np.eye(2 * g)
        for k, j in enumerate(gen_nodes):
            add(eye[k], scenario.p_gen_cap[j])
            add(-eye[k], 0.0)
            add(eye[g + k], scenario.q_gen_hi[j])
            add(-eye[g + k], -scenario.q_gen_lo[j])

        ones = np.concatenate([np.ones(g), np.zeros(g)])
        ones_q = np.concatenate([np.zeros(g), np.ones(g)])
        total_p = float(scenario.p_load.sum())
        total_q = float(scenario.q_load.sum())
        add(ones, total_p)
        add(-ones, scenario.p_gen_cap[pcc] - total_p)
        add(ones_q, total_q - scenario.q_gen_lo[pcc])
        add(-ones_q, scenario.q_gen_hi[pcc] - total_q)

        # Flow existence: every tree edge is closed, so |F| <= M on P and Q.
        zeros = np.zeros(g)
        for e in range(len(tree.children)):
            add(np.concatenate([-B[e], zeros]), self.big_m - a_p[e])
            add(np.concatenate([B[e], zeros]), self.big_m + a_p[e])
            add(np.concatenate([zeros, -B[e]]), self.big_m - a_q[e])
            add(np.concatenate([zeros, B[e]]), self.big_m + a_q[e])

        # v = v0 + Vp gP + Vq gQ at non-PCC nodes (edge order = node order).
        down = tree.subtree[:, tree.children].T
        v0 = 1.0 - 2.0 * down @ (r * a_p + x * a_q)
        V = np.hstack([2.0 * down @ (r[:, None] * B), 2.0 * down @ (x[:, None] * B)])
        bounds = self.grid.voltage_bounds
        for e in range(len(tree.children)):
            add(V[e], bounds.v_hi - v0[e])
            add(-V[e], v0[e] - bounds.v_lo)

        A = np.array(rows) if rows else np.zeros((0, 2 * g))
        return _Reduced(gen_nodes, B, a_p, a_q, H, c, const, A, np.array(rhs))

    def _direction_rows(
        self, red: _Reduced, directions: Dict[int, int]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Rows forcing d * F >= 0 for P and Q on edges with a fixed direction."""
        g = len(red.gen_nodes)
        rows, rhs = [], []
        for e, d in sorted(directions.items()):
            rows.append(np.concatenate([d * red.B[e], np.zeros(g)]))
            rhs.append(d * red.a_p[e])
            rows.append(np.concatenate([np.zeros(g), d * red.B[e]]))
            rhs.append(d * red.a_q[e])
        if not rows:
            return red.A, red.b
        return np.vstack([red.A, np.array(rows)]), np.concatenate([red.b, rhs])

    def _flows(self, red: _Reduced, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g = len(red.gen_nodes)
        return red.a_p - red.B @ x[:g], red.a_q - red.B @ x[g:]

    def _search(self, red: _Reduced, fixed: Dict[int, int]) -> Tuple[Optional[QPResult], Dict[int, int]]:
        """Depth-first branching over edges whose P and Q directions conflict."""
        best: Optional[QPResult] = None
        best_dirs: Dict[int, int] = {}
        stack = [dict(fixed)]
        while stack:
            dirs = stack.pop()
            A, b = self._direction_rows(red, dirs)
            result = self.qp.solve(red.H, red.c, A, b)
            if result.status == "max_iter":
                return result, dirs
            if result.status != "optimal":
                continue
            if best is not None and result.objective >= best.objective - 1e-14:
                continue
            f_p, f_q = self._flows(red, result.x)
            conflict = np.flatnonzero(
                ((f_p > SIGN_TOL) & (f_q < -SIGN_TOL)) | ((f_p < -SIGN_TOL) & (f_q > SIGN_TOL))
            )
            if not len(conflict):
                best, best_dirs = result, dirs
                continue
            e = int(conflict[0])
            stack.append({**dirs, e: -1})
            stack.append({**dirs, e: 1})
        return best, best_dirs

    def solve_fixed_topology(
        self, scenario: ScenarioInstance, topology: TopologyState
    ) -> FixedTopologySolution:
        """Minimum-loss dispatch on one radial topology.

        Raises:
            NonRadialTopology: if the closed switches do not form a spanning tree
        """
        grid = self.grid
        if not is_radial(grid, topology.y):
            raise NonRadialTopology(f"switches {closed_switch_ids(grid, topology.y)} do not form a spanning tree")
        closed_ids = tuple(closed_switch_ids(grid, topology.y))
        tree = self._tree(topology.y)
        red = self._reduce(tree, scenario)
        fixed = {int(e): 1 for e in np.flatnonzero(tree.from_pcc)} if self.no_export else {}
        result, _ = self._search(red, fixed)

        if result is None or result.status != "optimal":
            status = "max_iter" if result is not None else "infeasible"
            logger.debug(f"Topology {closed_ids}: {status}")
            return FixedTopologySolution(
                topology=topology,
                state=None,
                objective=float("inf"),
                kkt_residual=float("inf"),
                status=status,
                closed_switches=closed_ids,
            )

        state, topo = self._assemble(tree, red, scenario, topology, result.x)
        solution = FixedTopologySolution(
            topology=topo,
            state=state,
            objective=float(objective_f(grid, state)),
            kkt_residual=result.kkt_residual,
            status="optimal",
            closed_switches=closed_ids,
        )
        logger.debug(f"Topology {closed_ids}: objective {solution.objective:.6g}")
        return solution

    def _assemble(
        self,
        tree: _Tree,
        red: _Reduced,
        scenario: ScenarioInstance,
        topology: TopologyState,
        x: np.ndarray,
    ) -> Tuple[PowerState, TopologyState]:
        grid = self.grid
        g = len(red.gen_nodes)
        f_p, f_q = self._flows(red, x)
        f_p = np.where(np.abs(f_p) <= SIGN_TOL, 0.0, f_p)
        f_q = np.where(np.abs(f_q) <= SIGN_TOL, 0.0, f_q)

        p_gen = np.zeros(grid.node_count)
        q_gen = np.zeros(grid.node_count)
        p_gen[red.gen_nodes] = x[:g]
        q_gen[red.gen_nodes] = x[g:]
        p_gen[grid.pcc_node] = scenario.p_load.sum() - x[:g].sum()
        q_gen[grid.pcc_node] = scenario.q_load.sum() - x[g:].sum()

        # Flow along the line orientation is positive when parent -> child
        # matches from -> to.
        sign = np.where(tree.forward, 1.0, -1.0)
        along_p = np.zeros(grid.line_count)
        along_q = np.zeros(grid.line_count)
        along_p[tree.lines] = sign * f_p
        along_q[tree.lines] = sign * f_q

        r = grid.resistance
        xr = grid.reactance
        down = tree.subtree[:, tree.children].T
        v = np.ones(grid.node_count)
        v[tree.children] = 1.0 - 2.0 * down @ (r[tree.lines] * f_p + xr[tree.lines] * f_q)

        z_ij = np.zeros(grid.line_count)
        z_ji = np.zeros(grid.line_count)
        # Zero-flow lines keep the away-from-PCC orientation.
        leading = np.where(along_p != 0, along_p, along_q)
        leading_tree = leading[tree.lines]
        default_forward = tree.forward
        is_forward = np.where(leading_tree != 0, leading_tree > 0, default_forward)
        z_ij[tree.lines] = is_forward.astype(float)
        z_ji[tree.lines] = (~is_forward).astype(float)

        state = PowerState(
            v=v,
            p_ij=np.maximum(along_p, 0.0),
            p_ji=np.maximum(-along_p, 0.0),
            q_ij=np.maximum(along_q, 0.0),
            q_ji=np.maximum(-along_q, 0.0),
            p_gen=p_gen,
            q_gen=q_gen,
            p_load=scenario.p_load.copy(),
            q_load=scenario.q_load.copy(),
        )
        topo = TopologyState(y=np.asarray(topology.y, dtype=float).copy(), z_ij=z_ij, z_ji=z_ji)
        return state, topo

    def solve_all(
        self, scenario: ScenarioInstance, topologies: Optional[Sequence[TopologyState]] = None
    ) -> List[FixedTopologySolution]:
        return [self.solve_fixed_topology(scenario, t) for t in topologies or self.topologies]

    def brute_force_optimum(
        self, scenario: ScenarioInstance, topologies: Optional[Sequence[TopologyState]] = None
    ) -> FixedTopologySolution:
        """Best solution over all radial topologies.

        Ties go to the lexicographically smallest closed-switch id set.

        Raises:
            AllInfeasible: when no topology admits a feasible dispatch
        """
        return select_best(self.solve_all(scenario, topologies))


def select_best(solutions: Sequence[FixedTopologySolution]) -> FixedTopologySolution:
    feasible = [s for s in solutions if s.ok]
    if not feasible:
        raise AllInfeasible("no radial topology admits a feasible dispatch")
    return min(feasible, key=lambda s: (s.objective, s.closed_switches))


def solve_fixed_topology(
    grid: GridModel,
    scenario: ScenarioInstance,
    topology: TopologyState,
    no_export: bool = False,
    big_m: float = DEFAULT_BIG_M,
) -> FixedTopologySolution:
    return OracleSolver(grid, no_export=no_export, big_m=big_m).solve_fixed_topology(scenario, topology)


def brute_force_optimum(
    grid: GridModel,
    scenario: ScenarioInstance,
    no_export: bool = False,
    big_m: float = DEFAULT_BIG_M,
) -> FixedTopologySolution:
    return OracleSolver(grid, no_export=no_export, big_m=big_m).brute_force_optimum(scenario)


def check_feasibility(
    grid: GridModel,
    scenario: ScenarioInstance,
    psi: DecisionVector,
    big_m: float = DEFAULT_BIG_M,
    eps: float = 1e-3,
    no_export: bool = False,
) -> ViolationReport:
    """Evaluate every constraint of the reconfiguration problem on ``psi``."""
    batch = DecisionBatch.from_vectors([psi])
    scenarios = ScenarioBatch.from_instances([scenario])
    magnitudes = evaluate_constraints(grid, scenarios, batch, big_m=big_m, no_export=no_export)
    return build_report(build_catalog(grid, no_export), {k: v[0] for k, v in magnitudes.items()}, eps)


def build_report(catalog, magnitudes: Dict[str, np.ndarray], eps: float) -> ViolationReport:
    entries = []
    class_max = {}
    inequality = []
    for cls, values in magnitudes.items():
        class_max[cls] = float(values.max()) if values.size else 0.0
        if cls in INEQUALITY_CLASSES:
            inequality.append(values)
        for idx in np.flatnonzero(values > eps):
            entries.append(
                ViolationEntry(constraint_id=catalog.ids[cls][idx], cls=cls, magnitude=float(values[idx]))
            )
    ineq = np.concatenate(inequality) if inequality else np.zeros(0)
    return ViolationReport(
        entries=entries,
        eps=eps,
        inequality_count=int(ineq.size),
        mean_violation=float(ineq.mean()) if ineq.size else 0.0,
        max_violation=float(ineq.max()) if ineq.size else 0.0,
        count_above_eps=int((ineq > eps).sum()),
        class_max=class_max,
    )


def export_warmstart(
    grid: GridModel,
    scenario: ScenarioInstance,
    psi: DecisionVector,
    big_m: float = DEFAULT_BIG_M,
    eps: float = 1e-6,
    no_export: bool = False,
) -> WarmStartRecord:
    """Warm-start point [P^G, Q^G, V, y, z_ij, z_ji].

    Variables involved in a violated inequality (or a fractional binary)
    are left out and listed as omitted.
    """
    catalog = build_catalog(grid, no_export)
    batch = DecisionBatch.from_vectors([psi])
    scenarios = ScenarioBatch.from_instances([scenario])
    magnitudes = evaluate_constraints(grid, scenarios, batch, big_m=big_m, no_export=no_export)
    tainted = set()
    for cls, values in magnitudes.items():
        if cls not in INEQUALITY_CLASSES and cls != "integrality":
            continue
        for idx in np.flatnonzero(values[0] > eps):
            tainted.update(catalog.variables[cls][idx])

    topo, state = psi.topology, psi.state
    candidates: Dict[str, float] = {}
    for j in range(grid.node_count):
        candidates[var_pg(j)] = float(state.p_gen[j])
    for j in range(grid.node_count):
        candidates[var_qg(j)] = float(state.q_gen[j])
    for j in range(grid.node_count):
        candidates[var_v(j)] = float(state.v[j])
    for lid, value in zip(grid.switch_ids, topo.y):
        candidates[var_y(lid)] = float(value)
    for k in range(grid.line_count):
        i, j = int(grid.from_nodes[k]), int(grid.to_nodes[k])
        candidates[var_z(i, j)] = float(topo.z_ij[k])
    for k in range(grid.line_count):
        i, j = int(grid.from_nodes[k]), int(grid.to_nodes[k])
        candidates[var_z(j, i)] = float(topo.z_ji[k])

    variables = {k: v for k, v in candidates.items() if k not in tainted}
    omitted = [k for k in candidates if k in tainted]
    if omitted:
        logger.info(f"Warm start omits {len(omitted)} variables: {omitted[:5]}")
    return WarmStartRecord(variables=variables, omitted=omitted)
