"""Primal active-set solver for small dense convex QPs.

    minimize   1/2 x^T H x + c^T x
    subject to A x <= b

H must be positive definite. A feasible start comes from a phase-1 LP
(HiGHS via scipy) whenever the origin is infeasible.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class QPResult:
    x: Optional[np.ndarray]
    multipliers: Optional[np.ndarray]
    objective: float
    status: Literal["optimal", "infeasible", "max_iter"]
    iterations: int
    kkt_residual: float


def kkt_residual(
    H: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray, x: np.ndarray, lam: np.ndarray
) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    slack = b - A @ x
    parts = [np.abs(H @ x + c + A.T @ lam)]
    if len(b):
        parts += [np.maximum(-slack, 0.0), np.maximum(-lam, 0.0), np.abs(lam * slack)]
    return float(max(np.max(p) if p.size else 0.0 for p in parts))


class ActiveSetQP:
    """Active-set method with a phase-1 feasible start."""

    def __init__(self, tol: float = 1e-10, max_iter: int = 100_000):
        self.tol = tol
        self.max_iter = max_iter

    def _feasible_start(self, A: np.ndarray, b: np.ndarray, n: int) -> Optional[np.ndarray]:
        x0 = np.zeros(n)
        if not len(b) or np.all(A @ x0 <= b + FEAS_TOL):
            return x0
        res = linprog(np.zeros(n), A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
        if res.status != 0:
            return None
        return np.asarray(res.x, dtype=float)

    def _initial_working_set(self, A: np.ndarray, b: np.ndarray, x: np.ndarray) -> List[int]:
        working: List[int] = []
        active = np.flatnonzero(np.abs(A @ x - b) <= FEAS_TOL * max(1.0, float(np.max(np.abs(b)))))
        for i in active:
            candidate = A[working + [int(i)]]
            if np.linalg.matrix_rank(candidate) == len(working) + 1:
                working.append(int(i))
            if len(working) == A.shape[1]:
                break
        return working

    def _eqp_step(self, H: np.ndarray, g: np.ndarray, Aw: np.ndarray):
        n, k = H.shape[0], Aw.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = H
        kkt[:n, n:] = Aw.T
        kkt[n:, :n] = Aw
        rhs = np.concatenate([-g, np.zeros(k)])
        sol = np.linalg.solve(kkt, rhs)
        return sol[:n], sol[n:]

    def solve(self, H: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray) -> QPResult:
        n = H.shape[0]
        m = A.shape[0]
        if n == 0:
            feasible = bool(np.all(b >= -FEAS_TOL))
            return QPResult(
                x=np.zeros(0) if feasible else None,
                multipliers=np.zeros(m) if feasible else None,
                objective=0.0,
                status="optimal" if feasible else "infeasible",
                iterations=0,
                kkt_residual=0.0,
            )

        x = self._feasible_start(A, b, n)
        if x is None:
            return QPResult(None, None, float("inf"), "infeasible", 0, float("inf"))
        working = self._initial_working_set(A, b, x)

        for iteration in range(1, self.max_iter + 1):
            g = H @ x + c
            p, lam_w = self._eqp_step(H, g, A[working])
            if np.max(np.abs(p)) <= self.tol * max(1.0, float(np.max(np.abs(x)))):
                if not working or np.min(lam_w) >= -self.tol:
                    lam = np.zeros(m)
                    lam[working] = np.maximum(lam_w, 0.0)
                    return QPResult(
                        x=x,
                        multipliers=lam,
                        objective=float(0.5 * x @ H @ x + c @ x),
                        status="optimal",
                        iterations=iteration,
                        kkt_residual=kkt_residual(H, c, A, b, x, lam),
                    )
                working.pop(int(np.argmin(lam_w)))
                continue

            # Largest step keeping every inactive constraint satisfied.
            step, blocking = 1.0, None
            Ap = A @ p
            slack = b - A @ x
            for i in np.flatnonzero(Ap > self.tol):
                if i in working:
                    continue
                ratio = max(slack[i], 0.0) / Ap[i]
                if ratio < step:
                    step, blocking = ratio, int(i)
            x = x + step * p
            if blocking is not None:
                working.append(blocking)

        logger.warning(f"Active-set QP hit the iteration cap ({self.max_iter})")
        return QPResult(x, None, float(0.5 * x @ H @ x + c @ x), "max_iter", self.max_iter, float("inf"))
