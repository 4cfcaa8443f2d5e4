import numpy as np
import pytest

from src.core.qp_solver import ActiveSetQP, kkt_residual


@pytest.mark.pure
def test_unconstrained_minimum():
    H = np.diag([2.0, 4.0])
    c = np.array([-2.0, -4.0])
    result = ActiveSetQP().solve(H, c, np.zeros((0, 2)), np.zeros(0))
    assert result.status == "optimal"
    assert np.allclose(result.x, [1.0, 1.0])


@pytest.mark.pure
def test_box_constrained_minimum():
    """min (x-2)^2 + (y+1)^2 on [0, 1]^2 sits at the corner (1, 0)."""
    H = 2.0 * np.eye(2)
    c = np.array([-4.0, 2.0])
    A = np.vstack([np.eye(2), -np.eye(2)])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    result = ActiveSetQP().solve(H, c, A, b)
    assert result.status == "optimal"
    assert np.allclose(result.x, [1.0, 0.0])
    assert result.kkt_residual < 1e-8
    assert np.all(result.multipliers >= 0)


@pytest.mark.pure
def test_infeasible_start_uses_phase_one():
    """The origin violates x + y >= 3, so the solver starts from an LP point."""
    H = np.eye(2)
    c = np.zeros(2)
    A = np.array([[-1.0, -1.0]])
    b = np.array([-3.0])
    result = ActiveSetQP().solve(H, c, A, b)
    assert result.status == "optimal"
    assert np.allclose(result.x, [1.5, 1.5])


@pytest.mark.pure
def test_infeasible_problem():
    A = np.array([[1.0], [-1.0]])
    b = np.array([-1.0, -1.0])
    result = ActiveSetQP().solve(np.eye(1), np.zeros(1), A, b)
    assert result.status == "infeasible"
    assert result.x is None


@pytest.mark.pure
def test_zero_variable_problem():
    result = ActiveSetQP().solve(np.zeros((0, 0)), np.zeros(0), np.zeros((2, 0)), np.array([1.0, 0.0]))
    assert result.status == "optimal"
    assert ActiveSetQP().solve(np.zeros((0, 0)), np.zeros(0), np.zeros((1, 0)), np.array([-1.0])).status == "infeasible"


@pytest.mark.pure
def test_random_qps_satisfy_kkt():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        G = rng.normal(size=(n, n))
        H = G @ G.T + n * np.eye(n)
        c = rng.normal(size=n) * 3
        A = rng.normal(size=(2 * n, n))
        b = rng.uniform(0.1, 1.0, size=2 * n)
        result = ActiveSetQP().solve(H, c, A, b)
        assert result.status == "optimal"
        assert kkt_residual(H, c, A, b, result.x, result.multipliers) < 1e-8


@pytest.mark.pure
def test_iteration_cap():
    H = 2.0 * np.eye(2)
    c = np.array([-4.0, 2.0])
    A = np.vstack([np.eye(2), -np.eye(2)])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    assert ActiveSetQP(max_iter=1).solve(H, c, A, b).status == "max_iter"
