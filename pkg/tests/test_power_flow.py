from dataclasses import fields

import numpy as np
import pytest

from src.core.exceptions import DegenerateVoltage
from src.core.power_flow import distflow_residuals, line_losses, nodal_injection, objective_f, ohm_drop
from src.core.topology import default_topology
from src.models.decision import PowerState


def _chain_state(v=(1.0, 0.8, 0.4)):
    """1 pu drawn at the end of the chain, all of it from the PCC."""
    return PowerState(
        v=np.array(v),
        p_ij=np.array([1.0, 1.0]),
        p_ji=np.zeros(2),
        q_ij=np.zeros(2),
        q_ji=np.zeros(2),
        p_gen=np.array([1.0, 0.0, 0.0]),
        q_gen=np.zeros(3),
        p_load=np.array([0.0, 0.0, 1.0]),
        q_load=np.zeros(3),
    )


@pytest.mark.pure
def test_chain_residuals_vanish(chain3):
    """Balances, Ohm's law and direction constraints all hold for the hand-solved chain."""
    residuals = distflow_residuals(chain3, default_topology(chain3), _chain_state())
    assert residuals.shape == (3 + 3 + 1 + 2,)
    assert np.allclose(residuals, 0.0)


@pytest.mark.pure
def test_chain_ohm_drop(chain3):
    assert np.allclose(ohm_drop(chain3, _chain_state()), 0.0)
    assert np.allclose(ohm_drop(chain3, _chain_state(v=(1.0, 0.9, 0.5))), [0.1, 0.0])


@pytest.mark.pure
def test_nodal_injection_signs(chain3):
    injection = nodal_injection(chain3, np.array([1.0, 1.0]), np.zeros(2))
    assert np.allclose(injection, [1.0, 0.0, -1.0])


@pytest.mark.pure
def test_objective_and_losses(chain3):
    """f = sum R P^2; losses divide by the sending-end voltage."""
    state = _chain_state()
    assert objective_f(chain3, state) == pytest.approx(0.3)
    assert line_losses(chain3, state) == pytest.approx(0.1 / 1.0 + 0.2 / 0.8)


@pytest.mark.pure
def test_losses_batched(chain3):
    state = _chain_state()
    batched = PowerState(**{name: np.stack([value, value]) for name, value in vars(state).items()})
    assert np.allclose(line_losses(chain3, batched), [0.35, 0.35])


@pytest.mark.pure
def test_losses_degenerate_voltage(chain3):
    with pytest.raises(DegenerateVoltage):
        line_losses(chain3, _chain_state(v=(1.0, 0.0, 0.4)))


def _random_state(grid, rng):
    n, m = grid.node_count, grid.line_count
    return PowerState(
        v=rng.uniform(0.8, 1.1, n),
        p_ij=rng.uniform(0, 1, m),
        p_ji=rng.uniform(0, 1, m),
        q_ij=rng.uniform(0, 1, m),
        q_ji=rng.uniform(0, 1, m),
        p_gen=rng.normal(size=n),
        q_gen=rng.normal(size=n),
        p_load=np.zeros(n),
        q_load=np.zeros(n),
    )


@pytest.mark.pure
def test_residuals_are_linear_without_loads(bw33_grid):
    rng = np.random.default_rng(3)
    s1, s2 = _random_state(bw33_grid, rng), _random_state(bw33_grid, rng)
    a, b = 0.7, -1.9
    mixed = PowerState(
        **{f.name: a * getattr(s1, f.name) + b * getattr(s2, f.name) for f in fields(PowerState)}
    )
    expected = a * distflow_residuals(bw33_grid, None, s1) + b * distflow_residuals(bw33_grid, None, s2)
    assert np.allclose(distflow_residuals(bw33_grid, None, mixed), expected, atol=1e-12)
