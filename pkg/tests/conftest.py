import numpy as np
import pytest

from src.core.grid_data import bw33
from src.core.scenario_data import make_instance
from src.models.grid import GridModel, Line, VoltageBounds


def _line(lid, i, j, r, x, switch=False, closed=True):
    return Line(
        id=lid, from_node=i, to_node=j, resistance=r, reactance=x, is_switch=switch, default_closed=closed
    )


@pytest.fixture(scope="session")
def bw33_grid():
    return bw33()


@pytest.fixture(scope="session")
def chain3():
    """0 - 1 - 2 with the second line a closed switch; L = 1."""
    return GridModel(
        name="chain3",
        node_count=3,
        lines=(_line(1, 0, 1, 0.1, 0.1), _line(2, 1, 2, 0.2, 0.2, switch=True)),
        base_kv=12.66,
        base_power=10_000.0,
        voltage_bounds=VoltageBounds(v_lo=0.5, v_hi=1.21),
        nominal_p=(0.0, 0.0, 1.0),
        nominal_q=(0.0, 0.0, 0.0),
    )


@pytest.fixture(scope="session")
def six_node():
    """Two feeders from the PCC joined by three switches; every 2-subset is radial.

    Loads are multiples of 0.01 pu and node 5 hosts solar.
    """
    return GridModel(
        name="six",
        node_count=6,
        lines=(
            _line(1, 0, 1, 0.01, 0.02),
            _line(2, 1, 2, 0.02, 0.02),
            _line(3, 3, 4, 0.015, 0.01),
            _line(4, 0, 3, 0.01, 0.01, switch=True),
            _line(5, 2, 5, 0.02, 0.03, switch=True),
            _line(6, 4, 5, 0.01, 0.02, switch=True, closed=False),
        ),
        base_kv=12.66,
        base_power=10_000.0,
        voltage_bounds=VoltageBounds(v_lo=0.5, v_hi=1.21),
        nominal_p=(0.0, 0.05, 0.04, 0.03, 0.06, 0.05),
        nominal_q=(0.0, 0.02, 0.02, 0.01, 0.03, 0.02),
    )


SIX_SOLAR_NODE = 5
SIX_SOLAR_NAMEPLATE = 0.25


def six_scenarios(grid, count, seed=0, solar=True):
    """Loads on a 0.01 pu grid around nominal, solar availability on the same grid."""
    rng = np.random.default_rng(seed)
    instances = []
    for k in range(count):
        p = np.round(np.array(grid.load_p) * rng.integers(5, 16, size=grid.node_count) / 10.0, 2)
        q = np.round(np.array(grid.load_q) * rng.integers(5, 16, size=grid.node_count) / 10.0, 2)
        available = np.zeros(grid.node_count)
        nameplate = np.zeros(grid.node_count)
        if solar:
            available[SIX_SOLAR_NODE] = rng.integers(0, 26) / 100.0
            nameplate[SIX_SOLAR_NODE] = SIX_SOLAR_NAMEPLATE
        instances.append(
            make_instance(grid, p, q, solar_available=available, solar_nameplate=nameplate, index=k, timestamp=k)
        )
    return instances


@pytest.fixture
def six_instances(six_node):
    return six_scenarios(six_node, 12)
