import math

import numpy as np
import pytest

from src.core.exceptions import TooManyTopologies, UnknownLayout
from src.core.grid_data import get_grid, load_grid_csv, solar_layout, tpc94, write_grid_csv
from src.core.oracle import enumerate_radial
from src.core.topology import closed_switch_ids, cutoff_L, is_radial


@pytest.mark.pure
def test_bw33_dimensions(bw33_grid):
    """33 nodes, 37 lines of which 8 switchable, L = 3."""
    assert bw33_grid.node_count == 33
    assert bw33_grid.line_count == 37
    assert bw33_grid.switch_count == 8
    assert cutoff_L(bw33_grid) == 3
    assert math.comb(bw33_grid.switch_count, cutoff_L(bw33_grid)) == 56


@pytest.mark.pure
def test_bw33_default_topology_is_radial(bw33_grid):
    assert is_radial(bw33_grid, bw33_grid.default_switch_state)
    assert closed_switch_ids(bw33_grid, bw33_grid.default_switch_state) == [4, 10, 26]


@pytest.mark.pure
def test_bw33_per_unit(bw33_grid):
    """Line 1 is 0.0922 ohm on a 16.03 ohm base; total load is 3715 kW."""
    assert bw33_grid.base_impedance == pytest.approx(12.66**2 / 10.0)
    assert bw33_grid.resistance[0] == pytest.approx(0.0922 / bw33_grid.base_impedance)
    assert bw33_grid.load_p.sum() * bw33_grid.base_power == pytest.approx(3715.0)
    assert bw33_grid.voltage_bounds.v_lo == pytest.approx(0.87**2)


@pytest.mark.pure
def test_bw33_radial_count(bw33_grid):
    """35 of the 56 switch subsets of size 3 are spanning trees."""
    radial = enumerate_radial(bw33_grid)
    assert len(radial) == 35
    closed = [tuple(closed_switch_ids(bw33_grid, t.y)) for t in radial]
    assert closed == sorted(closed)


@pytest.mark.pure
def test_tpc94_radial_count():
    """The 94-node system has L = 10 and 27 radial topologies out of 1001."""
    grid = tpc94()
    assert grid.node_count == 94
    assert grid.switch_count == 14
    assert cutoff_L(grid) == 10
    assert math.comb(14, 10) == 1001
    assert len(enumerate_radial(grid)) == 27


@pytest.mark.pure
def test_enumeration_guard(bw33_grid):
    with pytest.raises(TooManyTopologies):
        enumerate_radial(bw33_grid, max_candidates=10)


@pytest.mark.pure
def test_unknown_grid_and_layout():
    with pytest.raises(UnknownLayout):
        get_grid("ieee123")
    with pytest.raises(UnknownLayout):
        solar_layout("bw33", "S1")


@pytest.mark.pure
def test_solar_layouts_are_zero_based():
    assert solar_layout("bw33", "none") == {}
    layout = solar_layout("bw33", "DD-I")
    assert layout[1] == 185
    assert 0 not in layout


@pytest.mark.pure
def test_grid_csv_round_trip(tmp_path, bw33_grid):
    """Writing and re-reading the CSV pair reproduces the per-unit grid."""
    lines_csv, nodes_csv = tmp_path / "lines.csv", tmp_path / "nodes.csv"
    write_grid_csv(bw33_grid, lines_csv, nodes_csv)
    grid = load_grid_csv(
        lines_csv, nodes_csv, "bw33", base_kv=12.66, base_power=10_000.0,
        v_min=0.87, v_max=1.05, normally_open=(33, 34, 35, 36, 37),
    )  # fmt: skip
    assert grid.switch_ids == bw33_grid.switch_ids
    assert np.allclose(grid.resistance, bw33_grid.resistance)
    assert np.allclose(grid.load_q, bw33_grid.load_q)
    assert np.array_equal(grid.default_switch_state, bw33_grid.default_switch_state)
