import numpy as np
import pytest
from pydantic import ValidationError

from src.core.exceptions import DatasetError, UnknownLayout
from src.core.grid_data import solar_layout
from src.core.scenario_data import (
    SOLAR_Q_RATIO,
    build_dataset,
    load_scenarios,
    make_instance,
    perturb_loads,
    save_scenarios,
    split_dataset,
)
from src.models.scenario import DatasetSpec, ScenarioBatch


@pytest.mark.pure
def test_perturbed_loads_keep_power_factor(bw33_grid):
    """Each node is scaled by one delta in [0.3, 1.7] applied to both P and Q."""
    instance = perturb_loads(bw33_grid, seed=3)
    loaded = bw33_grid.load_p > 0
    delta = instance.p_load[loaded] / bw33_grid.load_p[loaded]
    assert np.all((delta >= 0.3) & (delta <= 1.7))
    assert np.allclose(instance.q_load[loaded], bw33_grid.load_q[loaded] * delta)
    assert instance.p_load[bw33_grid.pcc_node] == 0.0


@pytest.mark.pure
def test_make_instance_limits(bw33_grid):
    """The PCC may supply twice the peak load; solar adds P and a 0.44 x nameplate Q range."""
    solar = np.zeros(33)
    solar[4] = 0.006
    nameplate = np.zeros(33)
    nameplate[4] = 0.01
    s = make_instance(bw33_grid, bw33_grid.load_p, bw33_grid.load_q, solar, nameplate)
    assert s.p_gen_cap[0] == pytest.approx(2 * bw33_grid.load_p.sum())
    assert s.q_gen_hi[0] == pytest.approx(2 * bw33_grid.load_q.sum())
    assert s.p_gen_cap[4] == pytest.approx(0.006)
    assert s.q_gen_hi[4] == pytest.approx(SOLAR_Q_RATIO * 0.01)
    assert s.q_gen_lo[4] == pytest.approx(-SOLAR_Q_RATIO * 0.01)
    assert s.p_gen_cap[5] == 0.0
    assert s.x.shape == (64,)
    assert np.array_equal(s.x[:32], bw33_grid.load_p[1:])
    assert np.array_equal(s.x[32:], bw33_grid.load_q[1:])


@pytest.mark.pure
def test_build_dataset_profile_solar(bw33_grid):
    spec = DatasetSpec(grid="bw33", load_mode="residential", solar_layout="DD-U", count=30, seed=1)
    instances = build_dataset(spec, bw33_grid)
    assert len(instances) == 30
    assert [s.timestamp for s in instances[:3]] == [0.0, 1.0, 2.0]
    solar = np.stack([s.solar_cap for s in instances])
    assert solar[0].sum() == 0.0  # midnight
    assert solar.max() > 0.0
    assert np.all(solar[:, 0] == 0.0)


@pytest.mark.pure
def test_build_dataset_is_seeded(bw33_grid):
    spec = DatasetSpec(count=5, seed=7)
    a = build_dataset(spec, bw33_grid)
    b = build_dataset(spec, bw33_grid)
    assert all(np.array_equal(x.p_load, y.p_load) for x, y in zip(a, b))


@pytest.mark.pure
def test_dataset_spec_validation(bw33_grid):
    with pytest.raises(ValidationError):
        DatasetSpec(count=-1)
    with pytest.raises(ValidationError):
        DatasetSpec(count=3, delta_lo=1.5, delta_hi=1.0)
    with pytest.raises(DatasetError):
        build_dataset(DatasetSpec(count=3, load_mode="mixed"), bw33_grid)
    with pytest.raises(UnknownLayout):
        build_dataset(DatasetSpec(count=3, solar_layout="S1"), bw33_grid)


@pytest.mark.pure
def test_split_partitions_the_data():
    data = list(range(100))
    train, val, test = split_dataset(data, seed=4)
    assert (len(train), len(val), len(test)) == (80, 10, 10)
    assert sorted(train + val + test) == data
    assert split_dataset(data, seed=4) == (train, val, test)
    with pytest.raises(DatasetError):
        split_dataset(data, (0.5, 0.5, 0.5))


@pytest.mark.pure
def test_scenarios_csv_round_trip(tmp_path, bw33_grid):
    instances = build_dataset(DatasetSpec(count=4, seed=2, solar_mode="flat"), bw33_grid)
    path = tmp_path / "scenarios.csv"
    save_scenarios(path, bw33_grid, instances)
    loaded = load_scenarios(path, bw33_grid)
    original, restored = ScenarioBatch.from_instances(instances), ScenarioBatch.from_instances(loaded)
    for name in ("p_load", "q_load", "p_gen_cap", "q_gen_lo", "q_gen_hi", "solar_cap", "x"):
        assert np.allclose(getattr(original, name), getattr(restored, name), rtol=1e-10, atol=1e-14)
    assert [s.index for s in loaded] == [0, 1, 2, 3]


@pytest.mark.pure
def test_refuses_empty_dataset(tmp_path, bw33_grid):
    with pytest.raises(DatasetError):
        save_scenarios(tmp_path / "scenarios.csv", bw33_grid, [])


@pytest.mark.pure
def test_zero_count_is_a_dataset_error(bw33_grid):
    """A request for no instances is a domain error, not a validation error."""
    spec = DatasetSpec(count=0)
    with pytest.raises(DatasetError):
        build_dataset(spec, bw33_grid)


@pytest.mark.pure
def test_perturbation_is_unbiased(bw33_grid):
    """About 1e5 node draws average to the nominal load."""
    rng = np.random.default_rng(0)
    loaded = bw33_grid.load_p > 0
    ratios = [perturb_loads(bw33_grid, rng).p_load[loaded] / bw33_grid.load_p[loaded] for _ in range(3200)]
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.01)


@pytest.mark.pure
def test_year_split_tests_on_876_instances():
    train, val, test = split_dataset(list(range(8760)), seed=0)
    assert (len(train), len(val), len(test)) == (7008, 876, 876)


@pytest.mark.pure
def test_ddu_solar_penetration(bw33_grid):
    """940 kW of nameplate against a 3715 kW nominal peak."""
    nameplate_kw = sum(solar_layout("bw33", "DD-U").values())
    peak_kw = bw33_grid.load_p.sum() * bw33_grid.base_power
    assert nameplate_kw / peak_kw == pytest.approx(0.253, abs=0.005)
