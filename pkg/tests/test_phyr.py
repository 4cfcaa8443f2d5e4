import numpy as np
import pytest

from src.core.exceptions import BadBounds, BadCutoff
from src.core.phyr import (
    LOGIT_CLIP,
    clamp01,
    clamp01_grad,
    insi,
    insi_grad,
    phyr_backward,
    phyr_round,
    scale_to_box,
    scale_to_box_grad,
    sigmoid,
    sigmoid_grad,
)


@pytest.mark.pure
def test_inference_closes_top_l():
    rounded, plan = phyr_round(np.array([0.2, 0.9, 0.5, 0.7]), 2)
    assert list(rounded) == [0.0, 1.0, 0.0, 1.0]
    assert not plan.free.any()


@pytest.mark.pure
def test_train_mode_leaves_two_free_entries():
    """Top L-1 forced to 1, ranks L and L+1 pass through, the rest forced to 0."""
    p = np.array([0.2, 0.9, 0.5, 0.7, 0.1])
    rounded, plan = phyr_round(p, 2, mode="train")
    assert list(rounded) == [0.0, 1.0, 0.5, 0.7, 0.0]
    assert list(plan.free) == [False, False, True, True, False]
    assert list(plan.order) == [1, 3, 2, 0, 4]


@pytest.mark.pure
def test_ties_keep_input_order():
    rounded, _ = phyr_round(np.array([0.5, 0.5, 0.5]), 1)
    assert list(rounded) == [1.0, 0.0, 0.0]


@pytest.mark.pure
@pytest.mark.parametrize("mode", ["train", "inference"])
def test_extreme_cutoffs(mode):
    p = np.array([0.3, 0.6, 0.1])
    assert list(phyr_round(p, 0, mode)[0]) == [0.0, 0.0, 0.0]
    assert list(phyr_round(p, 3, mode)[0]) == [1.0, 1.0, 1.0]


@pytest.mark.pure
def test_bad_cutoff():
    with pytest.raises(BadCutoff):
        phyr_round(np.array([0.1, 0.2]), 3)
    with pytest.raises(BadCutoff):
        phyr_round(np.array([0.1, 0.2]), -1)


@pytest.mark.pure
def test_cardinality_over_random_batches():
    """Inference output sums to L; train output lies within one of L."""
    rng = np.random.default_rng(0)
    for m in range(2, 21):
        for cutoff in range(0, m + 1):
            p = rng.random((500, m))
            hard, _ = phyr_round(p, cutoff, "inference")
            assert np.all(hard.sum(axis=1) == cutoff)
            assert set(np.unique(hard)) <= {0.0, 1.0}
            soft, plan = phyr_round(p, cutoff, "train")
            total = soft.sum(axis=1)
            assert np.all(total >= cutoff - 1 - 1e-12) and np.all(total <= cutoff + 1 + 1e-12)
            assert np.all(plan.free.sum(axis=1) == (2 if 0 < cutoff < m else 0))


@pytest.mark.pure
def test_backward_passes_free_entries_only():
    _, plan = phyr_round(np.array([0.2, 0.9, 0.5, 0.7, 0.1]), 2, mode="train")
    grad = phyr_backward(np.ones(5), plan)
    assert list(grad) == [0.0, 0.0, 1.0, 1.0, 0.0]


@pytest.mark.pure
def test_insi_values():
    assert insi(0.0) == pytest.approx(1.0)
    assert insi(10.0) == 1.0
    assert insi(-100.0) == 0.0
    assert insi(-1e6) == 0.0  # exponent is clipped
    mid = insi(-0.1)
    assert 0.0 < mid < 1.0


@pytest.mark.pure
def test_insi_grad_matches_finite_difference():
    u = np.linspace(-0.2, -0.01, 9)
    h = 1e-6
    numeric = (insi(u + h) - insi(u - h)) / (2 * h)
    assert np.allclose(insi_grad(u), numeric, rtol=1e-5)
    assert np.all(insi_grad(np.array([-5.0, 0.5])) == 0.0)


@pytest.mark.pure
def test_scale_to_box():
    assert scale_to_box(0.0, 2.0, 4.0) == pytest.approx(3.0)
    for raw in (-20.0, 20.0):
        value = scale_to_box(raw, 2.0, 4.0)
        assert 2.0 < value < 4.0
    assert scale_to_box(1e5, 0.0, 1.0) <= 1.0
    assert scale_to_box_grad(np.array([LOGIT_CLIP + 1]), 0.0, 1.0)[0] == 0.0
    with pytest.raises(BadBounds):
        scale_to_box(0.0, 1.0, 1.0)


@pytest.mark.pure
def test_scale_to_box_grad_matches_finite_difference():
    raw = np.linspace(-4, 4, 11)
    h = 1e-6
    numeric = (scale_to_box(raw + h, -1.0, 3.0) - scale_to_box(raw - h, -1.0, 3.0)) / (2 * h)
    assert np.allclose(scale_to_box_grad(raw, -1.0, 3.0), numeric, rtol=1e-6)


@pytest.mark.pure
def test_squashers():
    u = np.array([-0.5, 0.25, 1.5])
    assert np.allclose(clamp01(u), [0.0, 0.25, 1.0])
    assert np.allclose(clamp01_grad(u), [0.0, 1.0, 0.0])
    assert sigmoid(0.0) == pytest.approx(0.5)
    assert sigmoid_grad(0.0) == pytest.approx(0.25)


@pytest.mark.pure
def test_inference_rounding_is_idempotent():
    rng = np.random.default_rng(21)
    for cutoff in range(0, 9):
        p = rng.uniform(size=(50, 8))
        once, _ = phyr_round(p, cutoff)
        twice, _ = phyr_round(once, cutoff)
        assert np.array_equal(once, twice)


@pytest.mark.pure
@pytest.mark.parametrize("mode", ["train", "inference"])
def test_rounding_commutes_with_permutation(mode):
    rng = np.random.default_rng(22)
    for _ in range(50):
        p = rng.uniform(size=8)
        perm = rng.permutation(8)
        rounded, _ = phyr_round(p, 3, mode)
        permuted, _ = phyr_round(p[perm], 3, mode)
        assert np.array_equal(permuted, rounded[perm])


@pytest.mark.pure
@pytest.mark.parametrize("mode", ["train", "inference"])
def test_forced_ones_depend_on_ranking_only(mode):
    """Raising every probability while keeping their order leaves the forced set alone."""
    rng = np.random.default_rng(23)
    for _ in range(50):
        low = rng.uniform(size=8)
        high = np.sqrt(low)
        assert np.all(high >= low)
        _, plan_low = phyr_round(low, 3, mode)
        _, plan_high = phyr_round(high, 3, mode)
        assert np.array_equal(plan_low.forced_one, plan_high.forced_one)
        assert np.array_equal(plan_low.forced_zero, plan_high.forced_zero)
