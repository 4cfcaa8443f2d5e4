import numpy as np
import pytest

from src.core.exceptions import BatchTooSmall, InvalidLayerShape, NonFiniteGradient
from src.core.neural import MLP, Adam, init_he


@pytest.mark.pure
def test_he_initialization_statistics():
    """Weight variance is 2 / fan_in and biases start at zero."""
    (weight, bias), = init_he([(100, 1000)], seed=0)
    assert weight.shape == (100, 1000)
    assert weight.var() == pytest.approx(2.0 / 100, rel=0.05)
    assert abs(weight.mean()) < 0.005
    assert np.all(bias == 0)


@pytest.mark.pure
def test_he_initialization_is_seeded():
    a = init_he([(4, 3), (3, 2)], seed=5)
    b = init_he([(4, 3), (3, 2)], seed=5)
    assert all(np.array_equal(wa, wb) for (wa, _), (wb, _) in zip(a, b))


@pytest.mark.pure
def test_zero_width_layer():
    with pytest.raises(InvalidLayerShape):
        init_he([(4, 0)])
    with pytest.raises(InvalidLayerShape):
        MLP(4, 0, 3)


@pytest.mark.pure
def test_train_mode_needs_two_rows():
    model = MLP(4, 5, 3)
    with pytest.raises(BatchTooSmall):
        model.forward(np.ones((1, 4)), mode="train")
    out, _ = model.forward(np.ones((1, 4)), mode="eval")
    assert out.shape == (1, 3)


@pytest.mark.pure
def test_batch_norm_normalizes_in_train_mode():
    """Normalized activations have zero mean and unit variance per unit."""
    rng = np.random.default_rng(0)
    model = MLP(8, 6, 3, seed=1)
    _, cache = model.forward(rng.normal(0.0, 10.0, size=(64, 8)), mode="train")
    for xhat in cache.normalized:
        assert np.all(np.abs(xhat.mean(axis=0)) <= 1e-6)
        assert np.allclose(xhat.var(axis=0), 1.0, atol=1e-4)


@pytest.mark.pure
def test_forward_does_not_touch_running_stats():
    model = MLP(4, 5, 3)
    before = {k: v.copy() for k, v in model.buffers.items()}
    _, cache = model.forward(np.random.default_rng(0).normal(size=(10, 4)), mode="train")
    assert all(np.array_equal(before[k], model.buffers[k]) for k in before)
    model.update_running_stats(cache)
    rows = 10
    expected = 0.9 * 1.0 + 0.1 * cache.batch_var[0] * rows / (rows - 1)
    assert np.allclose(model.buffers["var1"], expected)
    assert np.allclose(model.buffers["mean1"], 0.1 * cache.batch_mean[0])


@pytest.mark.pure
def test_eval_mode_is_deterministic():
    model = MLP(4, 5, 3, seed=2)
    x = np.random.default_rng(1).normal(size=(7, 4))
    a, _ = model.forward(x)
    b, _ = model.forward(x)
    assert np.array_equal(a, b)
    # Rows are independent in eval mode.
    single, _ = model.forward(x[2:3])
    assert np.allclose(single, a[2:3])


def _fd_check(model, x, mode, upstream, h=1e-6):
    """Compare analytic parameter gradients of sum(upstream * out) with central differences."""
    out, cache = model.forward(x, mode)
    grads = model.backward(upstream, cache)
    hidden_masks = [(model.params[f"gamma{k}"] * n + model.params[f"beta{k}"]) > 0 for k, n in
                    zip((1, 2), cache.normalized)]
    checked = 0
    for name, param in model.params.items():
        for index in np.ndindex(param.shape):
            original = param[index]
            values = []
            stable = True
            for delta in (h, -h):
                param[index] = original + delta
                shifted, shifted_cache = model.forward(x, mode)
                masks = [(model.params[f"gamma{k}"] * n + model.params[f"beta{k}"]) > 0 for k, n in
                         zip((1, 2), shifted_cache.normalized)]
                stable &= all(np.array_equal(a, b) for a, b in zip(masks, hidden_masks))
                values.append(float(np.sum(upstream * shifted)))
            param[index] = original
            if not stable:
                continue
            numeric = (values[0] - values[1]) / (2 * h)
            assert grads[name][index] == pytest.approx(numeric, rel=1e-4, abs=1e-7), (name, index)
            checked += 1
    return checked


@pytest.mark.pure
@pytest.mark.parametrize("mode", ["train", "eval"])
def test_backward_matches_finite_difference(mode):
    rng = np.random.default_rng(3)
    model = MLP(3, 4, 2, seed=4)
    model.buffers["mean1"] = rng.normal(size=4)
    model.buffers["var1"] = rng.uniform(0.5, 2.0, size=4)
    x = rng.normal(size=(6, 3))
    upstream = rng.normal(size=(6, 2))
    assert _fd_check(model, x, mode, upstream) > 40


@pytest.mark.pure
def test_tensors_round_trip():
    model = MLP(4, 5, 3, seed=9)
    model.buffers["var2"] = np.full(5, 3.0)
    clone = MLP.from_tensors(model.sizes, model.tensors())
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(clone.forward(x)[0], model.forward(x)[0])


@pytest.mark.pure
def test_adam_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0])}
    Adam().step(params, {"w": np.zeros(2)})
    assert np.array_equal(params["w"], [1.0, -2.0])


@pytest.mark.pure
def test_adam_first_step_moves_by_learning_rate():
    """With bias correction the first step is lr * sign(grad)."""
    params = {"w": np.array([1.0, -2.0])}
    Adam(lr=0.01).step(params, {"w": np.array([3.0, -0.5])})
    assert np.allclose(params["w"], [0.99, -1.99], atol=1e-8)


@pytest.mark.pure
def test_adam_rejects_non_finite_gradients():
    params = {"w": np.ones(2)}
    with pytest.raises(NonFiniteGradient):
        Adam().step(params, {"w": np.array([np.nan, 0.0])})
    assert np.array_equal(params["w"], np.ones(2))
