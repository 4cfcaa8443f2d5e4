"""Fully connected predictor with hand-written backpropagation.

Architecture: two hidden blocks of Linear -> BatchNorm -> ReLU, then a linear
output layer. Weights use He initialization. Gradients are computed in
``MLP.backward`` from the cache of the matching ``forward`` call, and ``Adam``
applies them in place.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np

from .exceptions import BatchTooSmall, InvalidLayerShape, NonFiniteGradient

logger = logging.getLogger(__name__)

BN_MOMENTUM = 0.1
BN_EPS = 1e-5

Mode = Literal["train", "eval"]
SeedLike = Union[int, np.random.Generator]


def init_he(shapes: Sequence[Tuple[int, int]], seed: SeedLike = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Weights ~ N(0, 2 / fan_in) and zero biases for each (fan_in, fan_out).

    Raises:
        InvalidLayerShape: if any dimension is not positive
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in shapes:
        if fan_in <= 0 or fan_out <= 0:
            raise InvalidLayerShape(f"layer shape ({fan_in}, {fan_out}) must be positive")
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append((weight, np.zeros(fan_out)))
    return layers


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by ``backward``."""

    mode: Mode
    x: np.ndarray
    pre: List[np.ndarray] = field(default_factory=list)  # affine outputs of hidden layers
    normalized: List[np.ndarray] = field(default_factory=list)
    inv_std: List[np.ndarray] = field(default_factory=list)
    batch_mean: List[np.ndarray] = field(default_factory=list)
    batch_var: List[np.ndarray] = field(default_factory=list)
    hidden: List[np.ndarray] = field(default_factory=list)  # post-ReLU activations


class MLP:
    """input -> [Linear, BatchNorm, ReLU] x 2 -> Linear."""

    HIDDEN_LAYERS = 2

    def __init__(self, input_size: int, hidden: int, output_size: int, seed: SeedLike = 0):
        self.sizes = (input_size, hidden, output_size)
        dims = [input_size] + [hidden] * self.HIDDEN_LAYERS + [output_size]
        layers = init_he(list(zip(dims[:-1], dims[1:])), seed)
        self.params: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        for k, (weight, bias) in enumerate(layers, start=1):
            self.params[f"W{k}"] = weight
            self.params[f"b{k}"] = bias
        for k in range(1, self.HIDDEN_LAYERS + 1):
            self.params[f"gamma{k}"] = np.ones(hidden)
            self.params[f"beta{k}"] = np.zeros(hidden)
            self.buffers[f"mean{k}"] = np.zeros(hidden)
            self.buffers[f"var{k}"] = np.ones(hidden)

    def forward(self, x: np.ndarray, mode: Mode = "eval") -> Tuple[np.ndarray, ForwardCache]:
        """Raw outputs for a batch.

        Train mode normalizes with batch statistics and leaves the running
        statistics untouched; call :meth:`update_running_stats` with the cache.

        Raises:
            BatchTooSmall: train mode with fewer than two rows
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if mode == "train" and x.shape[0] < 2:
            raise BatchTooSmall(f"batch normalization needs at least 2 rows, got {x.shape[0]}")
        cache = ForwardCache(mode=mode, x=x)
        h = x
        for k in range(1, self.HIDDEN_LAYERS + 1):
            a = h @ self.params[f"W{k}"] + self.params[f"b{k}"]
            if mode == "train":
                mean = a.mean(axis=0)
                var = a.var(axis=0)
            else:
                mean = self.buffers[f"mean{k}"]
                var = self.buffers[f"var{k}"]
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (a - mean) * inv_std
            h = np.maximum(self.params[f"gamma{k}"] * xhat + self.params[f"beta{k}"], 0.0)
            cache.pre.append(a)
            cache.normalized.append(xhat)
            cache.inv_std.append(inv_std)
            cache.batch_mean.append(mean)
            cache.batch_var.append(var)
            cache.hidden.append(h)
        out_k = self.HIDDEN_LAYERS + 1
        return h @ self.params[f"W{out_k}"] + self.params[f"b{out_k}"], cache

    def backward(self, d_out: np.ndarray, cache: ForwardCache) -> Dict[str, np.ndarray]:
        """Parameter gradients for an upstream gradient on the raw outputs."""
        grads: Dict[str, np.ndarray] = {}
        out_k = self.HIDDEN_LAYERS + 1
        h_last = cache.hidden[-1]
        grads[f"W{out_k}"] = h_last.T @ d_out
        grads[f"b{out_k}"] = d_out.sum(axis=0)
        d_h = d_out @ self.params[f"W{out_k}"].T

        for k in range(self.HIDDEN_LAYERS, 0, -1):
            i = k - 1
            xhat = cache.normalized[i]
            bn_out = self.params[f"gamma{k}"] * xhat + self.params[f"beta{k}"]
            d_bn = d_h * (bn_out > 0.0)
            grads[f"gamma{k}"] = (d_bn * xhat).sum(axis=0)
            grads[f"beta{k}"] = d_bn.sum(axis=0)
            d_xhat = d_bn * self.params[f"gamma{k}"]
            if cache.mode == "train":
                rows = xhat.shape[0]
                d_a = (cache.inv_std[i] / rows) * (
                    rows * d_xhat - d_xhat.sum(axis=0) - xhat * (d_xhat * xhat).sum(axis=0)
                )
            else:
                d_a = d_xhat * cache.inv_std[i]
            below = cache.x if k == 1 else cache.hidden[i - 1]
            grads[f"W{k}"] = below.T @ d_a
            grads[f"b{k}"] = d_a.sum(axis=0)
            d_h = d_a @ self.params[f"W{k}"].T
        return grads

    def update_running_stats(self, cache: ForwardCache, momentum: float = BN_MOMENTUM) -> None:
        """Exponential moving averages of batch mean and unbiased variance."""
        rows = cache.x.shape[0]
        for k in range(1, self.HIDDEN_LAYERS + 1):
            unbiased = cache.batch_var[k - 1] * rows / (rows - 1)
            self.buffers[f"mean{k}"] = (1 - momentum) * self.buffers[f"mean{k}"] + momentum * cache.batch_mean[k - 1]
            self.buffers[f"var{k}"] = (1 - momentum) * self.buffers[f"var{k}"] + momentum * unbiased

    def tensors(self) -> Dict[str, np.ndarray]:
        return {**self.params, **self.buffers}

    @classmethod
    def from_tensors(cls, sizes: Tuple[int, int, int], tensors: Dict[str, np.ndarray]) -> "MLP":
        model = cls(*sizes, seed=0)
        for name in model.params:
            model.params[name] = np.array(tensors[name], dtype=float)
        for name in model.buffers:
            model.buffers[name] = np.array(tensors[name], dtype=float)
        return model


class Adam:
    """ADAM with bias correction, updating parameter arrays in place."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        """
        Raises:
            NonFiniteGradient: if any gradient entry is NaN or infinite
        """
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradient(f"non-finite gradient for '{name}'")
        self.t += 1
        for name, grad in grads.items():
            m = self.m.get(name, np.zeros_like(grad))
            v = self.v.get(name, np.zeros_like(grad))
            m = self.beta1 * m + (1 - self.beta1) * grad
            v = self.beta2 * v + (1 - self.beta2) * grad**2
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
