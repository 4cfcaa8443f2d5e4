"""Physics-informed rounding of switch probabilities and the output squashers.

``phyr_round`` sorts switch probabilities and forces all but (at most) two of
them to 0 or 1 so that the radiality cutoff holds. ``insi`` is a steep
sigmoid-like relaxation of the step function; ``scale_to_box`` maps raw network
outputs strictly inside a box. Every function works on single vectors or on
batches along the leading axis and has a matching backward helper.
"""

from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
from scipy.special import expit

from .exceptions import BadBounds, BadCutoff

RoundingMode = Literal["train", "inference"]

INSI_TAU = 5.0
INSI_MU = 1.0
LOGIT_CLIP = 30.0
_EXP_CLIP = 700.0


@dataclass(frozen=True)
class RoundingPlan:
    """Sets produced by one rounding pass; masks share the input shape."""

    cutoff: int
    mode: RoundingMode
    order: np.ndarray  # descending-probability permutation (stable)
    forced_one: np.ndarray
    forced_zero: np.ndarray
    free: np.ndarray


def phyr_round(
    probabilities: np.ndarray, cutoff: int, mode: RoundingMode = "inference"
) -> Tuple[np.ndarray, RoundingPlan]:
    """Round switch probabilities around the radiality cutoff L.

    Inference mode closes the L most likely switches. Train mode closes the
    top L-1, opens ranks beyond L+1 and passes the two middle entries through
    unchanged. L=0 opens everything and L=m closes everything in both modes.

    Raises:
        BadCutoff: if L is outside [0, m]
    """
    p = np.asarray(probabilities, dtype=float)
    m = p.shape[-1]
    if not 0 <= cutoff <= m:
        raise BadCutoff(f"cutoff {cutoff} outside [0, {m}]")
    order = np.argsort(-p, axis=-1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(m), order.shape), axis=-1)

    if cutoff == 0:
        one = np.zeros(p.shape, dtype=bool)
        zero = np.ones(p.shape, dtype=bool)
    elif cutoff == m:
        one = np.ones(p.shape, dtype=bool)
        zero = np.zeros(p.shape, dtype=bool)
    elif mode == "inference":
        one = rank < cutoff
        zero = ~one
    else:
        one = rank < cutoff - 1
        zero = rank > cutoff
    free = ~(one | zero)

    rounded = np.where(one, 1.0, np.where(zero, 0.0, p))
    return rounded, RoundingPlan(cutoff, mode, order, one, zero, free)


def phyr_backward(grad: np.ndarray, plan: RoundingPlan) -> np.ndarray:
    """Forced entries pass no gradient; free entries pass it unchanged."""
    return np.where(plan.free, grad, 0.0)


def insi(u: np.ndarray, tau: float = INSI_TAU, mu: float = INSI_MU) -> np.ndarray:
    """Positive part of 2(1+mu)/(mu + exp(-tau u)) - 1, saturated at 1."""
    e = np.exp(np.clip(-tau * np.asarray(u, dtype=float), -_EXP_CLIP, _EXP_CLIP))
    return np.clip(2.0 * (1.0 + mu) / (mu + e) - 1.0, 0.0, 1.0)


def insi_grad(u: np.ndarray, tau: float = INSI_TAU, mu: float = INSI_MU) -> np.ndarray:
    """Derivative of :func:`insi`; zero wherever the output is clamped."""
    u = np.asarray(u, dtype=float)
    e = np.exp(np.clip(-tau * u, -_EXP_CLIP, _EXP_CLIP))
    raw = 2.0 * (1.0 + mu) / (mu + e) - 1.0
    slope = 2.0 * (1.0 + mu) * tau * e / (mu + e) ** 2
    return np.where((raw > 0.0) & (raw < 1.0), slope, 0.0)


def _check_box(lo, hi) -> None:
    if np.any(np.asarray(lo) >= np.asarray(hi)):
        raise BadBounds("box scaling needs lo < hi")


def scale_to_box(raw: np.ndarray, lo, hi) -> np.ndarray:
    """lo + sigmoid(raw) (hi - lo), strictly inside (lo, hi)."""
    _check_box(lo, hi)
    s = expit(np.clip(raw, -LOGIT_CLIP, LOGIT_CLIP))
    return lo + s * (np.asarray(hi) - np.asarray(lo))


def scale_to_box_grad(raw: np.ndarray, lo, hi) -> np.ndarray:
    _check_box(lo, hi)
    raw = np.asarray(raw, dtype=float)
    s = expit(np.clip(raw, -LOGIT_CLIP, LOGIT_CLIP))
    slope = s * (1.0 - s) * (np.asarray(hi) - np.asarray(lo))
    return np.where(np.abs(raw) < LOGIT_CLIP, slope, 0.0)


def sigmoid(u: np.ndarray) -> np.ndarray:
    return expit(u)


def sigmoid_grad(u: np.ndarray) -> np.ndarray:
    s = expit(u)
    return s * (1.0 - s)


def clamp01(u: np.ndarray) -> np.ndarray:
    return np.clip(u, 0.0, 1.0)


def clamp01_grad(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return ((u > 0.0) & (u < 1.0)).astype(float)
