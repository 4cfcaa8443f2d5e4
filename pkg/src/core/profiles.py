"""Parametric daily load and solar profiles.

Each profile is a baseline plus Gaussian bumps (circular in time of day) or
raised-cosine windows, clipped to [0, 1.3]. Day index 0 is a Monday.
"""

from typing import Callable, Dict, Tuple

import numpy as np

RESIDENTIAL_KINDS = (
    "residential-nominal",
    "early-riser",
    "weekend",
    "covid",
    "summer-peak",
    "winter-peak",
)
COMMERCIAL_KINDS = ("hospital", "office", "restaurant", "retail", "warehouse")
PROFILE_KINDS = RESIDENTIAL_KINDS + COMMERCIAL_KINDS + ("solar",)

MAX_MULTIPLIER = 1.3

# (center hour, width hours, amplitude) on top of a baseline.
_BUMPS: Dict[str, Tuple[float, Tuple[Tuple[float, float, float], ...]]] = {
    "residential-nominal": (0.35, ((7.5, 1.2, 0.45), (19.5, 2.0, 0.65))),
    "early-riser": (0.35, ((6.0, 1.2, 0.45), (17.5, 2.0, 0.6))),
    "weekend": (0.45, ((16.5, 4.0, 0.6),)),
    "covid": (0.35, ((9.5, 1.5, 0.45), (19.5, 2.2, 0.85))),
    "summer-peak": (0.35, ((17.0, 4.5, 0.9),)),
    "winter-peak": (0.3, ((8.0, 1.3, 0.35), (22.0, 1.5, 0.4))),
}


def _bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    d = np.abs(t - center) % 24.0
    d = np.minimum(d, 24.0 - d)
    return np.exp(-0.5 * (d / width) ** 2)


def _window(t: np.ndarray, start: float, end: float, ramp: float = 1.0) -> np.ndarray:
    """1 on [start, end], 0 outside [start - ramp, end + ramp], cosine ramps."""
    rise = np.clip((t - (start - ramp)) / ramp, 0.0, 1.0)
    fall = np.clip(((end + ramp) - t) / ramp, 0.0, 1.0)
    return 0.5 * (1 - np.cos(np.pi * rise)) * 0.5 * (1 - np.cos(np.pi * fall))


def _is_weekday(day: int) -> bool:
    return day % 7 < 5


def _hospital(t: np.ndarray, day: int) -> np.ndarray:
    return 0.5 + 0.5 * _window(t, 6.0, 18.0)


def _office(t: np.ndarray, day: int) -> np.ndarray:
    if not _is_weekday(day):
        return np.full_like(t, 0.2)
    return 0.2 + 0.7 * _window(t, 5.0, 19.0) + 0.1 * _bump(t, 6.0, 1.0)


def _restaurant(t: np.ndarray, day: int) -> np.ndarray:
    meals = sum(amp * _bump(t, c, 1.0) for c, amp in ((8.0, 0.25), (12.5, 0.45), (18.5, 0.5)))
    return 0.15 + _window(t, 6.0, 23.0, ramp=0.5) * (0.3 + meals)


def _retail(t: np.ndarray, day: int) -> np.ndarray:
    scale = 1.0 if _is_weekday(day) else 0.8
    return 0.15 + scale * 0.85 * _window(t, 9.0, 17.0, ramp=1.5)


def _warehouse(t: np.ndarray, day: int) -> np.ndarray:
    if not _is_weekday(day):
        return np.full_like(t, 0.1)
    return 0.1 + 0.9 * _window(t, 10.0, 15.0)


def _solar(t: np.ndarray, day: int) -> np.ndarray:
    daylight = 12.0 + 3.0 * np.sin(2 * np.pi * (day - 80) / 365.0)
    sunrise = 12.0 - daylight / 2.0
    phase = np.clip((t - sunrise) / daylight, 0.0, 1.0)
    return np.sin(np.pi * phase) ** 1.2


_SHAPES: Dict[str, Callable[[np.ndarray, int], np.ndarray]] = {
    "hospital": _hospital,
    "office": _office,
    "restaurant": _restaurant,
    "retail": _retail,
    "warehouse": _warehouse,
    "solar": _solar,
}


def synth_profile(kind: str, t, day: int = 0):
    """Load or solar multiplier at time of day ``t`` (hours in [0, 24)).

    Args:
        kind: One of PROFILE_KINDS
        t: Scalar or array of hours
        day: Day index, used for weekday/weekend and solar season

    Returns:
        Multiplier in [0, 1.3], same shape as ``t``
    """
    hours = np.asarray(t, dtype=float)
    if kind in _BUMPS:
        base, bumps = _BUMPS[kind]
        value = base + sum(amp * _bump(hours, c, w) for c, w, amp in bumps)
    elif kind in _SHAPES:
        value = _SHAPES[kind](hours, day)
    else:
        raise ValueError(f"unknown profile kind '{kind}'")
    value = np.clip(value, 0.0, MAX_MULTIPLIER)
    return float(value) if np.ndim(value) == 0 else value
