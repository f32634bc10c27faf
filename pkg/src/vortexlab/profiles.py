"""Smooth cutoff profiles built from the exp(-1/s) transition.

These are the C-infinity bumps used for spatial cutoffs, time windows and
mollifier kernels.  The transition function rises from 0 to 1 with all
derivatives vanishing at both ends, so sampled profiles have
super-algebraically decaying Fourier tails once the transition is resolved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["smooth_step", "smooth_step_derivative", "PlateauBump", "TimeBump", "mollifier_profile"]


def _h(s: np.ndarray, sharpness: float) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(over="ignore", divide="ignore"):
        out[pos] = np.exp(-sharpness / s[pos])
    return out


def smooth_step(s, sharpness: float = 1.0) -> np.ndarray:
    """0 for s <= 0, 1 for s >= 1, C-infinity monotone in between."""
    s = np.asarray(s, dtype=np.float64)
    a = _h(s, sharpness)
    b = _h(1.0 - s, sharpness)
    with np.errstate(invalid="ignore"):
        out = np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, a / (a + b)))
    return out


def smooth_step_derivative(s, sharpness: float = 1.0) -> np.ndarray:
    """Derivative of smooth_step (analytic, not differenced)."""
    s = np.asarray(s, dtype=np.float64)
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    a = np.exp(-sharpness / si)
    b = np.exp(-sharpness / (1.0 - si))
    da = a * sharpness / si**2
    db = -b * sharpness / (1.0 - si) ** 2
    out[inside] = (da * b - a * db) / (a + b) ** 2
    return out


@dataclass(frozen=True)
class PlateauBump:
    """Radial profile equal to 1 for r <= r_inner, 0 for r >= r_outer."""

    r_inner: float
    r_outer: float
    sharpness: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.r_inner < self.r_outer:
            raise ValueError(f"need 0 <= r_inner < r_outer, got {self.r_inner}, {self.r_outer}")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        s = (self.r_outer - r) / (self.r_outer - self.r_inner)
        return smooth_step(s, self.sharpness)


@dataclass(frozen=True)
class TimeBump:
    """1 on [t1, t2], 0 outside [t0, t3], smooth ramps between; analytic derivative."""

    t0: float
    t1: float
    t2: float
    t3: float
    sharpness: float = 1.0

    def __post_init__(self):
        if not (self.t0 < self.t1 <= self.t2 < self.t3):
            raise ValueError("need t0 < t1 <= t2 < t3")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        up = smooth_step((t - self.t0) / (self.t1 - self.t0), self.sharpness)
        down = smooth_step((self.t3 - t) / (self.t3 - self.t2), self.sharpness)
        return up * down

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        up = smooth_step((t - self.t0) / (self.t1 - self.t0), self.sharpness)
        down = smooth_step((self.t3 - t) / (self.t3 - self.t2), self.sharpness)
        dup = smooth_step_derivative((t - self.t0) / (self.t1 - self.t0), self.sharpness) / (
            self.t1 - self.t0
        )
        ddown = -smooth_step_derivative((self.t3 - t) / (self.t3 - self.t2), self.sharpness) / (
            self.t3 - self.t2
        )
        return dup * down + up * ddown


def mollifier_profile(r, sharpness: float = 1.0) -> np.ndarray:
    """Unnormalized exp(-s/(1-r^2)) bump on the unit ball (radial values)."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = r < 1.0
    with np.errstate(over="ignore"):
        out[inside] = np.exp(-sharpness / (1.0 - r[inside] ** 2))
    return out
