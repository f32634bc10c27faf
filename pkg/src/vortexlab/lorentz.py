"""Decreasing rearrangement and Lorentz quasi-norms on weighted discrete samples.

All quantities are exact for the discrete measure induced by grid cells: the
rearrangement is realized by sorting, and the L^{p,q} integral of the
resulting step function is evaluated in closed form, so nothing here carries
quadrature error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridField

__all__ = [
    "WeightedSamples",
    "RearrangedFunction",
    "LorentzIndex",
    "rearrange",
    "lorentz_norm",
    "InterpolationReport",
    "interpolation_check",
    "theorem_functional",
    "samples_from_series",
    "write_rearrangement_csv",
]


@dataclass(frozen=True)
class WeightedSamples:
    """Nonnegative sample values with positive cell measures."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if values.shape != weights.shape:
            raise ValueError("values and weights must have equal length")
        if np.any(values < 0):
            raise ValueError("sample values must be nonnegative")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    def scaled(self, factor: float) -> "WeightedSamples":
        return WeightedSamples(self.values * abs(factor), self.weights)


@dataclass(frozen=True)
class RearrangedFunction:
    """Right-continuous decreasing step function: value levels[i] on
    (cut_points[i-1], cut_points[i]], with cut_points the cumulative measure."""

    levels: np.ndarray
    cut_points: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64)
        cuts = np.asarray(self.cut_points, dtype=np.float64)
        if levels.shape != cuts.shape:
            raise ValueError("levels and cut_points must have equal length")
        if np.any(np.diff(levels) >= 0):
            raise ValueError("levels must be strictly decreasing")
        if np.any(np.diff(cuts) <= 0) or (cuts.size and cuts[0] <= 0):
            raise ValueError("cut_points must be positive and increasing")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "cut_points", cuts)

    @property
    def total_measure(self) -> float:
        return float(self.cut_points[-1]) if self.cut_points.size else 0.0

    def __call__(self, lam) -> np.ndarray:
        """Evaluate f*(lambda); zero beyond the total measure."""
        lam = np.asarray(lam, dtype=np.float64)
        idx = np.searchsorted(self.cut_points, lam, side="left")
        out = np.where(idx < self.levels.size, self.levels[np.minimum(idx, self.levels.size - 1)], 0.0)
        return np.where(lam >= self.total_measure, 0.0, out)

    def measure_above(self, alpha: float) -> float:
        """mu({f* > alpha}) evaluated from the step structure."""
        keep = self.levels > alpha
        if not np.any(keep):
            return 0.0
        return float(self.cut_points[np.nonzero(keep)[0][-1]])


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    q: float

    def __post_init__(self):
        if not (0 < self.p < np.inf):
            raise ValueError(f"p must be in (0, inf), got {self.p}")
        if not (0 < self.q):
            raise ValueError(f"q must be in (0, inf], got {self.q}")


def rearrange(samples: WeightedSamples) -> RearrangedFunction:
    """Sort values descending and accumulate weights into the step function."""
    order = np.argsort(samples.values, kind="stable")[::-1]
    v = samples.values[order]
    w = samples.weights[order]
    # merge equal values into single steps
    new_level = np.empty(v.size, dtype=bool)
    new_level[0] = True
    new_level[1:] = v[1:] != v[:-1]
    starts = np.nonzero(new_level)[0]
    levels = v[starts]
    cum = np.cumsum(w)
    ends = np.append(starts[1:] - 1, v.size - 1)
    cuts = cum[ends]
    return RearrangedFunction(levels, cuts)


def lorentz_norm(samples: WeightedSamples, idx: LorentzIndex) -> float:
    """L^{p,q} quasi-norm via closed-form integration of t^{q/p-1} over steps.

    For q = inf this is the sup of level * measure^{1/p} over the steps.
    """
    star = rearrange(samples)
    return _norm_of_rearranged(star, idx)


def _norm_of_rearranged(star: RearrangedFunction, idx: LorentzIndex) -> float:
    levels, cuts = star.levels, star.cut_points
    if levels.size == 0:
        return 0.0
    positive = levels > 0
    levels, cuts = levels[positive], cuts[: np.count_nonzero(positive)]
    if levels.size == 0:
        return 0.0
    p, q = idx.p, idx.q
    if np.isinf(q):
        return float(np.max(levels * cuts ** (1.0 / p)))
    lower = np.concatenate([[0.0], cuts[:-1]])
    pieces = levels**q * (p / q) * (cuts ** (q / p) - lower ** (q / p))
    return float(np.sum(pieces) ** (1.0 / q))


@dataclass(frozen=True)
class InterpolationReport:
    lhs: float
    rhs: float
    hypothesis_satisfied: bool
    interpolated: LorentzIndex
    theta: float
    worst_hypothesis_margin: float


def interpolation_check(
    f: WeightedSamples,
    f0: WeightedSamples,
    f1: WeightedSamples,
    nu: float,
    idx0: LorentzIndex,
    idx1: LorentzIndex,
    delta_grid: np.ndarray,
) -> InterpolationReport:
    """Check the two-Lorentz-norm interpolation bound on a common sample grid.

    Hypothesis: 2|f| <= delta*f0 + delta^{-nu}*f1 for every delta, verified
    pointwise on delta_grid and at the per-point optimizing delta.  When it
    holds, asserts lhs <= rhs*(1 + 1e-10) where lhs is the L^{p,q} norm of f
    at the interpolated index and rhs = |f0|^{1-theta} * |f1|^{theta},
    theta = 1/(1+nu).
    """
    if not (f.values.shape == f0.values.shape == f1.values.shape):
        raise ValueError("samples must share a common grid")
    if not (np.array_equal(f.weights, f0.weights) and np.array_equal(f.weights, f1.weights)):
        raise ValueError("samples must share a common grid")
    if nu <= 0:
        raise ValueError("nu must be positive")
    theta = 1.0 / (1.0 + nu)

    margin = np.inf
    ok = True
    for d in np.asarray(delta_grid, dtype=np.float64):
        if d <= 0:
            raise ValueError("delta_grid entries must be positive")
        gap = d * f0.values + d ** (-nu) * f1.values - 2.0 * f.values
        margin = min(margin, float(gap.min()))
        ok = ok and bool(np.all(gap >= -1e-12 * max(1.0, float(np.max(f.values, initial=0.0)))))
    # the optimizing delta makes the bound 2 * f0^(1-theta) * f1^theta
    prod = f0.values ** (1.0 - theta) * f1.values**theta
    gap_opt = 2.0 * prod - 2.0 * f.values
    margin = min(margin, float(gap_opt.min()))
    ok = ok and bool(np.all(gap_opt >= -1e-12 * max(1.0, float(np.max(f.values, initial=0.0)))))

    inv_p = (nu / (1.0 + nu)) / idx0.p + (1.0 / (1.0 + nu)) / idx1.p
    if np.isinf(idx0.q) and np.isinf(idx1.q):
        q = np.inf
    else:
        inv_q = (nu / (1.0 + nu)) / idx0.q + (1.0 / (1.0 + nu)) / idx1.q
        q = 1.0 / inv_q
    interp = LorentzIndex(1.0 / inv_p, q)

    lhs = lorentz_norm(f, interp)
    rhs = lorentz_norm(f0, idx0) ** (1.0 - theta) * lorentz_norm(f1, idx1) ** theta
    if ok and lhs > rhs * (1.0 + 1e-10):
        raise AssertionError(
            f"interpolation bound violated: lhs={lhs!r} > rhs={rhs!r} with hypothesis satisfied"
        )
    return InterpolationReport(lhs, rhs, ok, interp, theta, margin)


def samples_from_series(
    fields: list[GridField],
    mask: np.ndarray | None = None,
) -> WeightedSamples:
    """Flatten a time series of scalar fields into weighted samples.

    Cell weight is dx^3 * dt with dt from midpoint differences of the
    snapshot times (endpoints take half intervals).
    """
    if len(fields) < 2:
        raise ValueError("need at least two time slices")
    times = np.array([f.time_stamp for f in fields])
    if np.any(np.diff(times) <= 0):
        raise ValueError("time stamps must be increasing")
    dt = np.empty_like(times)
    dt[1:-1] = 0.5 * (times[2:] - times[:-2])
    dt[0] = 0.5 * (times[1] - times[0])
    dt[-1] = 0.5 * (times[-1] - times[-2])
    values = []
    weights = []
    for f, w_t in zip(fields, dt):
        if f.components != 1:
            raise ValueError("series must hold scalar fields")
        vals = np.abs(f.data[0])
        if mask is not None:
            vals = vals[mask]
        values.append(vals.ravel())
        weights.append(np.full(vals.size, f.spec.cell_volume * w_t))
    return WeightedSamples(np.concatenate(values), np.concatenate(weights))


def theorem_functional(
    deriv_field_series: list[GridField],
    n: int,
    q: float,
    c_n: float,
    time_grid: np.ndarray | None = None,
) -> float:
    """Thresholded space-time Lorentz functional of a derivative-magnitude series.

    Given scalar slices holding |grad^n omega| at positive times, forms
    g = |grad^n omega|^(4/(n+2)), keeps cells where g > c_n * t^{-2} using
    each cell's own t, and returns the L^{1,q} norm with cell weight dx^3*dt.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    times = (
        np.array([f.time_stamp for f in deriv_field_series])
        if time_grid is None
        else np.asarray(time_grid, dtype=np.float64)
    )
    if times.size != len(deriv_field_series):
        raise ValueError("time grid length mismatch")
    if np.any(times <= 0):
        raise ValueError("threshold t^{-2} needs positive times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time stamps must be increasing")
    dt = np.empty_like(times)
    if times.size == 1:
        raise ValueError("need at least two time slices")
    dt[1:-1] = 0.5 * (times[2:] - times[:-2])
    dt[0] = 0.5 * (times[1] - times[0])
    dt[-1] = 0.5 * (times[-1] - times[-2])

    exponent = 4.0 / (n + 2.0)
    values = []
    weights = []
    for f, t, w_t in zip(deriv_field_series, times, dt):
        g = np.abs(f.data[0]) ** exponent
        if np.isfinite(c_n):
            keep = g > c_n / t**2
            g = np.where(keep, g, 0.0)
        else:
            g = np.zeros_like(g)
        values.append(g.ravel())
        weights.append(np.full(g.size, f.spec.cell_volume * w_t))
    samples = WeightedSamples(np.concatenate(values), np.concatenate(weights))
    if not np.any(samples.values > 0):
        return 0.0
    return lorentz_norm(samples, LorentzIndex(1.0, q))


def write_rearrangement_csv(star: RearrangedFunction, path: str | Path, label: str = "f*") -> None:
    """Export (lambda, f*(lambda)) step pairs for plotting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", f"{label}(lambda)"])
        lower = 0.0
        for level, cut in zip(star.levels, star.cut_points):
            writer.writerow([f"{lower:.17g}", f"{level:.17g}"])
            writer.writerow([f"{cut:.17g}", f"{level:.17g}"])
            lower = cut
