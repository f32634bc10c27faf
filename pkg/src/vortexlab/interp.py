"""Periodic trilinear space interpolation and cubic time interpolation.

Evaluation is batched: positions come as (m, 3) arrays and all gathers are
vectorized, which is what makes trajectory integration and cylinder
averaging affordable in pure numpy.
"""

from __future__ import annotations

import numpy as np

from .grid import GridField, GridSpec

__all__ = ["trilinear", "TimeInterpolator"]


def trilinear(field: GridField, positions: np.ndarray) -> np.ndarray:
    """Sample a field at arbitrary points with periodic trilinear interpolation.

    positions: (m, 3).  Returns (m,) for scalar fields, (m, c) otherwise.
    """
    spec = field.spec
    n = spec.n_points_per_axis
    pos = np.asarray(positions, dtype=np.float64)
    squeeze = pos.ndim == 1
    pos = np.atleast_2d(pos)
    frac = (pos - np.asarray(spec.origin_offset)) / spec.h
    i0 = np.floor(frac).astype(np.int64)
    t = frac - i0
    i0 %= n
    i1 = (i0 + 1) % n

    data = field.data
    ix0, iy0, iz0 = i0[:, 0], i0[:, 1], i0[:, 2]
    ix1, iy1, iz1 = i1[:, 0], i1[:, 1], i1[:, 2]
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    sx, sy, sz = 1.0 - tx, 1.0 - ty, 1.0 - tz

    out = (
        data[:, ix0, iy0, iz0] * (sx * sy * sz)
        + data[:, ix1, iy0, iz0] * (tx * sy * sz)
        + data[:, ix0, iy1, iz0] * (sx * ty * sz)
        + data[:, ix0, iy0, iz1] * (sx * sy * tz)
        + data[:, ix1, iy1, iz0] * (tx * ty * sz)
        + data[:, ix1, iy0, iz1] * (tx * sy * tz)
        + data[:, ix0, iy1, iz1] * (sx * ty * tz)
        + data[:, ix1, iy1, iz1] * (tx * ty * tz)
    )
    out = out.T  # (m, c)
    if field.components == 1:
        out = out[:, 0]
    return out[0] if squeeze else out


class TimeInterpolator:
    """Cubic (4-point Lagrange) interpolation in time over a field series.

    Sampling at (t, x) blends trilinear space samples of the four snapshots
    bracketing t; near the ends of the series the stencil clamps, degrading
    to one-sided cubic.
    """

    def __init__(self, fields: list[GridField]):
        if len(fields) < 2:
            raise ValueError("need at least two time slices")
        times = np.array([f.time_stamp for f in fields])
        if np.any(np.diff(times) <= 0):
            raise ValueError("time stamps must be strictly increasing")
        self.fields = list(fields)
        self.times = times

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def _stencil(self, t: float) -> tuple[list[int], np.ndarray]:
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"time {t} outside series range [{times[0]}, {times[-1]}]")
        j = int(np.searchsorted(times, t, side="right") - 1)
        j = min(max(j, 0), len(times) - 2)
        if len(times) < 4:
            idx = list(range(len(times)))
        else:
            lo = min(max(j - 1, 0), len(times) - 4)
            idx = [lo, lo + 1, lo + 2, lo + 3]
        ts = times[idx]
        w = np.ones(len(idx))
        for a in range(len(idx)):
            for b in range(len(idx)):
                if a != b:
                    w[a] *= (t - ts[b]) / (ts[a] - ts[b])
        return idx, w

    def sample(self, t: float, positions: np.ndarray) -> np.ndarray:
        """Field values at time t and the given positions."""
        idx, w = self._stencil(t)
        out = None
        for i, wi in zip(idx, w):
            if wi == 0.0:
                continue
            v = trilinear(self.fields[i], positions)
            out = wi * v if out is None else out + wi * v
        return out
