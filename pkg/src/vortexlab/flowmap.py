"""Flow-adapted maximal functions over skewed parabolic cylinders.

A skewed cylinder of scale eps at (t, x) follows the mollified-velocity
trajectory backward over the time span 9*eps^2 and carries a ball of radius
3*eps around it.  Admissibility caps eps^2 times the cylinder average of the
maximal function of |grad u|; the flow-adapted maximal function is the sup
of cylinder averages over admissible scales.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import GridField, GridSpec, SpectralField, inverse_transform, transform
from .interp import TimeInterpolator, trilinear
from .profiles import mollifier_profile

__all__ = [
    "SkewedCylinder",
    "AdmissibilityThresholds",
    "Mollifier",
    "MollifierResolutionError",
    "mollify",
    "TrajectorySamples",
    "integrate_trajectory",
    "hl_maximal",
    "ball_average_ladder",
    "build_cylinder",
    "cylinder_average",
    "admissible",
    "QMaximalResult",
    "q_maximal",
    "LebesgueReport",
    "lebesgue_check",
    "CachedCylinderQuadrature",
    "cylinder_quadratures",
    "radius_ladder",
    "admissibility_boundary",
    "FlowSampler",
]


@dataclass(frozen=True)
class AdmissibilityThresholds:
    """Recorded smallness constants; only eta0 enters computations."""

    eta0: float = 0.05
    eta1: float = 0.05
    eta2: float = 0.05
    eta3: float = 0.05

    def __post_init__(self):
        for name in ("eta0", "eta1", "eta2", "eta3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class MollifierResolutionError(ValueError):
    """phi_eps narrower than 4 grid cells cannot be sampled faithfully."""


@dataclass(frozen=True)
class Mollifier:
    """Radial kernel profile on the unit ball: nonnegative, unit mass, supp in B_1.

    The profile is a shape function of r in [0, 1); the discrete kernel is
    renormalized to unit mass on each grid it is sampled on.
    """

    sharpness: float = 1.0

    def profile(self, r) -> np.ndarray:
        return mollifier_profile(r, self.sharpness)

    def _validate(self, spec: GridSpec, epsilon: float) -> None:
        if epsilon < 2.0 * spec.h:
            raise MollifierResolutionError(
                f"epsilon={epsilon:g} spans under 4 cells (h={spec.h:g})"
            )
        if epsilon >= spec.domain_length / 2:
            raise ValueError("mollifier support exceeds the half box")

    def sample_kernel(self, spec: GridSpec, epsilon: float) -> GridField:
        """phi_eps(x) = eps^-3 phi(-x/eps) sampled around x = 0, mass-renormalized."""
        self._validate(spec, epsilon)
        from .grid import min_image_radius

        r = min_image_radius(spec) / epsilon
        vals = self.profile(r)
        mass = vals.sum() * spec.cell_volume
        if mass <= 0:
            raise MollifierResolutionError("sampled kernel has zero mass")
        return GridField(spec, (vals / mass)[None])

    def stencil_coeffs(self, spec: GridSpec, epsilon: float) -> np.ndarray:
        """Fourier coefficients of the kernel built in index space.

        Circular convolution takes index 0 as the kernel origin, so the
        stencil must be sampled by periodic distance from index 0, not from
        the coordinate origin of a centered grid.
        """
        self._validate(spec, epsilon)
        n, h, L = spec.n_points_per_axis, spec.h, spec.domain_length
        ax = h * np.arange(n)
        ax = np.minimum(ax, L - ax)
        r = np.sqrt(ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2)
        vals = self.profile(r / epsilon)
        mass = vals.sum() * spec.cell_volume
        if mass <= 0:
            raise MollifierResolutionError("sampled kernel has zero mass")
        from ._fft import fftn

        return fftn(vals / mass, axes=(0, 1, 2)) / n**3


def mollify(u: GridField, epsilon: float, kernel: Mollifier) -> GridField:
    """Spectral convolution of u with the scaled kernel."""
    ck = kernel.stencil_coeffs(u.spec, epsilon)
    cu = transform(u).coeffs
    # convolution theorem with unit-amplitude mode normalization; the radial
    # kernel's index-space transform is real and even
    out = cu * ck[None] * u.spec.volume
    return inverse_transform(SpectralField(u.spec, out, u.time_stamp))


@dataclass(frozen=True)
class TrajectorySamples:
    times: np.ndarray
    positions: np.ndarray  # (n_times, 3)

    def at(self, t: float) -> np.ndarray:
        """Cubic interpolation of the trajectory at time t."""
        times = self.times
        j = int(np.searchsorted(times, t, side="right") - 1)
        j = min(max(j, 0), len(times) - 2)
        lo = min(max(j - 1, 0), max(len(times) - 4, 0))
        idx = list(range(lo, min(lo + 4, len(times))))
        ts = times[idx]
        out = np.zeros(3)
        for a, ia in enumerate(idx):
            w = 1.0
            for b in range(len(idx)):
                if b != a:
                    w *= (t - ts[b]) / (ts[a] - ts[b])
            out += w * self.positions[ia]
        return out


class FlowSampler:
    """Mollified velocity sampler u_eps(t, x) over a snapshot series.

    The mollification scale is clamped below at two grid cells: for smaller
    eps the grid's own interpolation already smooths at scale h, and the
    clamped sampler converges to the ideal one as the grid refines.  The
    clamp is recorded in `effective_epsilon`.
    """

    def __init__(self, snapshots, kernel: Mollifier, epsilon: float):
        fields = [s.velocity for s in snapshots]
        spec = fields[0].spec
        self.epsilon = epsilon
        self.effective_epsilon = max(epsilon, 2.0 * spec.h)
        self.kernel = kernel
        self.mollified = TimeInterpolator(
            [mollify(f, self.effective_epsilon, kernel) for f in fields]
        )

    def velocity(self, t: float, positions: np.ndarray) -> np.ndarray:
        return self.mollified.sample(t, positions)


def integrate_trajectory(
    sampler: FlowSampler,
    t: float,
    x: np.ndarray,
    t_target: float,
    n_steps: int = 64,
    sample_times: np.ndarray | None = None,
) -> TrajectorySamples:
    """RK4 integration of dX/ds = u_eps(s, X) from X(t) = x to t_target (backward ok).

    Positions are recorded on a uniform step grid plus any requested sample
    times (merged and sorted).  Supports batched starting points (m, 3).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    grid = np.linspace(t, t_target, n_steps + 1)
    times = grid
    if sample_times is not None:
        times = np.union1d(np.asarray(sample_times, dtype=np.float64), grid)
    order = np.argsort(-times) if t_target < t else np.argsort(times)
    times = times[order]
    # start at t; ensure it is the first node
    if abs(times[0] - t) > 1e-14:
        raise ValueError("sample times must lie between t and t_target")

    pos = [x.copy()]
    cur = x.copy()
    for a, b in zip(times[:-1], times[1:]):
        h = b - a
        k1 = sampler.velocity(a, cur)
        k2 = sampler.velocity(a + h / 2, cur + (h / 2) * k1)
        k3 = sampler.velocity(a + h / 2, cur + (h / 2) * k2)
        k4 = sampler.velocity(b, cur + h * k3)
        cur = cur + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        pos.append(cur.copy())
    positions = np.stack(pos)  # (n_times, m, 3)
    # return in increasing-time order, squeezing the batch axis when m == 1
    if times[0] > times[-1]:
        times = times[::-1]
        positions = positions[::-1]
    if positions.shape[1] == 1:
        positions = positions[:, 0, :]
    return TrajectorySamples(times.copy(), positions)


_STENCIL_CACHE: dict = {}


def _ball_stencil(spec: GridSpec, radius: float) -> np.ndarray:
    key = (spec.n_points_per_axis, spec.domain_length, round(radius, 12))
    if key not in _STENCIL_CACHE:
        n = spec.n_points_per_axis
        h = spec.h
        ax = h * np.arange(n)
        ax = np.minimum(ax, spec.domain_length - ax)  # distance to 0 on the circle
        r2 = ax[:, None, None] ** 2 + ax[None, :, None] ** 2 + ax[None, None, :] ** 2
        ball = (r2 <= radius**2 + 1e-12).astype(np.float64)
        count = ball.sum()
        from ._fft import fftn

        _STENCIL_CACHE[key] = np.conj(fftn(ball / count, axes=(0, 1, 2)))
    return _STENCIL_CACHE[key]


def radius_ladder(spec: GridSpec) -> np.ndarray:
    """Geometric radii h * 2^j up to L/4."""
    rs = []
    r = spec.h
    while r <= spec.domain_length / 4 + 1e-12:
        rs.append(r)
        r *= 2.0
    return np.asarray(rs)


def ball_average_ladder(f: GridField, radius: float) -> np.ndarray:
    """Average of |f| over the discrete ball of given radius at every grid point."""
    if f.components != 1:
        raise ValueError("hl_maximal operates on scalar fields")
    from ._fft import fftn, ifftn

    mag = np.abs(f.data[0])
    stencil = _ball_stencil(f.spec, radius)
    return ifftn(fftn(mag, axes=(0, 1, 2)) * stencil, axes=(0, 1, 2)).real


def hl_maximal(f: GridField, ladder: np.ndarray | None = None) -> GridField:
    """Discrete spatial maximal function: sup over the radius ladder of ball averages.

    The point value |f| itself participates (the smallest-ball limit), so
    M(f) >= |f| pointwise; refining the ladder can only increase the result.
    """
    if f.components != 1:
        raise ValueError("hl_maximal operates on scalar fields")
    if ladder is None:
        ladder = radius_ladder(f.spec)
    out = np.abs(f.data[0]).copy()
    for r in ladder:
        np.maximum(out, ball_average_ladder(f, r), out=out)
    return GridField(f.spec, out[None], f.time_stamp)


@dataclass(frozen=True)
class SkewedCylinder:
    """Quadrature discretization of the skewed cylinder of scale eps at (t, x)."""

    base_point: tuple[float, np.ndarray]
    epsilon: float
    trajectory: TrajectorySamples
    sample_times: np.ndarray  # (n_s,)
    positions: np.ndarray  # (n_s, n_ball, 3)
    weights: np.ndarray  # (n_s, n_ball)
    wrapped: bool = False

    @property
    def volume(self) -> float:
        return float(self.weights.sum())


def _ball_quadrature(radius: float, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre x uniform-angle product quadrature on the ball.

    Weights sum to the exact ball volume by construction.
    """
    n_r, n_mu, n_phi = resolution, resolution, 2 * resolution
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (xr + 1.0)
    wr = wr * (0.5 * radius) * r**2
    xmu, wmu = np.polynomial.legendre.leggauss(n_mu)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    wphi = 2.0 * np.pi / n_phi
    rr, mm, pp = np.meshgrid(r, xmu, phi, indexing="ij")
    ww = np.einsum("i,j->ij", wr, wmu)[:, :, None] * np.ones(n_phi) * wphi
    sin_t = np.sqrt(1.0 - mm**2)
    pts = np.stack(
        [rr * sin_t * np.cos(pp), rr * sin_t * np.sin(pp), rr * mm], axis=-1
    ).reshape(-1, 3)
    return pts, ww.reshape(-1)


def build_cylinder(
    snapshots,
    kernel: Mollifier,
    t: float,
    x: np.ndarray,
    epsilon: float,
    resolution: int = 6,
    n_s: int = 16,
    sampler: FlowSampler | None = None,
) -> SkewedCylinder:
    """Discretize the cylinder {(t + eps^2 s, X(t + eps^2 s) + eps y)} with
    s in midpoint nodes of [-9, 0] and y in a product quadrature of B_3."""
    x = np.asarray(x, dtype=np.float64)
    if sampler is None:
        sampler = FlowSampler(snapshots, kernel, epsilon)
    t_lo = t - 9.0 * epsilon**2
    if t_lo < sampler.mollified.t_min - 1e-12 or t > sampler.mollified.t_max + 1e-12:
        raise ValueError(
            f"cylinder time range [{t_lo:g}, {t:g}] exceeds snapshots "
            f"[{sampler.mollified.t_min:g}, {sampler.mollified.t_max:g}]"
        )
    s_nodes = -9.0 * (np.arange(n_s) + 0.5) / n_s
    s_weights = np.full(n_s, 9.0 / n_s)
    slice_times = t + epsilon**2 * s_nodes

    traj = integrate_trajectory(sampler, t, x, t_lo, sample_times=slice_times)
    centers = np.stack([traj.at(ts) for ts in slice_times])

    ball_pts, ball_w = _ball_quadrature(3.0, resolution)
    positions = centers[:, None, :] + epsilon * ball_pts[None, :, :]
    weights = epsilon**5 * np.einsum("s,b->sb", s_weights, ball_w)

    spec = snapshots[0].velocity.spec
    span = np.max(np.abs(centers - x[None, :])) + 3.0 * epsilon
    wrapped = bool(span > spec.domain_length / 2)
    if wrapped:
        warnings.warn(
            f"skewed cylinder at (t={t:g}, eps={epsilon:g}) wraps around the periodic box",
            stacklevel=2,
        )
    return SkewedCylinder((t, x), epsilon, traj, slice_times, positions, weights, wrapped)


def cylinder_average(f_series: TimeInterpolator | list, cyl: SkewedCylinder) -> float:
    """Weighted mean of |f| over the cylinder samples (trilinear + cubic in time)."""
    interp = f_series if isinstance(f_series, TimeInterpolator) else TimeInterpolator(f_series)
    total = 0.0
    for ts, pos, w in zip(cyl.sample_times, cyl.positions, cyl.weights):
        vals = np.abs(interp.sample(float(ts), pos))
        total += float(np.dot(w, vals))
    return total / cyl.volume


def admissible(cyl: SkewedCylinder, m_grad_u: TimeInterpolator, eta0: float) -> bool:
    """eps^2 * (cylinder average of M(|grad u|)) <= eta0."""
    return cyl.epsilon**2 * cylinder_average(m_grad_u, cyl) <= eta0


@dataclass(frozen=True)
class QMaximalResult:
    value: float
    admissible_count: int
    fallback_used: bool
    epsilons: np.ndarray
    averages: np.ndarray
    admissible_flags: np.ndarray


def q_maximal(
    f_series: TimeInterpolator | list,
    point: tuple[float, np.ndarray],
    epsilon_ladder: np.ndarray,
    snapshots,
    kernel: Mollifier,
    m_grad_u: TimeInterpolator,
    thresholds: AdmissibilityThresholds,
    resolution: int = 6,
) -> QMaximalResult:
    """Sup of cylinder averages of |f| over the admissible ladder entries.

    When no entry is admissible the smallest-scale average is returned and
    flagged, never a -inf sentinel.
    """
    t, x = point
    interp = f_series if isinstance(f_series, TimeInterpolator) else TimeInterpolator(f_series)
    eps_arr = np.sort(np.asarray(epsilon_ladder, dtype=np.float64))
    spec = snapshots[0].velocity.spec
    samplers: dict[float, FlowSampler] = {}
    avgs, flags = [], []
    for eps in eps_arr:
        eff = max(eps, 2.0 * spec.h)
        if eff not in samplers:
            samplers[eff] = FlowSampler(snapshots, kernel, eps)
        cyl = build_cylinder(snapshots, kernel, t, np.asarray(x), eps, resolution, sampler=samplers[eff])
        avgs.append(cylinder_average(interp, cyl))
        flags.append(admissible(cyl, m_grad_u, thresholds.eta0))
    avgs = np.asarray(avgs)
    flags = np.asarray(flags, dtype=bool)
    count = int(flags.sum())
    if count == 0:
        return QMaximalResult(float(avgs[0]), 0, True, eps_arr, avgs, flags)
    return QMaximalResult(float(avgs[flags].max()), count, False, eps_arr, avgs, flags)


class CachedCylinderQuadrature:
    """Precomputed interpolation stencils for fast repeated cylinder averages.

    Freezes the space-time gather pattern of one cylinder (time stencil per
    slice, periodic trilinear corners per sample) so that averaging any
    scalar series on the same snapshot grid costs a few vectorized gathers.
    """

    def __init__(self, cyl: SkewedCylinder, times: np.ndarray, spec: GridSpec):
        self.volume = cyl.volume
        self.weights = cyl.weights / cyl.volume  # (n_s, n_b), normalized
        n = spec.n_points_per_axis
        self.n = n
        entries = []
        for ts, pos in zip(cyl.sample_times, cyl.positions):
            jt = int(np.searchsorted(times, ts, side="right") - 1)
            jt = min(max(jt, 0), len(times) - 2)
            lo = min(max(jt - 1, 0), max(len(times) - 4, 0))
            idx = list(range(lo, min(lo + 4, len(times))))
            tsn = times[idx]
            tw = np.ones(len(idx))
            for a in range(len(idx)):
                for b in range(len(idx)):
                    if a != b:
                        tw[a] *= (ts - tsn[b]) / (tsn[a] - tsn[b])
            frac = (pos - np.asarray(spec.origin_offset)) / spec.h
            i0 = np.floor(frac).astype(np.int64)
            t = frac - i0
            i0 %= n
            i1 = (i0 + 1) % n
            entries.append((idx, tw, i0, i1, t))
        self.entries = entries

    def average(self, series_data: np.ndarray, absolute: bool = True) -> float:
        """series_data: (n_times, nx, ny, nz) scalar slices on the frozen grid."""
        total = 0.0
        for (idx, tw, i0, i1, t), w in zip(self.entries, self.weights):
            blend = None
            tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
            sx, sy, sz = 1.0 - tx, 1.0 - ty, 1.0 - tz
            ix0, iy0, iz0 = i0[:, 0], i0[:, 1], i0[:, 2]
            ix1, iy1, iz1 = i1[:, 0], i1[:, 1], i1[:, 2]
            for j, wt in zip(idx, tw):
                if wt == 0.0:
                    continue
                d = series_data[j]
                vals = (
                    d[ix0, iy0, iz0] * (sx * sy * sz)
                    + d[ix1, iy0, iz0] * (tx * sy * sz)
                    + d[ix0, iy1, iz0] * (sx * ty * sz)
                    + d[ix0, iy0, iz1] * (sx * sy * tz)
                    + d[ix1, iy1, iz0] * (tx * ty * sz)
                    + d[ix1, iy0, iz1] * (tx * sy * tz)
                    + d[ix0, iy1, iz1] * (sx * ty * tz)
                    + d[ix1, iy1, iz1] * (tx * ty * tz)
                )
                blend = wt * vals if blend is None else blend + wt * vals
            if absolute:
                blend = np.abs(blend)
            total += float(np.dot(w, blend))
        return total


def cylinder_quadratures(
    snapshots,
    kernel: Mollifier,
    points: list[tuple[float, np.ndarray]],
    epsilon_ladder: np.ndarray,
    resolution: int = 6,
) -> dict:
    """Build CachedCylinderQuadrature for every (point, epsilon) pair.

    Samplers are shared per effective mollification scale, so the cost is one
    trajectory integration per cylinder plus one mollified series per scale.
    """
    spec = snapshots[0].velocity.spec
    times = np.array([s.time for s in snapshots])
    samplers: dict[float, FlowSampler] = {}
    out = {}
    for eps in np.asarray(epsilon_ladder, dtype=np.float64):
        eff = max(eps, 2.0 * spec.h)
        if eff not in samplers:
            samplers[eff] = FlowSampler(snapshots, kernel, eps)
        for pi, (t, x) in enumerate(points):
            cyl = build_cylinder(
                snapshots, kernel, t, np.asarray(x), eps, resolution, sampler=samplers[eff]
            )
            out[(pi, float(eps))] = CachedCylinderQuadrature(cyl, times, spec)
    return out


@dataclass(frozen=True)
class LebesgueReport:
    epsilons: np.ndarray
    deviations: np.ndarray
    slope: float

    def converged(self, tol: float) -> bool:
        return self.deviations[0] <= tol


def lebesgue_check(
    f_series: TimeInterpolator | list,
    point: tuple[float, np.ndarray],
    epsilon_ladder: np.ndarray,
    snapshots,
    kernel: Mollifier,
    resolution: int = 6,
) -> LebesgueReport:
    """Cylinder-average deviation from the point value across the scale ladder.

    For f continuous at the point the deviation decreases like O(eps); the
    slope is a log-log least-squares fit over the ladder.
    """
    t, x = point
    interp = f_series if isinstance(f_series, TimeInterpolator) else TimeInterpolator(f_series)
    x = np.asarray(x, dtype=np.float64)
    f_at = float(np.atleast_1d(interp.sample(t, x[None, :]))[0])
    eps_arr = np.sort(np.asarray(epsilon_ladder, dtype=np.float64))
    spec = snapshots[0].velocity.spec
    samplers: dict[float, FlowSampler] = {}
    devs = []
    for eps in eps_arr:
        eff = max(eps, 2.0 * spec.h)
        if eff not in samplers:
            samplers[eff] = FlowSampler(snapshots, kernel, eps)
        cyl = build_cylinder(snapshots, kernel, t, x, eps, resolution, sampler=samplers[eff])
        total = 0.0
        for ts, pos, w in zip(cyl.sample_times, cyl.positions, cyl.weights):
            vals = interp.sample(float(ts), pos)
            total += float(np.dot(w, np.abs(vals - f_at)))
        devs.append(total / cyl.volume)
    devs = np.asarray(devs)
    good = devs > 0
    if good.sum() >= 2:
        slope = float(np.polyfit(np.log(eps_arr[good]), np.log(devs[good]), 1)[0])
    else:
        slope = np.nan
    return LebesgueReport(eps_arr, devs, slope)


def admissibility_boundary(
    point: tuple[float, np.ndarray],
    snapshots,
    kernel: Mollifier,
    m_grad_u: TimeInterpolator,
    eta0: float,
    resolution: int = 6,
    rel_tol: float = 1e-2,
) -> float:
    """Largest admissible scale at a point, located by bisection.

    The admissibility statistic eps^2 * avg(M(|grad u|)) grows continuously
    from 0, so the boundary is bracketed by doubling and refined by
    bisection to the requested relative tolerance.
    """
    t, x = point
    x = np.asarray(x, dtype=np.float64)
    spec = snapshots[0].velocity.spec
    samplers: dict[float, FlowSampler] = {}

    def stat(eps: float) -> float:
        eff = max(eps, 2.0 * spec.h)
        if eff not in samplers:
            samplers[eff] = FlowSampler(snapshots, kernel, eps)
        cyl = build_cylinder(snapshots, kernel, t, x, eps, resolution, sampler=samplers[eff])
        return eps**2 * cylinder_average(m_grad_u, cyl)

    eps_cap = np.sqrt(max(t - m_grad_u.t_min, 0.0) / 9.0)
    if eps_cap <= 0:
        raise ValueError("no scale range at this point")
    lo = eps_cap / 64.0
    if stat(lo) > eta0:
        return 0.0
    hi = lo
    while hi < eps_cap and stat(min(hi * 2.0, eps_cap)) <= eta0:
        hi = min(hi * 2.0, eps_cap)
        if hi == eps_cap:
            return eps_cap
    lo = hi
    hi = min(hi * 2.0, eps_cap)
    while (hi - lo) / hi > rel_tol:
        mid = 0.5 * (lo + hi)
        if stat(mid) <= eta0:
            lo = mid
        else:
            hi = mid
    return lo
