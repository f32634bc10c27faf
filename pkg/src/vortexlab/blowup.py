"""Trajectory-centered rescaling and the scale-selection diagnostics.

The rescaling maps u on the box of side L to the unit-scale field
u_tilde(s, y) = eps * (u(t0 + eps^2 s, X(t) + eps y) - Xdot(t)) on the box of
side L/eps.  Because the wavevector lattices match one-to-one, the map is an
exact spectral phase shift: no interpolation enters, the rescaled field is
divergence-free to round-off, and Galilean cancellation is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridField,
    GridSpec,
    SpectralField,
    ball_mask,
    curl,
    cross,
    inverse_transform,
    laplacian,
    leray_project,
    transform,
)
from .flowmap import TrajectorySamples, build_cylinder, cylinder_average, Mollifier
from .interp import TimeInterpolator
from .solver import Snapshot

__all__ = [
    "RescaleFrame",
    "PivotConfig",
    "rescale",
    "ns_residual",
    "mean_zero_residual",
    "PivotQuantities",
    "pivot_quantities",
    "mixed_norm",
    "EpsilonSelection",
    "epsilon_selection",
    "fourth_order_velocity",
]


@dataclass(frozen=True)
class RescaleFrame:
    """Reference frame: base time t0, scale epsilon, trajectory X(t).

    The trajectory must cover [t0 - span, t0]; span defaults to 9 eps^2 (the
    full unit-scale history) but may be shorter for windowed diagnostics.
    """

    t0: float
    epsilon: float
    trajectory: TrajectorySamples
    span: float | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.span is None:
            object.__setattr__(self, "span", 9.0 * self.epsilon**2)
        t_lo = self.t0 - self.span
        if self.trajectory.times[0] > t_lo + 1e-12 or self.trajectory.times[-1] < self.t0 - 1e-12:
            raise ValueError("trajectory must cover [t0 - span, t0]")

    @classmethod
    def static(cls, t0: float, epsilon: float, x0, n_nodes: int = 8, span: float | None = None) -> "RescaleFrame":
        """Frame fixed at x0 (no motion)."""
        s = 9.0 * epsilon**2 if span is None else span
        times = np.linspace(t0 - s, t0, n_nodes)
        pos = np.tile(np.asarray(x0, dtype=np.float64), (n_nodes, 1))
        return cls(t0, epsilon, TrajectorySamples(times, pos), s)

    @classmethod
    def uniform_motion(
        cls, t0: float, epsilon: float, x0, velocity, n_nodes: int = 8, span: float | None = None
    ) -> "RescaleFrame":
        """Frame moving at constant velocity through x0 at time t0."""
        s = 9.0 * epsilon**2 if span is None else span
        times = np.linspace(t0 - s, t0, n_nodes)
        x0 = np.asarray(x0, dtype=np.float64)
        v = np.asarray(velocity, dtype=np.float64)
        pos = x0[None, :] + (times - t0)[:, None] * v[None, :]
        return cls(t0, epsilon, TrajectorySamples(times, pos), s)


@dataclass(frozen=True)
class PivotConfig:
    """Integrability exponents of the scale-critical pivot quantities.

    p strictly between 11/6 and 2; nu in ((2-p)/(p-1), (7p-12)/(6-p)].  The
    boundary exponent bookkeeping (p1, p2, q1, q2 of the local statement, and
    the derived q3, q4, q5) is recorded for reports, not used in computation.
    """

    p: float = 1.9
    nu: float | None = None
    delta: float = 0.5
    eta: float = 0.01

    def __post_init__(self):
        if not (11.0 / 6.0 < self.p < 2.0):
            raise ValueError(f"p must be in (11/6, 2), got {self.p}")
        lo, hi = self.nu_range()
        if self.nu is None:
            object.__setattr__(self, "nu", 0.5 * (lo + hi))
        if not (lo < self.nu <= hi):
            raise ValueError(f"nu must be in ({lo:g}, {hi:g}], got {self.nu}")
        if self.delta <= 0 or self.eta <= 0:
            raise ValueError("delta and eta must be positive")

    def nu_range(self) -> tuple[float, float]:
        return (2.0 - self.p) / (self.p - 1.0), (7.0 * self.p - 12.0) / (6.0 - self.p)

    @property
    def theta(self) -> float:
        return 1.0 / (1.0 + self.nu)

    def derived_exponents(self) -> dict:
        """Documentation fields: the (p1, q1) = (p, p) route and its Sobolev shifts."""
        p1 = q1 = self.p
        p2 = 1.0 / (self.theta / self.p)
        q2 = 1.0 / (self.theta / self.p + 1.0 - self.theta)
        inv_q3 = 1.0 / q1 - 1.0 / 3.0
        inv_q4 = 1.0 / q2 - 1.0 / 3.0
        inv_q5 = max(inv_q3 - 1.0 / 3.0, 0.0)
        return {
            "p1": p1,
            "q1": q1,
            "p2": p2,
            "q2": q2,
            "q3": 1.0 / inv_q3 if inv_q3 > 0 else np.inf,
            "q4": 1.0 / inv_q4 if inv_q4 > 0 else np.inf,
            "q5": 1.0 / inv_q5 if inv_q5 > 0 else np.inf,
        }


def fourth_order_velocity(traj: TrajectorySamples) -> np.ndarray:
    """Xdot on the trajectory's own time grid by 4th-order finite differences."""
    t, p = traj.times, np.atleast_2d(traj.positions)
    if p.ndim == 2:
        pass
    n = len(t)
    if n < 5:
        # fall back to 2nd order on short trajectories
        v = np.gradient(p, t, axis=0)
        return v
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9):
        return np.gradient(p, t, axis=0)
    h = dt[0]
    v = np.empty_like(p)
    v[2:-2] = (-p[4:] + 8 * p[3:-1] - 8 * p[1:-3] + p[:-4]) / (12 * h)
    # one-sided 4th order at the edges
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    v[0] = c @ p[:5]
    v[1] = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h) @ p[:5]
    v[-1] = -(c @ p[-1:-6:-1])
    v[-2] = -(np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * h) @ p[-1:-6:-1])
    return v


def rescale(snapshots, frame: RescaleFrame) -> list[Snapshot]:
    """Exact spectral rescaling of the snapshots covered by the frame window.

    Returns snapshots on the target grid (side L/eps, same mode count) with
    time stamps s = (t - t0) / eps^2 in (-9, 0].
    """
    eps = frame.epsilon
    span = min(frame.span, 9.0 * eps**2)
    src = [s for s in snapshots if frame.t0 - span - 1e-12 <= s.time <= frame.t0 + 1e-12]
    if len(src) < 2:
        raise ValueError("frame window covers fewer than two snapshots")
    spec = src[0].velocity.spec
    target = GridSpec.centered(spec.n_points_per_axis, spec.domain_length / eps)
    if target.domain_length / 2 <= 3.0:
        raise ValueError("target box does not cover the unit-scale ball B_3")
    kx, ky, kz = spec.wavenumbers()

    traj_v = fourth_order_velocity(frame.trajectory)
    v_interp = TrajectorySamples(frame.trajectory.times, traj_v)

    out = []
    for s in src:
        x_t = frame.trajectory.at(s.time)
        xdot = v_interp.at(s.time)
        c = transform(s.velocity).coeffs
        phase = np.exp(1j * (kx * x_t[0] + ky * x_t[1] + kz * x_t[2]))
        c_new = eps * c * phase[None]
        c_new[:, 0, 0, 0] -= eps * xdot
        s_time = (s.time - frame.t0) / eps**2
        u_t = inverse_transform(SpectralField(target, c_new, s_time))
        out.append(Snapshot.from_velocity(u_t, s_time))
    return out


def ns_residual(series: list[Snapshot], viscosity: float = 1.0) -> float:
    """Projected momentum residual over the double-unit cylinder, normalized.

    Computes P_sol(du/ds + P_sol(omega x u) - nu Lap u) with 4th-order time
    differencing at interior snapshots, takes its L^2 norm over B_2 x window,
    and divides by the matching norm of nu Lap u.  The pressure never enters:
    the projection eliminates every gradient.
    """
    if len(series) < 5:
        raise ValueError("need at least 5 time slices")
    times = np.array([s.time for s in series])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise ValueError("slices must be uniformly spaced")
    dt = float(dts[0])
    spec = series[0].velocity.spec
    mask = ball_mask(spec, 2.0)
    cell = spec.cell_volume

    res_sq = 0.0
    lap_sq = 0.0
    for j in range(2, len(series) - 2):
        u = series[j].velocity
        du = (
            -series[j + 2].velocity.data
            + 8.0 * series[j + 1].velocity.data
            - 8.0 * series[j - 1].velocity.data
            + series[j - 2].velocity.data
        ) / (12.0 * dt)
        omega = curl(u)
        nonlin = leray_project(cross(omega, u))
        lap = laplacian(u)
        r = leray_project(GridField(spec, du) + nonlin - viscosity * lap)
        res_sq += float(np.sum(np.sum(r.data**2, axis=0)[mask])) * cell
        lap_sq += float(np.sum(np.sum((viscosity * lap.data) ** 2, axis=0)[mask])) * cell
    if lap_sq == 0.0:
        return 0.0
    return float(np.sqrt(res_sq / lap_sq))


def mean_zero_residual(series: list[Snapshot], phi: GridField) -> float:
    """max over slices of |integral of u * phi| for a unit-mass weight phi."""
    if phi.components != 1:
        raise ValueError("phi must be scalar")
    cell = phi.spec.cell_volume
    mass = float(phi.data[0].sum()) * cell
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"phi must have unit mass, got {mass}")
    worst = 0.0
    for s in series:
        m = np.array([float(np.sum(s.velocity.data[i] * phi.data[0])) * cell for i in range(3)])
        worst = max(worst, float(np.linalg.norm(m)))
    return worst


def mixed_norm(
    series: list[Snapshot] | list[GridField],
    p_time: float,
    q_space: float,
    mask: np.ndarray | None = None,
    magnitude_of: str = "field",
) -> float:
    """L^p in time of the spatial L^q norm over the slice sequence.

    Time quadrature is trapezoidal on the slice times; p_time = inf takes the
    max over slices.
    """
    fields = [s.velocity if isinstance(s, Snapshot) else s for s in series]
    times = np.array([f.time_stamp for f in fields])
    vals = []
    for f in fields:
        mag = np.sqrt(np.sum(f.data**2, axis=0))
        if mask is not None:
            mag = mag[mask]
        w = f.spec.cell_volume
        if np.isinf(q_space):
            vals.append(float(mag.max()) if mag.size else 0.0)
        else:
            vals.append(float((np.sum(mag**q_space) * w) ** (1.0 / q_space)))
    vals = np.asarray(vals)
    if np.isinf(p_time):
        return float(vals.max())
    return float(np.trapezoid(vals**p_time, times) ** (1.0 / p_time))


@dataclass(frozen=True)
class PivotQuantities:
    lp_term: float
    l2_term: float
    linf_l1_vorticity: float


def pivot_quantities(
    series: list[Snapshot],
    config: PivotConfig,
    cutoff: GridField | None = None,
) -> PivotQuantities:
    """The three scale-critical scalars over the unit-scale window.

    lp_term = delta^-nu (int over Q_3 of |grad u|^p)^(1/p),
    l2_term = delta * int over Q_3 of |grad u|^2,
    linf_l1 = delta * sup over slices in (-4, 0] of the L^1 norm of omega on B_2.

    The series must carry time stamps in (-9, 0].  An optional scalar cutoff
    weights the space integrals instead of the sharp B_3 indicator.
    """
    from .grid import gradient

    spec = series[0].velocity.spec
    mask3 = ball_mask(spec, 3.0)
    mask2 = ball_mask(spec, 2.0)
    weight = cutoff.data[0] if cutoff is not None else None
    cell = spec.cell_volume

    times = np.array([s.time for s in series])
    gp, g2 = [], []
    linf_l1 = 0.0
    for s in series:
        gu = gradient(s.velocity)
        mag = np.sqrt(np.sum(gu.data**2, axis=0))
        if weight is not None:
            gp.append(float(np.sum(weight * mag**config.p)) * cell)
            g2.append(float(np.sum(weight * mag**2)) * cell)
        else:
            gp.append(float(np.sum(mag[mask3] ** config.p)) * cell)
            g2.append(float(np.sum(mag[mask3] ** 2)) * cell)
        if s.time >= -4.0:
            om = curl(s.velocity)
            l1 = float(np.sum(np.sqrt(np.sum(om.data**2, axis=0))[mask2])) * cell
            linf_l1 = max(linf_l1, l1)
    lp = float(np.trapezoid(np.asarray(gp), times) ** (1.0 / config.p))
    l2 = float(np.trapezoid(np.asarray(g2), times))
    return PivotQuantities(
        config.delta ** (-config.nu) * lp,
        config.delta * l2,
        config.delta * linf_l1,
    )


@dataclass(frozen=True)
class EpsilonSelection:
    eps_star: float
    case_tag: int  # 1: interior crossing I(eps) = eta; 2: capped at 3 eps = sqrt(t)
    i_value: float
    bound_rhs: float | None = None

    @property
    def eps_to_minus4(self) -> float:
        return self.eps_star**-4


def _i_of_eps(
    eps: float,
    point,
    snapshots,
    kernel: Mollifier,
    m_grad: TimeInterpolator,
    m_grad_p: TimeInterpolator,
    config: PivotConfig,
    resolution: int,
    sampler=None,
) -> float:
    t, x = point
    cyl = build_cylinder(snapshots, kernel, t, np.asarray(x), eps, resolution, sampler=sampler)
    avg_p = cylinder_average(m_grad_p, cyl)
    avg_2 = cylinder_average(m_grad, cyl)  # holds M^2 series; see caller
    return eps**4 * (
        config.delta ** (-2.0 * config.nu) * avg_p ** (2.0 / config.p) + config.delta * avg_2
    )


def epsilon_selection(
    point: tuple[float, np.ndarray],
    snapshots,
    kernel: Mollifier,
    m_grad_u: TimeInterpolator,
    config: PivotConfig,
    eps_min: float | None = None,
    resolution: int = 6,
    bisect_rel_tol: float = 1e-3,
) -> EpsilonSelection:
    """Scale selection at a space-time point: the smallest eps with
    I(eps) = eta, or the cap 3 eps = sqrt(t) when I stays below eta.

    I(eps) = eps^4 [ delta^-2nu (avg over Q_eps of M(|grad u|)^p)^(2/p)
                     + delta   (avg over Q_eps of M(|grad u|)^2) ].

    The scan walks a geometric ladder from eps_min to the cap and bisects the
    first bracketing pair.
    """
    t, x = point
    fields_p = [
        GridField(f.spec, np.abs(f.data) ** config.p, f.time_stamp) for f in m_grad_u.fields
    ]
    fields_2 = [GridField(f.spec, f.data**2, f.time_stamp) for f in m_grad_u.fields]
    interp_p = TimeInterpolator(fields_p)
    interp_2 = TimeInterpolator(fields_2)

    eps_cap = np.sqrt(t) / 3.0
    t_min = m_grad_u.t_min
    eps_cap = min(eps_cap, np.sqrt(max(t - t_min, 0.0) / 9.0))
    if eps_cap <= 0:
        raise ValueError("no admissible scale range at this point")
    if eps_min is None:
        eps_min = eps_cap / 16.0

    samplers: dict[float, "FlowSampler"] = {}

    def I(eps: float) -> float:
        from .flowmap import FlowSampler

        spec = snapshots[0].velocity.spec
        eff = max(eps, 2.0 * spec.h)
        if eff not in samplers:
            samplers[eff] = FlowSampler(snapshots, kernel, eps)
        return _i_of_eps(
            eps, point, snapshots, kernel, interp_2, interp_p, config, resolution,
            sampler=samplers[eff],
        )

    ladder = [eps_min]
    while ladder[-1] < eps_cap:
        ladder.append(min(ladder[-1] * 2.0, eps_cap))
    values = [I(e) for e in ladder]

    crossing = None
    for j in range(len(ladder)):
        if values[j] >= config.eta:
            crossing = j
            break
    if crossing is None:
        return EpsilonSelection(eps_cap, 2, values[-1])
    if crossing == 0:
        return EpsilonSelection(ladder[0], 1, values[0])
    lo, hi = ladder[crossing - 1], ladder[crossing]
    while (hi - lo) / hi > bisect_rel_tol:
        mid = 0.5 * (lo + hi)
        if I(mid) >= config.eta:
            hi = mid
        else:
            lo = mid
    return EpsilonSelection(hi, 1, I(hi))
