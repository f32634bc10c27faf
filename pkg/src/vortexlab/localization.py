"""Localized vorticity variable and its calculus on the periodic cube.

Builds the cutoff pair (phi, phi_sharp), the localized divergence-free
velocity v together with its remainders w and varpi, the cutoff commutators
with curl / Laplacian / inverse Laplacian / the solenoidal projection, and
the quadratic, linear and remainder source terms of the evolution equation
that v satisfies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import (
    GridField,
    GridSpec,
    ball_mask,
    cross,
    curl,
    divergence,
    grad_project,
    gradient,
    inverse_laplacian,
    laplacian,
    leray_project,
    l2_norm,
    linf_norm,
    lp_norm,
    magnitude,
    min_image_radius,
    outer_product,
    riesz_R,
)
from .profiles import PlateauBump

__all__ = [
    "CutoffPair",
    "LocalizedTriple",
    "make_cutoff_pair",
    "localized_velocity",
    "harmonicity_residual",
    "CommutatorResult",
    "commutator",
    "SourceTerms",
    "source_terms",
    "VEquationReport",
    "v_equation_residual",
    "v_local_energy_residual",
    "BoundednessReport",
    "boundedness_probe",
    "smoothing_constant",
    "DEFAULT_RADII",
]

DEFAULT_RADII = (6.0 / 5.0, 5.0 / 4.0, 4.0 / 3.0, 3.0 / 2.0)


@dataclass(frozen=True)
class CutoffPair:
    """Radial plateau cutoffs: phi = 1 on B(r0), supp phi in B(r1);
    phi_sharp = 1 on B(r2), supp phi_sharp in B(r3)."""

    phi: GridField
    phi_sharp: GridField
    radii: tuple[float, float, float, float] = DEFAULT_RADII
    sharpness: float = 1.0

    @property
    def grad_phi(self) -> GridField:
        return gradient(self.phi)

    @property
    def lap_phi(self) -> GridField:
        return laplacian(self.phi)


def make_cutoff_pair(
    spec: GridSpec,
    radii: tuple[float, float, float, float] = DEFAULT_RADII,
    sharpness: float = 1.0,
    band_limit: int | None = None,
) -> CutoffPair:
    """Sample the two radial bumps on the grid (minimum-image distance to 0).

    With band_limit set, the sampled profiles are projected onto axis modes
    |m| <= band_limit.  Band-limited cutoffs trade the exact plateau/support
    for alias-free products, which is what the dealiased identity residuals
    require; they converge to the sampled bumps as the band grows.
    """
    r0, r1, r2, r3 = radii
    if not (0 < r0 < r1 < r2 < r3):
        raise ValueError(f"radii must be strictly increasing, got {radii}")
    if r3 >= spec.domain_length / 2:
        raise ValueError(
            f"outer radius {r3} collides with the periodic boundary (L/2 = {spec.domain_length / 2})"
        )
    r = min_image_radius(spec)
    phi = GridField(spec, PlateauBump(r0, r1, sharpness)(r)[None])
    phi_sharp = GridField(spec, PlateauBump(r2, r3, sharpness)(r)[None])
    if band_limit is not None:
        from .grid import band_mask, transform, inverse_transform, SpectralField

        mask = band_mask(spec, band_limit)
        phi = inverse_transform(
            SpectralField(spec, transform(phi).coeffs * mask[None])
        )
        phi_sharp = inverse_transform(
            SpectralField(spec, transform(phi_sharp).coeffs * mask[None])
        )
    return CutoffPair(phi, phi_sharp, tuple(float(x) for x in radii), sharpness)


@dataclass(frozen=True)
class LocalizedTriple:
    """v is the localized divergence-free velocity; w and varpi are the
    remainders of phi*u and phi*omega, harmonic inside the unit ball."""

    v: GridField
    w: GridField
    varpi: GridField


def _masked_product(a: GridField, b: GridField, mask: np.ndarray | None) -> GridField:
    out = a * b
    if mask is None:
        return out
    from .grid import SpectralField, inverse_transform, transform

    return inverse_transform(SpectralField(out.spec, transform(out).coeffs * mask[None], out.time_stamp))


def _masked_cross(a: GridField, b: GridField, mask: np.ndarray | None) -> GridField:
    out = cross(a, b)
    if mask is None:
        return out
    from .grid import SpectralField, inverse_transform, transform

    return inverse_transform(SpectralField(out.spec, transform(out).coeffs * mask[None], out.time_stamp))


def localized_velocity(
    u: GridField, cutoffs: CutoffPair, product_mask: np.ndarray | None = None
) -> LocalizedTriple:
    """v = -curl(phi_sharp * InvLap(phi * curl u)); w = phi u - v; varpi = phi omega - curl v.

    Defining w and varpi by subtraction makes both decompositions exact on
    the grid; their harmonicity inside the unit ball is what remains to be
    measured.  With product_mask set, every pointwise product is projected
    back onto the mask band (the dealiased construction).
    """
    omega = curl(u)
    phi, phis = cutoffs.phi, cutoffs.phi_sharp
    g = inverse_laplacian(_masked_product(phi, omega, product_mask)).field
    v = -1.0 * curl(_masked_product(phis, g, product_mask))
    w = _masked_product(phi, u, product_mask) - v
    varpi = _masked_product(phi, omega, product_mask) - curl(v)
    return LocalizedTriple(v, w, varpi)


def harmonicity_residual(field: GridField, region_radius: float, reference: float) -> float:
    """max |Lap(field)| over the ball of given radius, divided by `reference`.

    `reference` should be a positive scale such as the L^1 norm of the
    vorticity over B_2; small values certify the periodic surrogate.
    """
    if region_radius >= 1.0:
        raise ValueError("region_radius must be < 1")
    if reference <= 0:
        raise ValueError("reference scale must be positive")
    mask = ball_mask(field.spec, region_radius)
    lap = laplacian(field)
    mag = np.sqrt(np.sum(lap.data**2, axis=0))
    return float(mag[mask].max()) / reference


@dataclass(frozen=True)
class CommutatorResult:
    direct: GridField
    closed_form: GridField
    residual_rel: float


def _rel_residual(a: GridField, b: GridField) -> float:
    diff = l2_norm(a - b)
    scale = max(l2_norm(a), l2_norm(b), 1e-300)
    return diff / scale


def _remove_mean(f: GridField) -> GridField:
    means = f.data.reshape(f.components, -1).mean(axis=1)
    return f.with_data(f.data - means[:, None, None, None])


def commutator(kind: str, phi: GridField, u: GridField) -> CommutatorResult:
    """Operator-difference evaluation of a cutoff commutator and its closed form.

    kinds: cm1 [phi, curl], cm2 [phi, Lap], cm3 [phi, InvLap], cm4 [phi, P_sol].
    For cm3 and cm4 both sides are compared after removing componentwise
    means; on the torus the identities hold modulo constants because the
    inverse Laplacian discards the zero mode.
    """
    if phi.components != 1:
        raise ValueError("phi must be scalar")
    grad_phi = gradient(phi)
    lap_phi = laplacian(phi)

    if kind == "cm1":
        if u.components != 3:
            raise ValueError("cm1 needs a 3-component field")
        direct = phi * curl(u) - curl(phi * u)
        closed = -1.0 * cross(grad_phi, u)
        return CommutatorResult(direct, closed, _rel_residual(direct, closed))

    if kind == "cm2":
        direct = phi * laplacian(u) - laplacian(phi * u)
        gu = gradient(u)
        if u.components == 1:
            dot = np.sum(grad_phi.data * gu.data, axis=0)[None]
        else:
            dot = np.stack(
                [np.sum(grad_phi.data * gu.data[3 * i : 3 * i + 3], axis=0) for i in range(u.components)]
            )
        closed = GridField(u.spec, -2.0 * dot - lap_phi.data[0] * u.data, u.time_stamp)
        return CommutatorResult(direct, closed, _rel_residual(direct, closed))

    if kind == "cm3":
        g = inverse_laplacian(u).field
        direct = _remove_mean(phi * g - inverse_laplacian(phi * u).field)
        gg = gradient(g)
        if u.components == 1:
            dot = np.sum(grad_phi.data * gg.data, axis=0)[None]
        else:
            dot = np.stack(
                [np.sum(grad_phi.data * gg.data[3 * i : 3 * i + 3], axis=0) for i in range(u.components)]
            )
        inner = GridField(u.spec, 2.0 * dot + lap_phi.data[0] * g.data, u.time_stamp)
        closed = _remove_mean(inverse_laplacian(inner).field)
        return CommutatorResult(direct, closed, _rel_residual(direct, closed))

    if kind == "cm4":
        if u.components != 3:
            raise ValueError("cm4 needs a 3-component field")
        direct = _remove_mean(phi * leray_project(u) - leray_project(phi * u))
        g = inverse_laplacian(u).field  # InvLap applied componentwise
        curl_g = curl(g)
        div_g = divergence(g)
        hess_phi = gradient(grad_phi)  # component 3i+j holds d_j d_i phi
        g_dot_grad_gradphi = np.stack(
            [np.sum(g.data * hess_phi.data[3 * i : 3 * i + 3], axis=0) for i in range(3)]
        )
        gg = gradient(g)
        gradphi_dot_grad_g = np.stack(
            [np.sum(grad_phi.data * gg.data[3 * i : 3 * i + 3], axis=0) for i in range(3)]
        )
        inner = GridField(u.spec, 2.0 * gradphi_dot_grad_g + lap_phi.data[0] * g.data, u.time_stamp)
        closed = (
            cross(grad_phi, curl_g)
            + GridField(u.spec, grad_phi.data * div_g.data[0], u.time_stamp)
            - GridField(u.spec, g.data * lap_phi.data[0], u.time_stamp)
            + GridField(u.spec, g_dot_grad_gradphi, u.time_stamp)
            - GridField(u.spec, gradphi_dot_grad_g, u.time_stamp)
            + leray_project(inner)
        )
        closed = _remove_mean(closed)
        return CommutatorResult(direct, closed, _rel_residual(direct, closed))

    raise ValueError(f"unknown commutator kind {kind!r}")


@dataclass(frozen=True)
class SourceTerms:
    B: GridField
    L: GridField
    W: GridField
    triple: LocalizedTriple


def source_terms(
    u: GridField, cutoffs: CutoffPair, product_mask: np.ndarray | None = None
) -> SourceTerms:
    """Quadratic (B), linear (L) and remainder (W) source terms of the v equation.

    B = -curl((1 - phi_sharp) InvLap(phi curl(omega x u))) - curl InvLap(grad(phi) x (omega x u))
    L = -curl([phi_sharp, Lap] InvLap(phi omega))
        + curl(phi_sharp InvLap(2 div(grad(phi) (x) omega) - Lap(phi) omega))
    W = -omega x w + (1/2) P_grad(varpi x u + omega x w)

    With product_mask set, every pointwise product is projected back onto the
    mask band so the assembled terms mirror a dealiased solver run.
    """
    spec = u.spec
    m = product_mask
    omega = curl(u)
    phi, phis = cutoffs.phi, cutoffs.phi_sharp
    grad_phi = cutoffs.grad_phi
    lap_phi = cutoffs.lap_phi
    one_minus_phis = GridField(spec, 1.0 - phis.data)

    X = _masked_cross(omega, u, m)
    b1 = -1.0 * curl(_masked_product(one_minus_phis, inverse_laplacian(_masked_product(phi, curl(X), m)).field, m))
    b2 = curl(inverse_laplacian(-1.0 * _masked_cross(grad_phi, X, m)).field)
    B = b1 + b2

    g = inverse_laplacian(_masked_product(phi, omega, m)).field
    gg = gradient(g)
    grad_phis = gradient(phis)
    lap_phis = laplacian(phis)
    dot = np.stack([np.sum(grad_phis.data * gg.data[3 * i : 3 * i + 3], axis=0) for i in range(3)])
    comm_sharp = _mask_field(GridField(spec, -2.0 * dot - lap_phis.data[0] * g.data), m)
    l1 = -1.0 * curl(comm_sharp)
    tensor = _mask_field(
        GridField(
            spec, np.stack([grad_phi.data[i] * omega.data[j] for i in range(3) for j in range(3)])
        ),
        m,
    )
    inner = 2.0 * divergence(tensor) - _mask_field(
        GridField(spec, lap_phi.data[0] * omega.data), m
    )
    l2 = curl(_masked_product(phis, inverse_laplacian(inner).field, m))
    L = l1 + l2

    triple = localized_velocity(u, cutoffs, m)
    w, varpi = triple.w, triple.varpi
    W = -1.0 * _masked_cross(omega, w, m) + 0.5 * grad_project(
        _masked_cross(varpi, u, m) + _masked_cross(omega, w, m)
    )
    return SourceTerms(B, L, W, triple)


def _mask_field(f: GridField, mask: np.ndarray | None) -> GridField:
    if mask is None:
        return f
    from .grid import SpectralField, inverse_transform, transform

    return inverse_transform(SpectralField(f.spec, transform(f).coeffs * mask[None], f.time_stamp))


@dataclass(frozen=True)
class VEquationReport:
    residual_rel: float
    residual_l2: float
    term_scale: float
    times: np.ndarray


def v_equation_residual(
    snapshots,
    cutoffs: CutoffPair,
    stencil_centers: list[int] | None = None,
    product_mask: np.ndarray | None = None,
    viscosity: float = 1.0,
) -> VEquationReport:
    """Residual of dv/dt + omega x v + grad R(u (x) v) - B - L - W - Lap v over the unit cylinder.

    The diffusion-born terms (Lap v and the linear commutator) are scaled by
    the run viscosity.  dv/dt uses 4th-order central differences on the
    snapshot grid, so each stencil center needs two stored neighbors on both
    sides.  The spatially constant mode of the residual is removed: on the torus the assembled
    identity holds up to the mean of phi*(omega x u), which has no analogue
    on the whole space.  Pass the solver's dealias mask as product_mask to
    assert the identity on the dealiased products the run actually used.
    """
    snaps = list(snapshots)
    if len(snaps) < 5:
        raise ValueError("need at least 5 snapshots for 4th-order time differencing")
    times = np.array([s.time for s in snaps])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-10):
        raise ValueError("snapshots must be uniformly spaced in time")
    dt = float(dts[0])
    if stencil_centers is None:
        stencil_centers = list(range(2, len(snaps) - 2))

    spec = snaps[0].velocity.spec
    m = product_mask
    mask_b1 = ball_mask(spec, 1.0)
    cell = spec.cell_volume

    triples = [localized_velocity(s.velocity, cutoffs, m) for s in snaps]
    res_sq = 0.0
    scales: dict[str, float] = {}

    def _accum_scale(name, field):
        val = float(np.sum(np.sum(field.data**2, axis=0)[mask_b1])) * cell
        scales[name] = scales.get(name, 0.0) + val

    for j in stencil_centers:
        if j < 2 or j > len(snaps) - 3:
            raise ValueError("stencil center needs two neighbors on each side")
        u = snaps[j].velocity
        v = triples[j].v
        st = source_terms(u, cutoffs, m)
        omega = curl(u)
        dv_dt = (
            -triples[j + 2].v.data
            + 8.0 * triples[j + 1].v.data
            - 8.0 * triples[j - 1].v.data
            + triples[j - 2].v.data
        ) / (12.0 * dt)
        dv_dt_f = GridField(spec, dv_dt)
        transport = _masked_cross(omega, v, m)
        uv = outer_product(u, v)
        if m is not None:
            uv = _mask_field(uv, m)
        grad_R = gradient(riesz_R(uv))
        lap_v = viscosity * laplacian(v)
        visc_L = viscosity * st.L
        r = dv_dt_f + transport + grad_R - st.B - visc_L - st.W - lap_v
        r = _remove_mean(r)
        res_sq += float(np.sum(np.sum(r.data**2, axis=0)[mask_b1])) * cell
        for name, f in (
            ("dv_dt", dv_dt_f),
            ("transport", transport),
            ("grad_R", grad_R),
            ("lap_v", lap_v),
            ("B", st.B),
            ("L", visc_L),
            ("W", st.W),
        ):
            _accum_scale(name, f)

    residual_l2 = np.sqrt(res_sq * dt)
    term_scale = np.sqrt(max(scales.values()) * dt)
    return VEquationReport(
        residual_rel=residual_l2 / max(term_scale, 1e-300),
        residual_l2=residual_l2,
        term_scale=term_scale,
        times=times[np.asarray(stencil_centers)],
    )


def v_local_energy_residual(
    snapshots,
    cutoffs: CutoffPair,
    test_fn,
    viscosity: float = 1.0,
    product_mask: np.ndarray | None = None,
) -> float:
    """Weak-form energy defect of the localized variable v against psi >= 0.

    Evaluates  int int [ -|v|^2/2 dpsi/dt - (v . grad psi) R(u (x) v)
                         + nu |grad v|^2 psi - nu |v|^2/2 Lap(psi)
                         - psi v . (B + nu L + W) ] dx dt,
    the analogue of the velocity-level defect with the source terms carried
    to the left side.  Signed, not clamped.
    """
    snaps = list(snapshots)
    if len(snaps) < 3:
        raise ValueError("need at least 3 snapshots")
    m = product_mask
    phi_s = test_fn.spatial
    spec = phi_s.spec
    w_cell = spec.cell_volume
    gpsi = gradient(phi_s).data
    lpsi = laplacian(phi_s).data[0]
    psi = phi_s.data[0]

    times = np.array([s.time for s in snaps])
    integrand = np.zeros(len(snaps))
    for j, snap in enumerate(snaps):
        t = snap.time
        chi = float(test_fn.temporal(t))
        dchi = float(test_fn.temporal.derivative(t))
        if chi == 0.0 and dchi == 0.0:
            continue
        u = snap.velocity
        st = source_terms(u, cutoffs, m)
        v = st.triple.v
        v2_half = 0.5 * np.sum(v.data**2, axis=0)
        uv = outer_product(u, v)
        if m is not None:
            uv = _mask_field(uv, m)
        Ruv = riesz_R(uv).data[0]
        gv = gradient(v)
        grad_sq = np.sum(gv.data**2, axis=0)
        v_dot_gpsi = np.sum(v.data * gpsi, axis=0)
        forcing = np.sum(
            v.data * (st.B.data + viscosity * st.L.data + st.W.data), axis=0
        )
        term = (
            -v2_half * dchi * psi
            - v_dot_gpsi * Ruv * chi
            + viscosity * grad_sq * chi * psi
            - viscosity * v2_half * chi * lpsi
            - forcing * chi * psi
        )
        integrand[j] = float(np.sum(term)) * w_cell
    return float(np.trapezoid(integrand, times))


@dataclass(frozen=True)
class BoundednessReport:
    op_kind: str
    p: float
    trials: int
    norm_estimate: float
    per_trial: np.ndarray


def boundedness_probe(
    op_kind: str,
    phi: GridField,
    p: float,
    trials: int,
    rng: np.random.Generator,
    max_mode: int = 8,
) -> BoundednessReport:
    """Empirical L^p -> L^p operator norm of d_i [phi, P_sol] or [phi, P_sol] d_i.

    Probes with random unit-L^p band-limited inputs; the estimate is the
    running max over trials and directions, hence monotone in `trials`.
    """
    if not 1.0 < p < np.inf:
        raise ValueError("p must be in (1, inf)")
    if op_kind not in ("di_commutator_Pcurl", "commutator_Pcurl_di"):
        raise ValueError(f"unknown op_kind {op_kind!r}")
    from .grid import random_band_limited

    spec = phi.spec
    records = []
    best = 0.0
    for _ in range(trials):
        f = random_band_limited(spec, 3, max_mode, rng)
        nf = lp_norm(f, p)
        if nf == 0.0:
            records.append(best)
            continue
        f = (1.0 / nf) * f
        trial_max = 0.0
        for axis in range(3):
            if op_kind == "di_commutator_Pcurl":
                inner = phi * leray_project(f) - leray_project(phi * f)
                out = _partial(inner, axis)
            else:
                df = _partial(f, axis)
                out = phi * leray_project(df) - leray_project(phi * df)
            trial_max = max(trial_max, lp_norm(out, p))
        best = max(best, trial_max)
        records.append(best)
    return BoundednessReport(op_kind, p, trials, best, np.asarray(records))


def _partial(f: GridField, axis: int) -> GridField:
    g = gradient(f)
    if f.components == 1:
        return GridField(f.spec, g.data[axis][None], f.time_stamp)
    return GridField(
        f.spec, np.stack([g.data[3 * i + axis] for i in range(f.components)]), f.time_stamp
    )


def smoothing_constant(
    f: GridField,
    phi: GridField,
    probe_radius: float,
    probe_center=(0.0, 0.0, 0.0),
) -> float:
    """Realized constant in the interior-smoothing bound of the Laplace potential:

        max over the probe ball of (|InvLap(phi f)| + |grad| + |Hessian|)
        divided by the L^1 norm of f over supp(phi).

    Meaningful when phi vanishes on a neighborhood of the probe ball.
    """
    g = inverse_laplacian(phi * f).field
    mask = ball_mask(f.spec, probe_radius, probe_center)
    c2 = 0.0
    for fld in (g, gradient(g), gradient(gradient(g))):
        mag = np.sqrt(np.sum(fld.data**2, axis=0))
        c2 = max(c2, float(mag[mask].max()))
    supp = phi.data[0] > 0
    l1 = float(np.sum(np.sqrt(np.sum(f.data**2, axis=0))[supp])) * f.spec.cell_volume
    return c2 / max(l1, 1e-300)
