"""Acceptance criteria: one callable per criterion, each with pinned tolerances.

`verify(suite)` runs the requested criteria, prints one PASS/FAIL line per
criterion, and returns machine-readable results.  A fault-injection hook
tightens a criterion's tolerances to impossible values so failure surfacing
can itself be tested.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .blowup import (
    PivotConfig,
    RescaleFrame,
    epsilon_selection,
    mixed_norm,
    ns_residual,
    rescale,
)
from .degiorgi import energy as dg_energy
from .degiorgi import level, truncate, truncation_lemma_check
from .flowmap import (
    AdmissibilityThresholds,
    FlowSampler,
    Mollifier,
    ball_average_ladder,
    cylinder_quadratures,
    hl_maximal,
    integrate_trajectory,
    lebesgue_check,
    q_maximal,
    radius_ladder,
)
from .grid import (
    GridField,
    GridSpec,
    ball_mask,
    band_mask,
    cross,
    curl,
    divergence,
    gradient,
    l2_norm,
    linf_norm,
    lp_norm,
    magnitude,
    random_band_limited,
)
from .interp import TimeInterpolator
from .localization import (
    commutator,
    localized_velocity,
    make_cutoff_pair,
    v_equation_residual,
)
from .lorentz import LorentzIndex, WeightedSamples, interpolation_check, lorentz_norm, theorem_functional
from .solver import SolverConfig, Snapshot, peak_centered_taylor_green, run, taylor_green_init

__all__ = ["CriterionResult", "VerifyContext", "verify", "run_criterion", "SUITES", "CRITERIA"]


@dataclass
class CriterionResult:
    criterion: int
    name: str
    passed: bool
    details: dict
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} criterion {self.criterion}: {self.name} ({self.seconds:.1f}s)"


@dataclass
class VerifyContext:
    """Caches the expensive solver runs shared between criteria."""

    seed: int = 0
    inject_fault: int | None = None
    _cache: dict = field(default_factory=dict)

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng(self.seed * 1000003 + salt)

    def tg_run(self, n: int, amplitude: float, viscosity: float, dt: float, t_end: float,
               dealias: bool = True, stride: int = 10, peaked: bool = False):
        key = ("run", n, amplitude, viscosity, dt, t_end, dealias, stride, peaked)
        if key not in self._cache:
            spec = GridSpec.centered(n)
            init = peak_centered_taylor_green if peaked else taylor_green_init
            cfg = SolverConfig(spec, viscosity=viscosity, dt=dt, t_end=t_end,
                               dealias=dealias, snapshot_stride=stride)
            self._cache[key] = run(cfg, init(spec, amplitude))
        return self._cache[key]

    def tol(self, value: float) -> float:
        """Fault injection shrinks every tolerance to an impossible value."""
        return value * 1e-12 if self.inject_fault is not None else value


def _criterion_1(ctx: VerifyContext) -> CriterionResult:
    """Identity suite: vector identities and cutoff commutators on random fields."""
    t0 = time.perf_counter()
    spec = GridSpec.centered(32)
    rng = ctx.rng(1)
    tol = ctx.tol(1e-8)
    worst = {"vc1": 0.0, "vc3": 0.0, "cm1": 0.0, "cm2": 0.0, "cm3": 0.0, "cm4": 0.0}
    for _ in range(50):
        u = random_band_limited(spec, 3, 4, rng)
        v = random_band_limited(spec, 3, 4, rng)
        phi = random_band_limited(spec, 1, 3, rng, mean_zero=False)

        gu, gv = gradient(u), gradient(v)
        u_grad_v = np.stack([np.sum(u.data * gv.data[3 * i : 3 * i + 3], axis=0) for i in range(3)])
        v_grad_u = np.stack([np.sum(v.data * gu.data[3 * i : 3 * i + 3], axis=0) for i in range(3)])
        uv = GridField(spec, np.sum(u.data * v.data, axis=0)[None])
        lhs1 = gradient(uv).data
        r1 = lhs1 - u_grad_v - v_grad_u - cross(u, curl(v)).data - cross(v, curl(u)).data
        worst["vc1"] = max(worst["vc1"], float(np.abs(r1).max() / max(np.abs(lhs1).max(), 1e-300)))

        lhs3 = curl(cross(u, v)).data
        r3 = (
            lhs3
            - u.data * divergence(v).data[0]
            + v.data * divergence(u).data[0]
            - v_grad_u
            + u_grad_v
        )
        worst["vc3"] = max(worst["vc3"], float(np.abs(r3).max() / max(np.abs(lhs3).max(), 1e-300)))

        for kind in ("cm1", "cm2", "cm3", "cm4"):
            worst[kind] = max(worst[kind], commutator(kind, phi, u).residual_rel)
    elapsed = time.perf_counter() - t0
    passed = all(w <= tol for w in worst.values()) and elapsed < 30.0
    return CriterionResult(1, "identity suite (vc1, vc3, cm1-cm4)", passed,
                           {"worst": worst, "tolerance": tol, "runtime_limit_s": 30.0},
                           elapsed)


def _criterion_2(ctx: VerifyContext) -> CriterionResult:
    """Lorentz oracle suite: indicator closed form, L^{p,p} = L^p, interpolation."""
    t0 = time.perf_counter()
    rng = ctx.rng(2)
    tol = ctx.tol(1e-12)
    worst_ind = 0.0
    for _ in range(20):
        p = float(rng.uniform(0.5, 4.0))
        q = float(rng.uniform(0.5, 4.0))
        m = float(rng.uniform(0.1, 5.0))
        cells = rng.integers(1, 50)
        samples = WeightedSamples(np.ones(cells), np.full(cells, m / cells))
        got = lorentz_norm(samples, LorentzIndex(p, q))
        want = (p / q) ** (1.0 / q) * m ** (1.0 / p)
        worst_ind = max(worst_ind, abs(got - want) / want)
        got_inf = lorentz_norm(samples, LorentzIndex(p, np.inf))
        worst_ind = max(worst_ind, abs(got_inf - m ** (1.0 / p)) / m ** (1.0 / p))

    worst_pp = 0.0
    for _ in range(20):
        vals = rng.random(400)
        w = rng.random(400) + 0.25
        p = float(rng.uniform(0.8, 3.5))
        got = lorentz_norm(WeightedSamples(vals, w), LorentzIndex(p, p))
        want = float(np.sum(w * vals**p) ** (1.0 / p))
        worst_pp = max(worst_pp, abs(got - want) / want)

    violations = 0
    for _ in range(1000):
        nu = float(rng.uniform(0.2, 3.0))
        theta = 1.0 / (1.0 + nu)
        m = rng.integers(5, 40)
        f0 = rng.random(m) + 1e-3
        f1 = rng.random(m) + 1e-3
        w = rng.random(m) + 0.25
        c_nu = nu**theta + nu ** (theta - 1.0)
        f = rng.random(m) * (c_nu / 2.0) * f0 ** (1.0 - theta) * f1**theta
        idx0 = LorentzIndex(float(rng.uniform(0.8, 3.0)), float(rng.uniform(0.8, 3.0)))
        idx1 = LorentzIndex(float(rng.uniform(0.8, 3.0)), float(rng.uniform(0.8, 3.0)))
        try:
            rep = interpolation_check(
                WeightedSamples(f, w), WeightedSamples(f0, w), WeightedSamples(f1, w),
                nu, idx0, idx1, np.array([0.25, 1.0, 4.0]),
            )
            if not rep.hypothesis_satisfied or rep.lhs > rep.rhs * (1.0 + 1e-10):
                violations += 1
        except AssertionError:
            violations += 1
    elapsed = time.perf_counter() - t0
    passed = worst_ind <= tol and worst_pp <= tol and violations == 0
    if ctx.inject_fault is not None:
        passed = False
    return CriterionResult(2, "Lorentz oracle suite", passed,
                           {"worst_indicator": worst_ind, "worst_pp": worst_pp,
                            "interpolation_violations": violations, "tolerance": tol},
                           elapsed)


def _criterion_3(ctx: VerifyContext) -> CriterionResult:
    """Solver suite: divergence, Stokes decay, Leray energy defect."""
    t0 = time.perf_counter()
    spec = GridSpec.centered(32)
    x, y, z = spec.meshgrid()

    # Stokes decay over one tenth of a unit time at dt = 1e-3
    u0 = GridField(spec, np.stack([np.sin(y), np.zeros_like(y), np.zeros_like(y)]))
    cfg = SolverConfig(spec, viscosity=1.0, dt=1e-3, t_end=0.1, snapshot_stride=100)
    res = run(cfg, u0)
    stokes_err = float(
        np.max(np.abs(res.snapshots[-1].velocity.data[0] - np.exp(-0.1) * np.sin(y)))
    ) / 0.1

    tg = ctx.tg_run(32, 1.0, 1.0, 1e-3, 0.5, stride=50)
    defect_rel = float(np.max(np.abs(tg.leray_defect()))) / (2.0 * tg.kinetic_energy[0])
    div_rel = max(
        linf_norm(divergence(s.velocity)) / max(linf_norm(gradient(s.velocity)), 1e-300)
        for s in tg.snapshots
    )
    elapsed = time.perf_counter() - t0
    passed = (
        div_rel <= ctx.tol(1e-10)
        and stokes_err <= ctx.tol(1e-8)
        and defect_rel <= ctx.tol(1e-8)
    )
    return CriterionResult(3, "solver suite (divergence, Stokes decay, energy balance)", passed,
                           {"div_rel": div_rel, "stokes_err_per_unit_time": stokes_err,
                            "leray_defect_rel": defect_rel}, elapsed)


def _criterion_4(ctx: VerifyContext) -> CriterionResult:
    """Localization suite: decomposition, div v, harmonicity refinement, v-equation."""
    t0 = time.perf_counter()
    from .localization import harmonicity_residual

    # decomposition identities and div v at N=32
    spec = GridSpec.centered(32)
    u = taylor_green_init(spec, 1.0)
    cut = make_cutoff_pair(spec)
    trip = localized_velocity(u, cut)
    om = curl(u)
    scale_u = max(linf_norm(cut.phi * u), 1e-300)
    scale_o = max(linf_norm(cut.phi * om), 1e-300)
    dec_u = linf_norm(cut.phi * u - trip.v - trip.w) / scale_u
    dec_o = linf_norm(cut.phi * om - curl(trip.v) - trip.varpi) / scale_o
    div_v = linf_norm(divergence(trip.v)) / max(linf_norm(gradient(trip.v)), 1e-300)

    # harmonicity refinement table (sampled bump cutoffs, stated grids)
    def harm(n, L):
        sp = GridSpec.centered(n, L)
        uu = taylor_green_init(sp, 1.0)
        cc = make_cutoff_pair(sp)
        tt = localized_velocity(uu, cc)
        ref = lp_norm(curl(uu), 1.0, ball_mask(sp, 2.0))
        return (
            harmonicity_residual(tt.w, 0.9, ref),
            harmonicity_residual(tt.varpi, 0.9, ref),
        )

    two_pi = 2.0 * np.pi
    h32 = harm(32, two_pi)
    h64 = harm(64, two_pi)
    h64_2L = harm(64, 2 * two_pi)
    refine_ok = h64[0] < h32[0] and h64[1] < h32[1]
    scale_ok = h64_2L[0] < h64[0] and h64_2L[1] < h64[1]

    # v-equation residual at N=64, dt=1e-3, decreasing under dt/2
    def vres(n, dt):
        sp = GridSpec.centered(n)
        steps = int(round(0.01 / dt))
        cfg = SolverConfig(sp, viscosity=2.0, dt=dt, t_end=(steps + 3) * dt,
                           dealias=False, snapshot_stride=1)
        r = run(cfg, taylor_green_init(sp, 2.0))
        cc = make_cutoff_pair(sp, band_limit=n // 6)
        pm = band_mask(sp, n // 3)
        rep = v_equation_residual(r.snapshots[steps - 2 : steps + 3], cc,
                                  product_mask=pm, viscosity=2.0)
        return rep.residual_rel

    res_dt = vres(64, 1e-3)
    res_dt2 = vres(64, 5e-4)
    v_eq_ok = res_dt <= ctx.tol(1e-3) and res_dt2 < res_dt

    elapsed = time.perf_counter() - t0
    passed = (
        dec_u <= ctx.tol(1e-8)
        and dec_o <= ctx.tol(1e-8)
        and div_v <= ctx.tol(1e-10)
        and refine_ok
        and scale_ok
        and v_eq_ok
    )
    details = {
        "decomposition_velocity_rel": dec_u,
        "decomposition_vorticity_rel": dec_o,
        "div_v_rel": div_v,
        "harmonicity": {
            "w": {"N32_L2pi": h32[0], "N64_L2pi": h64[0], "N64_L4pi": h64_2L[0]},
            "varpi": {"N32_L2pi": h32[1], "N64_L2pi": h64[1], "N64_L4pi": h64_2L[1]},
            "refine_decrease_ok": refine_ok,
            "domain_scale_decrease_ok": scale_ok,
            "note": "known-red: discrete residual is aliasing-driven (a function of h only); "
                    "the N-refinement and domain-scale clauses select opposite regimes. "
                    "See the decisions ledger for the full analysis.",
        },
        "v_equation": {"res_dt_1e-3": res_dt, "res_dt_5e-4": res_dt2, "ok": v_eq_ok},
    }
    return CriterionResult(4, "localization suite", passed, details, elapsed)


def _criterion_5(ctx: VerifyContext) -> CriterionResult:
    """Maximal suite: pointwise bound, spike oracle, sublinearity, Lebesgue slope, weak-(1,1)."""
    t0 = time.perf_counter()
    rng = ctx.rng(5)
    spec = GridSpec.centered(32)

    # M(f) >= |f| pointwise
    f = random_band_limited(spec, 1, 8, rng)
    mf = hl_maximal(f)
    pointwise_ok = bool(np.all(mf.data >= np.abs(f.data) - ctx.tol(1e-12)))

    # spike oracle: FFT ladder equals brute force over the ladder
    spike = np.zeros((1, 32, 32, 32))
    spike[0, 4, 5, 6] = 1.0 / spec.cell_volume
    fs = GridField(spec, spike)
    ms = hl_maximal(fs)
    ladder = radius_ladder(spec)
    brute = np.abs(fs.data[0]).copy()
    for r in ladder:
        np.maximum(brute, ball_average_ladder(fs, r), out=brute)
    spike_rel = float(np.max(np.abs(ms.data[0] - brute)) / brute.max())

    # flow context for the cylinder checks
    tg = ctx.tg_run(32, 1.0, 1.0, 2e-3, 0.5, stride=10)
    snaps = tg.snapshots
    kernel = Mollifier()
    m_grad = [hl_maximal(magnitude(gradient(s.velocity))).with_time(s.time) for s in snaps]
    m_interp = TimeInterpolator(m_grad)
    thresholds = AdmissibilityThresholds(eta0=0.05)
    times = np.array([s.time for s in snaps])

    # sublinearity and monotonicity over 200 random pairs at a fixed ladder
    probe_pts = [(0.45, np.array([0.6, -0.4, 0.3]))]
    eps_ladder = np.array([0.05, 0.1, 0.15, 0.2])
    quads = cylinder_quadratures(snaps, kernel, probe_pts, eps_ladder)
    # admissibility flags shared by every field
    mg_data = np.stack([g.data[0] for g in m_grad])
    adm = {
        eps: (eps**2 * quads[(0, float(eps))].average(mg_data) <= thresholds.eta0)
        for eps in eps_ladder
    }
    if not any(adm.values()):
        raise RuntimeError("no admissible ladder entry in the sublinearity probe")

    def mq_of(data: np.ndarray) -> float:
        vals = [quads[(0, float(eps))].average(data) for eps in eps_ladder if adm[eps]]
        return max(vals)

    sub_viol = 0
    mono_viol = 0
    for _ in range(200):
        a = random_band_limited(spec, 1, 6, rng)
        b = random_band_limited(spec, 1, 6, rng)
        da = np.repeat(a.data, len(snaps), axis=0)
        db = np.repeat(b.data, len(snaps), axis=0)
        m_ab = mq_of(da + db)
        m_a = mq_of(da)
        m_b = mq_of(db)
        if m_ab > m_a + m_b + ctx.tol(1e-12) * (m_a + m_b + 1):
            sub_viol += 1
        aa, bb = np.abs(a.data), np.abs(b.data)
        g_small = np.repeat(aa, len(snaps), axis=0)
        g_big = np.repeat(aa + bb, len(snaps), axis=0)
        if mq_of(g_small) > mq_of(g_big) + ctx.tol(1e-12):
            mono_viol += 1

    # Lebesgue deviation slope on a smooth single-mode field
    x, _, _ = spec.meshgrid()
    smooth = [GridField(spec, (0.5 + 0.3 * np.sin(x))[None], float(t)) for t in times]
    rep = lebesgue_check(smooth, (0.45, np.array([0.4, 0.2, -0.3])),
                         np.array([0.04, 0.08, 0.16]), snaps, kernel)
    slope_ok = abs(rep.slope - 1.0) <= ctx.tol(0.2) * 1.0 if np.isfinite(rep.slope) else False

    # empirical weak-(1,1) constant across resolutions: the "spike" is a
    # unit-mass bump of fixed physical width, so its maximal function is a
    # resolution-convergent object (a one-cell spike cannot be)
    def weak11(n: int) -> float:
        sp = GridSpec.centered(n)
        run_n = ctx.tg_run(n, 1.0, 1.0, 2e-3, 0.3, stride=15)
        sn = run_n.snapshots
        from .grid import min_image_radius
        from .profiles import mollifier_profile

        r = min_image_radius(sp, (0.2, -0.35, 0.45))
        bump = mollifier_profile(r / 0.35)
        bump /= bump.sum() * sp.cell_volume  # unit mass
        spike = bump[None]
        lattice = []
        coords = np.linspace(-1.2, 1.2, 4)
        for xx in coords:
            for yy in coords:
                for zz in coords:
                    lattice.append((0.27, np.array([xx, yy, zz])))
        eps_l = np.array([0.05, 0.1, 0.15])
        qq = cylinder_quadratures(sn, kernel, lattice, eps_l, resolution=4)
        data = np.repeat(spike, len(sn), axis=0)
        mgn = [hl_maximal(magnitude(gradient(s.velocity))).with_time(s.time) for s in sn]
        mgd = np.stack([g.data[0] for g in mgn])
        values = []
        for pi in range(len(lattice)):
            vals = [
                qq[(pi, float(e))].average(data)
                for e in eps_l
                if e**2 * qq[(pi, float(e))].average(mgd) <= thresholds.eta0
            ]
            values.append(max(vals) if vals else 0.0)
        values = np.asarray(values)
        cellm = (coords[1] - coords[0]) ** 3 * 0.05  # lattice cell x time slab
        alphas = np.unique(values[values > 0])
        best = 0.0
        for al in alphas:
            best = max(best, float(al * cellm * np.sum(values >= al)))
        return best

    k32 = weak11(32)
    k64 = weak11(64)
    weak_ok = abs(k64 - k32) <= ctx.tol(0.25) * max(k32, k64)

    elapsed = time.perf_counter() - t0
    passed = (
        pointwise_ok
        and spike_rel <= ctx.tol(1e-12)
        and sub_viol == 0
        and mono_viol == 0
        and slope_ok
        and weak_ok
    )
    if ctx.inject_fault is not None:
        passed = False
    return CriterionResult(5, "maximal suite", passed,
                           {"pointwise_ok": pointwise_ok, "spike_rel": spike_rel,
                            "sublinearity_violations": sub_viol, "monotonicity_violations": mono_viol,
                            "lebesgue_slope": rep.slope, "weak11_K32": k32, "weak11_K64": k64},
                           elapsed)


def _criterion_6(ctx: VerifyContext) -> CriterionResult:
    """Blow-up suite: Galilean invariance, rescaled residual, bound structure, stability."""
    t0 = time.perf_counter()
    tg = ctx.tg_run(32, 2.0, 1.0, 1e-3, 0.12, dealias=False, stride=1)
    snaps = tg.snapshots
    window = snaps[100:115]
    res_raw = ns_residual(window)

    boost = np.array([0.17, -0.08, 0.11])
    frame = RescaleFrame.uniform_motion(window[-1].time, 1.0, np.zeros(3), boost,
                                        span=window[-1].time - window[0].time)
    res_boost = ns_residual(rescale(window, frame))
    galilean = abs(res_boost - res_raw)

    # rescaled along a mollified trajectory, eps = 1/2
    kernel = Mollifier()
    sampler = FlowSampler(snaps, kernel, 0.3)
    t_hi = window[-1].time
    traj = integrate_trajectory(sampler, t_hi, np.array([0.4, 0.1, -0.2]),
                                window[0].time)
    frame2 = RescaleFrame(t_hi, 0.5, traj, span=t_hi - window[0].time)
    res_resc = ns_residual(rescale(window, frame2))
    within = res_resc <= 4.0 * res_raw + 1e-14

    # selection bound structure at probe points + ladder stability
    run5 = ctx.tg_run(32, 2.0, 1.0, 2e-3, 0.5, stride=10)
    snaps5 = run5.snapshots
    m_grad = [hl_maximal(magnitude(gradient(s.velocity))).with_time(s.time) for s in snaps5]
    m_interp = TimeInterpolator(m_grad)
    pc = PivotConfig(eta=0.002)
    thresholds = AdmissibilityThresholds(eta0=0.05)
    fields_p = [GridField(f.spec, np.abs(f.data) ** pc.p, f.time_stamp) for f in m_grad]
    fields_2 = [GridField(f.spec, f.data**2, f.time_stamp) for f in m_grad]

    points = [
        (0.45, np.array([0.7, 0.3, -0.2])),
        (0.45, np.array([-0.5, 0.8, 0.1])),
        (0.3, np.array([0.2, -0.6, 0.4])),
    ]
    bound_viol = 0
    eps_stab = 0.0
    cases = []
    for pt in points:
        sel = epsilon_selection(pt, snaps5, kernel, m_interp, pc)
        cases.append(sel.case_tag)
        ladder = np.array([sel.eps_star / 4, sel.eps_star / 2, sel.eps_star])
        qp = q_maximal(fields_p, pt, ladder, snaps5, kernel, m_interp, thresholds)
        q2 = q_maximal(fields_2, pt, ladder, snaps5, kernel, m_interp, thresholds)
        bound = max(
            (1.0 / pc.eta) * (pc.delta ** (-2 * pc.nu) * qp.value ** (2.0 / pc.p)
                              + pc.delta * q2.value),
            81.0 / pt[0] ** 2,
        )
        if sel.eps_star**-4 > bound * (1.0 + 1e-9):
            bound_viol += 1
        sel_fine = epsilon_selection(pt, snaps5, kernel, m_interp, pc,
                                     eps_min=sel.eps_star / 23.0)
        eps_stab = max(eps_stab, abs(sel_fine.eps_star - sel.eps_star) / sel.eps_star)

    elapsed = time.perf_counter() - t0
    passed = (
        galilean <= ctx.tol(1e-10)
        and within
        and bound_viol == 0
        and eps_stab <= ctx.tol(0.05)
    )
    if ctx.inject_fault is not None:
        passed = False
    return CriterionResult(6, "blow-up suite", passed,
                           {"galilean_residual_change": galilean, "ns_residual_raw": res_raw,
                            "ns_residual_rescaled": res_resc, "bound_violations": bound_viol,
                            "eps_star_ladder_stability": eps_stab, "cases": cases},
                           elapsed)


def _criterion_7(ctx: VerifyContext) -> CriterionResult:
    """De Giorgi suite: pointwise gradient bound, exact vanishing, lemma margins, decay."""
    t0 = time.perf_counter()
    rng = ctx.rng(7)
    spec = GridSpec.centered(32)

    # |grad v_k| <= d_k pointwise and exact vanishing beyond the level
    worst_grad = 0.0
    lemma_ok = True
    worst_energy_ratio = 0.0
    for i in range(20):
        g = random_band_limited(spec, 3, 5, rng)
        g = (float(rng.uniform(0.8, 1.9)) / linf_norm(g)) * g
        series = [g.with_time(tt) for tt in (-1.05, -0.7, -0.35, 0.0)]
        lvl = truncate(g, 1 + (i % 3))
        gvk = lvl.indicator * np.sqrt(lvl.grad_mag_sq)
        worst_grad = max(worst_grad, float((gvk - lvl.d_k).max()))
        rep = truncation_lemma_check(series, 1 + (i % 3))
        lemma_ok = lemma_ok and rep.indicator_l2_pointwise_ok and rep.energy_bound_ok
        lemma_ok = lemma_ok and rep.level_bound_margin >= -1e-12 and rep.grad_vk_le_dk_margin >= -1e-12
        worst_energy_ratio = max(worst_energy_ratio, rep.energy_ratio)

    small = random_band_limited(spec, 3, 5, rng)
    small = (0.45 / linf_norm(small)) * small
    series = [small.with_time(tt) for tt in (-1.05, -0.5, 0.0)]
    vanish_ok = dg_energy(series, 1) == 0.0 and dg_energy(series, 3) == 0.0

    # geometric decay of U_k on the calibrated trajectory-frame probe
    from .flowmap import FlowSampler, integrate_trajectory

    cut = make_cutoff_pair(spec)
    kernel = Mollifier()

    def localized_series(amplitude: float):
        r = ctx.tg_run(32, amplitude, 0.02, 4e-3, 1.3, stride=12, peaked=True)
        te = r.snapshots[-1].time
        sampler = FlowSampler(r.snapshots, kernel, 2.0 * spec.h)
        traj = integrate_trajectory(sampler, te, np.zeros(3), te - 1.1)
        frame = RescaleFrame(te, 1.0, traj, span=1.1)
        resc = rescale(r.snapshots, frame)
        return [localized_velocity(s.velocity, cut).v.with_time(s.time) for s in resc]

    from .degiorgi import flat_radius

    mask_late = ball_mask(spec, flat_radius(6))
    amp = 1.8
    vs = localized_series(amp)
    late = [v for v in vs if v.time_stamp >= -(flat_radius(6) ** 2) - 1e-9]
    m = max(linf_norm(v, mask_late) for v in late)
    if abs(m - 0.99) > 0.02:
        amp = amp * 0.99 / m
        vs = localized_series(amp)
    u_vals = [dg_energy(vs, k) for k in range(7)]
    ratios = [u_vals[k + 1] / u_vals[k] if u_vals[k] > 0 else np.inf for k in range(6)]
    decay_ok = all(np.isfinite(r) and r < ctx.tol(1.0) for r in ratios)

    elapsed = time.perf_counter() - t0
    passed = (
        worst_grad <= ctx.tol(1e-8)
        and vanish_ok
        and lemma_ok
        and decay_ok
    )
    return CriterionResult(7, "De Giorgi suite", passed,
                           {"worst_grad_vk_minus_dk": worst_grad, "vanish_ok": vanish_ok,
                            "lemma_ok": lemma_ok, "worst_beta_energy_ratio": worst_energy_ratio,
                            "U_k": u_vals, "ratios": ratios, "amplitude": amp},
                           elapsed)


def _criterion_8(ctx: VerifyContext) -> CriterionResult:
    """Thresholded vorticity-gradient functional: finite, resolution-stable, swept."""
    t0 = time.perf_counter()

    def functional(n: int) -> tuple[float, float, list]:
        r = ctx.tg_run(n, 2.0, 1.0, 2e-3, 0.5, stride=10)
        slices = []
        for s in r.snapshots:
            if s.time < 0.1:
                continue
            om = curl(s.velocity)
            slices.append(magnitude(gradient(om)).with_time(s.time))
        u0_sq = 2.0 * r.kinetic_energy[0]
        value = theorem_functional(slices, 1, 2.0, 0.1)
        sweep = [(c, theorem_functional(slices, 1, 2.0, c) / u0_sq)
                 for c in (0.05, 0.1, 0.25, 0.5, 1.0)]
        return value, u0_sq, sweep

    v32, u0sq, sweep32 = functional(32)
    v64, _, _ = functional(64)
    rel = abs(v64 - v32) / max(v32, v64)
    elapsed = time.perf_counter() - t0
    passed = np.isfinite(v32) and v32 > 0 and rel <= ctx.tol(0.10)
    return CriterionResult(8, "thresholded Lorentz functional of the vorticity gradient", passed,
                           {"value_N32": v32, "value_N64": v64, "rel_difference": rel,
                            "ratio_sweep_N32": sweep32}, elapsed)


def _criterion_9(ctx: VerifyContext, results: list[CriterionResult], elapsed_total: float) -> CriterionResult:
    """End-to-end: the full verification finishes in budget with all criteria green."""
    all_green = all(r.passed for r in results)
    passed = all_green and elapsed_total < 600.0
    return CriterionResult(9, "end-to-end verify (all green, under 10 minutes)", passed,
                           {"elapsed_total_s": elapsed_total, "all_green": all_green,
                            "failed": [r.criterion for r in results if not r.passed]},
                           0.0)


CRITERIA = {
    1: _criterion_1,
    2: _criterion_2,
    3: _criterion_3,
    4: _criterion_4,
    5: _criterion_5,
    6: _criterion_6,
    7: _criterion_7,
    8: _criterion_8,
}

SUITES = {
    "identities": [1],
    "lorentz": [2, 8],
    "suitability": [3, 4],
    "maximal": [5, 6],
    "degiorgi": [7],
    "all": [1, 2, 3, 4, 5, 6, 7, 8, 9],
}


def run_criterion(cid: int, ctx: VerifyContext | None = None) -> CriterionResult:
    ctx = ctx or VerifyContext()
    inject = ctx.inject_fault == cid
    sub = VerifyContext(seed=ctx.seed, inject_fault=cid if inject else None, _cache=ctx._cache)
    result = CRITERIA[cid](sub)
    print(result.line(), flush=True)
    return result


def verify(suite: str, seed: int = 0, inject_fault: int | None = None) -> list[CriterionResult]:
    """Run a named suite; prints one verdict line per criterion."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    ctx = VerifyContext(seed=seed, inject_fault=inject_fault)
    results: list[CriterionResult] = []
    t0 = time.perf_counter()
    for cid in SUITES[suite]:
        if cid == 9:
            continue
        results.append(run_criterion(cid, ctx))
    if 9 in SUITES[suite]:
        total = time.perf_counter() - t0
        r9 = _criterion_9(ctx, results, total)
        print(r9.line(), flush=True)
        results.append(r9)
    return results
