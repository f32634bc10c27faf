"""Experiment pipeline: simulate, localize, maximal, select, degiorgi, report.

Each stage writes its artifacts (VLF1 fields, CSV tables, JSON-lines
reports) into the output directory and registers them in a manifest with
content hashes.  Fixed seed and config give byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import vlf
from .blowup import (
    EpsilonSelection,
    PivotConfig,
    RescaleFrame,
    epsilon_selection,
    mean_zero_residual,
    pivot_quantities,
    rescale,
)
from .config import ExperimentConfig
from .degiorgi import energy as degiorgi_energy
from .degiorgi import level, flat_radius, truncation_lemma_check
from .flowmap import (
    FlowSampler,
    Mollifier,
    admissibility_boundary,
    hl_maximal,
    integrate_trajectory,
    q_maximal,
)
from .grid import GridField, ball_mask, curl, gradient, linf_norm, lp_norm, magnitude
from .interp import TimeInterpolator
from .localization import (
    harmonicity_residual,
    localized_velocity,
    make_cutoff_pair,
    v_equation_residual,
)
from .lorentz import rearrange, samples_from_series, theorem_functional, write_rearrangement_csv
from .solver import (
    SolverConfig,
    peak_centered_taylor_green,
    run,
    taylor_green_init,
    write_energy_csv,
)

__all__ = ["run_experiment", "StageError", "PipelineResult"]

FLOAT_FMT = "{:.17g}"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    out_dir: Path
    manifest: dict
    failed_stage: str | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [FLOAT_FMT.format(c) if isinstance(c, float) else str(c) for c in row]
            fh.write(",".join(cells) + "\n")


def run_experiment(
    config: ExperimentConfig, out_dir: str | Path, through: str | None = None
) -> PipelineResult:
    """Execute the pipeline (optionally only through a named stage) and write
    a hashed manifest.

    Any stage failure stops the pipeline, records the failure in the partial
    manifest, and surfaces through PipelineResult.failed_stage (the CLI turns
    that into a nonzero exit status).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "config": dict(config.values),
        "seed": config.seed,
        "stages": {},
        "failure": None,
    }
    # probes is a list of tuples; normalize for JSON
    manifest["config"]["probes"] = [list(p) for p in config.values["probes"]]

    state: dict = {}
    stages = [
        ("simulate", _stage_simulate),
        ("localize", _stage_localize),
        ("maximal", _stage_maximal),
        ("select", _stage_select),
        ("degiorgi", _stage_degiorgi),
        ("report", _stage_report),
    ]
    if through is not None:
        names = [n for n, _ in stages]
        if through not in names:
            raise ValueError(f"unknown stage {through!r}")
        stages = stages[: names.index(through) + 1]
    failed = None
    for name, fn in stages:
        t0 = time.perf_counter()
        try:
            files = fn(config, out, state)
        except Exception as exc:  # noqa: BLE001 - recorded and re-surfaced
            manifest["failure"] = {"stage": name, "error": f"{type(exc).__name__}: {exc}"}
            failed = name
            break
        manifest["stages"][name] = {
            "files": {f.name: _sha256(f) for f in files},
            "seconds": round(time.perf_counter() - t0, 3),
        }
    _write_manifest(out / "manifest.json", manifest)
    return PipelineResult(out, manifest, failed)


def _write_manifest(path: Path, manifest: dict) -> None:
    # timing is wall-clock noise; hash-relevant content excludes it
    stable = {
        "config": manifest["config"],
        "seed": manifest["seed"],
        "stages": {
            k: {"files": v["files"]} for k, v in manifest["stages"].items()
        },
        "failure": manifest["failure"],
    }
    path.write_text(json.dumps(stable, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _stage_simulate(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    cfg = config.solver_config()
    u0 = taylor_green_init(cfg.grid, float(config["solver.amplitude"]))
    result = run(cfg, u0)
    state["run"] = result
    files = []
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for j, snap in enumerate(result.snapshots):
        p = snap_dir / f"snapshot_{j:04d}.vlf"
        vlf.write_field(snap.velocity, p)
        files.append(p)
    energy_path = out / "energy.csv"
    write_energy_csv(result, energy_path)
    files.append(energy_path)
    return files


def _stage_localize(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    result = state["run"]
    spec = result.config.grid
    cut = make_cutoff_pair(spec)
    state["cutoffs"] = cut
    final = result.snapshots[-1]
    trip = localized_velocity(final.velocity, cut)
    omega = curl(final.velocity)
    ref = lp_norm(omega, 1.0, ball_mask(spec, 2.0))

    files = []
    for name, fld in (("v", trip.v), ("w", trip.w), ("varpi", trip.varpi)):
        p = out / f"localized_{name}.vlf"
        vlf.write_field(fld, p)
        files.append(p)

    records = {
        "decomposition_velocity_linf": linf_norm(cut.phi * final.velocity - trip.v - trip.w),
        "decomposition_vorticity_linf": linf_norm(cut.phi * omega - curl(trip.v) - trip.varpi),
        "div_v_rel": linf_norm(_div(trip.v)) / max(linf_norm(gradient(trip.v)), 1e-300),
        "harmonicity_w_B09": harmonicity_residual(trip.w, 0.9, ref),
        "harmonicity_varpi_B09": harmonicity_residual(trip.varpi, 0.9, ref),
        "vorticity_l1_B2": ref,
        "time": final.time,
    }
    jsonl = out / "localize.jsonl"
    with open(jsonl, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(records, sort_keys=True) + "\n")
    files.append(jsonl)
    return files


def _div(f: GridField) -> GridField:
    from .grid import divergence

    return divergence(f)


def _stage_maximal(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    result = state["run"]
    snaps = result.snapshots
    kernel = Mollifier()
    state["kernel"] = kernel
    m_grad = [
        hl_maximal(magnitude(gradient(s.velocity))).with_time(s.time) for s in snaps
    ]
    state["m_grad"] = m_grad
    m_interp = TimeInterpolator(m_grad)
    state["m_interp"] = m_interp
    thresholds = config.thresholds()
    ladder = np.asarray(config["maximal.eps_ladder"], dtype=np.float64)

    rows = []
    for t, x in config.probes():
        eps_b = admissibility_boundary((t, x), snaps, kernel, m_interp, thresholds.eta0)
        mq = q_maximal(m_grad, (t, x), ladder, snaps, kernel, m_interp, thresholds)
        rows.append(
            [float(t), float(x[0]), float(x[1]), float(x[2]), eps_b, mq.value, mq.admissible_count]
        )
    path = out / "maximal.csv"
    _write_csv(
        path,
        [
            "t",
            "x",
            "y",
            "z",
            "eps_star (admissibility boundary of the skewed cylinder)",
            "MQ_value (flow-adapted maximal function of M(|grad u|))",
            "admissible_count",
        ],
        rows,
    )
    return [path]


def _stage_select(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    result = state["run"]
    snaps = result.snapshots
    kernel = state["kernel"]
    m_interp = state["m_interp"]
    m_grad = state["m_grad"]
    pc = config.pivot_config()
    thresholds = config.thresholds()

    fields_p = [GridField(f.spec, np.abs(f.data) ** pc.p, f.time_stamp) for f in m_grad]
    fields_2 = [GridField(f.spec, f.data**2, f.time_stamp) for f in m_grad]

    rows = []
    for t, x in config.probes():
        sel = epsilon_selection((t, x), snaps, kernel, m_interp, pc)
        ladder = np.array([sel.eps_star / 4, sel.eps_star / 2, sel.eps_star])
        qp = q_maximal(fields_p, (t, x), ladder, snaps, kernel, m_interp, thresholds)
        q2 = q_maximal(fields_2, (t, x), ladder, snaps, kernel, m_interp, thresholds)
        bound = max(
            (1.0 / pc.eta)
            * (pc.delta ** (-2 * pc.nu) * qp.value ** (2.0 / pc.p) + pc.delta * q2.value),
            81.0 / t**2,
        )
        rows.append(
            [
                float(t),
                float(x[0]),
                float(x[1]),
                float(x[2]),
                sel.eps_star,
                sel.case_tag,
                sel.i_value,
                bound,
            ]
        )
    path = out / "select.csv"
    _write_csv(
        path,
        [
            "t",
            "x",
            "y",
            "z",
            "eps_star (selected blow-up scale)",
            "case (1: I crosses eta, 2: capped at sqrt(t)/3)",
            "I_eps (scale-selection functional)",
            "bound_rhs (max of maximal-function bound and 81 t^-2)",
        ],
        rows,
    )
    return [path]


def _stage_degiorgi(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    spec = state["run"].config.grid
    nu = float(config["degiorgi.viscosity"])
    amp = float(config["degiorgi.amplitude"])
    t_end = float(config["degiorgi.t_end"])
    window = float(config["degiorgi.window"])
    k_max = int(config["degiorgi.k_max"])
    kernel = state.get("kernel", Mollifier())
    cut = state.get("cutoffs", make_cutoff_pair(spec))

    def localized_series(amplitude: float):
        cfg = SolverConfig(
            spec,
            viscosity=nu,
            dt=float(config["solver.dt"]) * 2,
            t_end=t_end,
            dealias=True,
            snapshot_stride=max(int(config["solver.snapshot_stride"]), 10),
        )
        r = run(cfg, peak_centered_taylor_green(spec, amplitude))
        te = r.snapshots[-1].time
        sampler = FlowSampler(r.snapshots, kernel, 2.0 * spec.h)
        traj = integrate_trajectory(sampler, te, np.zeros(3), te - window)
        frame = RescaleFrame(te, 1.0, traj, span=window)
        resc = rescale(r.snapshots, frame)
        return [localized_velocity(s.velocity, cut).v.with_time(s.time) for s in resc]

    mask_late = ball_mask(spec, flat_radius(k_max - 1))
    vs = localized_series(amp)
    if bool(config["degiorgi.calibrate"]):
        late = [v for v in vs if v.time_stamp >= -(flat_radius(k_max - 1) ** 2) - 1e-9]
        m = max(linf_norm(v, mask_late) for v in late)
        if m > 0 and abs(m - 0.99) > 0.02:
            vs = localized_series(amp * 0.99 / m)

    u_values = [degiorgi_energy(vs, k) for k in range(k_max + 1)]
    rows = []
    for k in range(k_max + 1):
        margin = float("nan")
        if 1 <= k <= 3:
            margin = truncation_lemma_check(vs, k).energy_ratio
        rows.append([k, level(k), flat_radius(k), u_values[k], margin])
    path = out / "degiorgi.csv"
    _write_csv(
        path,
        [
            "k",
            "c_k (truncation level 1 - 2^-k)",
            "r_k_flat (shrinking cylinder radius)",
            "U_k (truncation energy)",
            "beta_energy_over_9U_prev (lemma margin)",
        ],
        rows,
    )
    state["degiorgi_u"] = u_values
    return [path]


def _stage_report(config: ExperimentConfig, out: Path, state: dict) -> list[Path]:
    result = state["run"]
    n_deriv = int(config["lorentz.n"])
    q = float(config["lorentz.q"])
    t_start = float(config["lorentz.t_start"])
    slices = []
    for s in result.snapshots:
        if s.time < t_start:
            continue
        om = curl(s.velocity)
        for _ in range(n_deriv):
            om = gradient(om)
        slices.append(magnitude(om).with_time(s.time))
    if len(slices) < 2:
        raise ValueError("report stage needs at least two snapshots past lorentz.t_start")

    u0_sq = 2.0 * result.kinetic_energy[0]
    rows = []
    for c_n in config["lorentz.cn_sweep"]:
        value = theorem_functional(slices, n_deriv, q, float(c_n))
        rows.append([float(c_n), value, value / u0_sq])
    path = out / "report.csv"
    _write_csv(
        path,
        [
            "C_n (threshold constant sweep)",
            "lorentz_functional (thresholded |grad^n omega|^(4/(n+2)) in L^{1,q})",
            "ratio_to_initial_energy (functional / |u_0|_L2^2)",
        ],
        rows,
    )

    star = rearrange(samples_from_series(slices))
    star_path = out / "rearrangement.csv"
    write_rearrangement_csv(star, star_path, label="decreasing rearrangement of |grad^n omega|^(4/(n+2))")
    return [path, star_path]
