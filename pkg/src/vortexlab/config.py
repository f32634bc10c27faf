"""Experiment configuration: flat `section.key = value` text files.

The format is deliberately diff-friendly: one dotted key per line, `#`
comments, booleans as true/false, lists comma-separated, probe points as
semicolon-separated quadruples t x y z.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .grid import GridSpec
from .solver import SolverConfig
from .flowmap import AdmissibilityThresholds
from .blowup import PivotConfig

__all__ = ["ExperimentConfig", "ConfigError", "parse_config_text", "format_config"]


class ConfigError(ValueError):
    pass


_DEFAULTS: dict[str, object] = {
    "solver.n": 32,
    "solver.domain_scale": 1.0,
    "solver.viscosity": 1.0,
    "solver.dt": 2e-3,
    "solver.t_end": 0.5,
    "solver.dealias": True,
    "solver.snapshot_stride": 10,
    "solver.amplitude": 2.0,
    "thresholds.eta0": 0.05,
    "thresholds.eta1": 0.05,
    "thresholds.eta2": 0.05,
    "thresholds.eta3": 0.05,
    "pivot.p": 1.9,
    "pivot.nu": "auto",
    "pivot.delta": 0.5,
    "pivot.eta": 0.002,
    "lorentz.n": 1,
    "lorentz.q": 2.0,
    "lorentz.cn_sweep": [0.05, 0.1, 0.25, 0.5, 1.0],
    "lorentz.t_start": 0.1,
    "probes": [(0.45, 0.7, 0.3, -0.2), (0.4, -0.5, 0.8, 0.1)],
    "maximal.eps_ladder": [0.05, 0.1, 0.2],
    "degiorgi.viscosity": 0.02,
    "degiorgi.amplitude": 1.8,
    "degiorgi.t_end": 1.3,
    "degiorgi.window": 1.1,
    "degiorgi.k_max": 7,
    "degiorgi.calibrate": True,
    "seed": 0,
}


def _parse_value(key: str, raw: str):
    default = _DEFAULTS[key]
    raw = raw.strip()
    if key == "probes":
        pts = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != 4:
                raise ConfigError(f"probe needs 4 numbers (t x y z), got {chunk!r}")
            pts.append(tuple(vals))
        return pts
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, list):
        return [float(v) for v in raw.replace(",", " ").split()]
    if key == "pivot.nu":
        return "auto" if raw.lower() == "auto" else float(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    values = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def format_config(values: dict) -> str:
    lines = ["# vortexlab experiment configuration"]
    for key in _DEFAULTS:
        v = values.get(key, _DEFAULTS[key])
        if key == "probes":
            rendered = " ; ".join(" ".join(f"{c:.17g}" for c in p) for p in v)
        elif isinstance(v, bool):
            rendered = "true" if v else "false"
        elif isinstance(v, list):
            rendered = ", ".join(f"{c:.17g}" for c in v)
        elif isinstance(v, float):
            rendered = f"{v:.17g}"
        else:
            rendered = str(v)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view over the flat key space, with constructors for the sub-configs."""

    values: dict

    @classmethod
    def default(cls, **overrides) -> "ExperimentConfig":
        vals = dict(_DEFAULTS)
        for k, v in overrides.items():
            if k not in _DEFAULTS:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = v
        return cls(vals)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls(parse_config_text(Path(path).read_text(encoding="utf-8")))

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(format_config(self.values), encoding="utf-8")

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def with_seed(self, seed: int) -> "ExperimentConfig":
        vals = dict(self.values)
        vals["seed"] = int(seed)
        return ExperimentConfig(vals)

    def grid_spec(self) -> GridSpec:
        return GridSpec.centered(
            int(self["solver.n"]), 2.0 * np.pi * float(self["solver.domain_scale"])
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            grid=self.grid_spec(),
            viscosity=float(self["solver.viscosity"]),
            dt=float(self["solver.dt"]),
            t_end=float(self["solver.t_end"]),
            dealias=bool(self["solver.dealias"]),
            snapshot_stride=int(self["solver.snapshot_stride"]),
        )

    def thresholds(self) -> AdmissibilityThresholds:
        return AdmissibilityThresholds(
            eta0=float(self["thresholds.eta0"]),
            eta1=float(self["thresholds.eta1"]),
            eta2=float(self["thresholds.eta2"]),
            eta3=float(self["thresholds.eta3"]),
        )

    def pivot_config(self) -> PivotConfig:
        nu = self["pivot.nu"]
        return PivotConfig(
            p=float(self["pivot.p"]),
            nu=None if nu == "auto" else float(nu),
            delta=float(self["pivot.delta"]),
            eta=float(self["pivot.eta"]),
        )

    def probes(self) -> list[tuple[float, np.ndarray]]:
        return [(float(p[0]), np.array(p[1:], dtype=np.float64)) for p in self["probes"]]
