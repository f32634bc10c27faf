"""Shared fixtures: small grids, cached solver runs, and the one full verify pass."""

from __future__ import annotations

import numpy as np
import pytest

from vortexlab.grid import GridSpec
from vortexlab.solver import SolverConfig, run, taylor_green_init


@pytest.fixture(scope="session")
def spec32():
    return GridSpec.centered(32)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def tg_run_32(spec32):
    """Short Taylor-Green run shared by the diagnostics tests."""
    cfg = SolverConfig(spec32, viscosity=1.0, dt=2e-3, t_end=0.5, dealias=True, snapshot_stride=10)
    return run(cfg, taylor_green_init(spec32, 1.0))


@pytest.fixture(scope="session")
def verify_all_results():
    """One full acceptance pass per session; individual tests read their verdict."""
    from vortexlab.acceptance import verify

    return {r.criterion: r for r in verify("all", seed=0)}
