"""Rearrangement and Lorentz norm tests, including hypothesis property checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vortexlab.grid import GridField, GridSpec
from vortexlab.lorentz import (
    LorentzIndex,
    RearrangedFunction,
    WeightedSamples,
    interpolation_check,
    lorentz_norm,
    rearrange,
    samples_from_series,
    theorem_functional,
)

finite_vals = st.floats(0.0, 50.0, allow_nan=False, allow_infinity=False)
pos_weights = st.floats(0.01, 5.0, allow_nan=False, allow_infinity=False)


def test_sorting_example():
    r = rearrange(WeightedSamples([3, 1, 2], [1, 1, 1]))
    assert np.allclose(r.levels, [3, 2, 1])
    assert np.allclose(r.cut_points, [1, 2, 3])


def test_constant_single_step():
    r = rearrange(WeightedSamples(np.full(7, 2.5), np.full(7, 0.3)))
    assert r.levels.shape == (1,)
    assert r.levels[0] == 2.5
    assert r.cut_points[0] == pytest.approx(2.1)


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        WeightedSamples([1.0], [-1.0])
    with pytest.raises(ValueError):
        WeightedSamples([-1.0], [1.0])


@settings(max_examples=60, deadline=None)
@given(
    vals=hnp.arrays(np.float64, st.integers(1, 60), elements=finite_vals),
    weights=hnp.arrays(np.float64, st.integers(1, 60), elements=pos_weights),
    alphas=st.lists(st.floats(0.0, 60.0, allow_nan=False), min_size=1, max_size=10),
)
def test_rearrangement_equimeasurable(vals, weights, alphas):
    # brute-force distribution-function oracle
    m = min(len(vals), len(weights))
    vals, weights = vals[:m], weights[:m]
    s = WeightedSamples(vals, weights)
    r = rearrange(s)
    assert r.total_measure == pytest.approx(s.total_measure, rel=1e-12)
    for a in alphas:
        brute = float(np.sum(weights[vals > a]))
        assert r.measure_above(a) == pytest.approx(brute, abs=1e-12 * (1 + brute))


def test_rearrangement_monotone(rng):
    f = rng.random(300)
    g = f + rng.random(300) * 0.5
    w = rng.random(300) + 0.2
    rf, rg = rearrange(WeightedSamples(f, w)), rearrange(WeightedSamples(g, w))
    lam = np.linspace(1e-6, rf.total_measure * 0.999, 100)
    assert np.all(rf(lam) <= rg(lam) + 1e-12)


def test_indicator_norm_closed_form_vs_quadrature(rng):
    # independent oracle: adaptive quadrature of t^{q/p - 1} over (0, m]
    # (handles the integrable endpoint singularity when q < p)
    from scipy.integrate import quad as sciquad

    for _ in range(20):
        p, q, m = rng.uniform(0.6, 4), rng.uniform(0.6, 4), rng.uniform(0.2, 4)
        cells = rng.integers(1, 40)
        samples = WeightedSamples(np.ones(cells), np.full(cells, m / cells))
        got = lorentz_norm(samples, LorentzIndex(p, q))
        integral, _err = sciquad(lambda t: t ** (q / p - 1.0), 0.0, m)
        quad_oracle = integral ** (1.0 / q)
        closed = (p / q) ** (1.0 / q) * m ** (1.0 / p)
        assert abs(quad_oracle - closed) <= 1e-8 * closed
        assert got == pytest.approx(closed, rel=1e-12)
        assert lorentz_norm(samples, LorentzIndex(p, np.inf)) == pytest.approx(
            m ** (1.0 / p), rel=1e-12
        )


def test_zero_function():
    s = WeightedSamples(np.zeros(5), np.ones(5))
    assert lorentz_norm(s, LorentzIndex(2, 2)) == 0.0


@settings(max_examples=40, deadline=None)
@given(
    vals=hnp.arrays(np.float64, st.integers(2, 80), elements=finite_vals),
    p=st.floats(0.6, 4.0),
)
def test_lpp_equals_lp(vals, p):
    w = np.full(vals.size, 0.37)
    got = lorentz_norm(WeightedSamples(vals, w), LorentzIndex(p, p))
    want = float(np.sum(w * vals**p) ** (1.0 / p))
    assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(
    vals=hnp.arrays(np.float64, st.integers(1, 60), elements=finite_vals),
    c=st.floats(0.0, 7.0),
    p=st.floats(0.7, 3.0),
    q=st.floats(0.7, 3.0),
)
def test_positive_homogeneity(vals, c, p, q):
    w = np.full(vals.size, 1.1)
    idx = LorentzIndex(p, q)
    base = lorentz_norm(WeightedSamples(vals, w), idx)
    scaled = lorentz_norm(WeightedSamples(c * vals, w), idx)
    assert scaled == pytest.approx(c * base, rel=1e-12, abs=1e-12)


def test_weak_norm_dominated_by_strong(rng):
    # |f|_{p,inf} <= (q/p)^{1/q} |f|_{p,q}, the indicator-calibrated constant
    for _ in range(50):
        vals = rng.random(200) * rng.uniform(0.5, 10)
        w = rng.random(200) + 0.1
        p, q = rng.uniform(0.7, 3), rng.uniform(0.7, 3)
        s = WeightedSamples(vals, w)
        weak = lorentz_norm(s, LorentzIndex(p, np.inf))
        strong = lorentz_norm(s, LorentzIndex(p, q))
        assert weak <= (q / p) ** (1.0 / q) * strong * (1 + 1e-12)


class TestInterpolation:
    def test_amgm_equality_case(self):
        one = WeightedSamples([1.0], [1.0])
        rep = interpolation_check(
            one, one, one, 1.0, LorentzIndex(2, 2), LorentzIndex(2, 2), np.array([0.5, 1, 2])
        )
        assert rep.hypothesis_satisfied
        assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)

    def test_geometric_mean_instance(self, rng):
        f0 = rng.random(50) + 0.05
        f1 = rng.random(50) + 0.05
        w = rng.random(50) + 0.2
        f = np.sqrt(f0 * f1)  # nu = 1: hypothesis holds with equality at the optimum
        rep = interpolation_check(
            WeightedSamples(f, w),
            WeightedSamples(f0, w),
            WeightedSamples(f1, w),
            1.0,
            LorentzIndex(1.5, 2.0),
            LorentzIndex(3.0, 1.0),
            np.array([0.3, 1.0, 3.0]),
        )
        assert rep.hypothesis_satisfied
        assert rep.lhs <= rep.rhs * (1 + 1e-10)

    def test_zero_f1(self, rng):
        z = WeightedSamples(np.zeros(4), np.ones(4))
        f0 = WeightedSamples(rng.random(4) + 0.1, np.ones(4))
        rep = interpolation_check(
            z, f0, z, 0.7, LorentzIndex(2, 2), LorentzIndex(3, 1), np.array([1.0])
        )
        assert rep.hypothesis_satisfied and rep.lhs == 0.0

    def test_grid_mismatch_rejected(self):
        a = WeightedSamples([1.0, 2.0], [1.0, 1.0])
        b = WeightedSamples([1.0], [1.0])
        with pytest.raises(ValueError):
            interpolation_check(
                a, a, b, 1.0, LorentzIndex(2, 2), LorentzIndex(2, 2), np.array([1.0])
            )


class TestTheoremFunctional:
    def _series(self, spec, values, times):
        return [GridField(spec, np.full((1,) + (spec.n_points_per_axis,) * 3, v), t)
                for v, t in zip(values, times)]

    def test_zero_vorticity(self):
        spec = GridSpec.centered(8)
        fields = self._series(spec, [0.0, 0.0, 0.0], [0.1, 0.2, 0.3])
        assert theorem_functional(fields, 1, 2.0, 1.0) == 0.0

    def test_infinite_threshold_surrogate(self):
        spec = GridSpec.centered(8)
        fields = self._series(spec, [2.0, 3.0, 1.0], [0.1, 0.2, 0.3])
        assert theorem_functional(fields, 1, 2.0, np.inf) == 0.0

    def test_nonpositive_time_rejected(self):
        spec = GridSpec.centered(8)
        fields = self._series(spec, [1.0, 1.0], [0.0, 0.1])
        with pytest.raises(ValueError):
            theorem_functional(fields, 1, 2.0, 1.0)

    def test_constant_slab_closed_form(self):
        # constant g on the box over [t0, t1], threshold never active:
        # the functional reduces to the L^{1,q} norm of an indicator-like block
        spec = GridSpec.centered(8)
        g = 2.0
        n_deriv = 2  # exponent 4/(n+2) = 1
        fields = self._series(spec, [g, g, g], [1.0, 1.1, 1.2])
        got = theorem_functional(fields, n_deriv, 2.0, 1e-9)
        measure = spec.volume * 0.2
        want = (1.0 / 2.0) ** (1.0 / 2.0) * measure * g  # (p/q)^{1/q} m^{1/p} * level
        assert got == pytest.approx(want, rel=1e-12)

    def test_samples_from_series_weights(self):
        spec = GridSpec.centered(8)
        fields = self._series(spec, [1.0, 1.0, 1.0], [0.0, 0.1, 0.3])
        s = samples_from_series(fields)
        assert s.total_measure == pytest.approx(spec.volume * 0.3, rel=1e-12)
