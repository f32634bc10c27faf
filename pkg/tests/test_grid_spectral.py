"""Spectral container and operator tests: transforms, calculus, projections."""

import numpy as np
import pytest

from vortexlab.grid import (
    FieldShapeError,
    GridField,
    GridSpec,
    ball_mask,
    curl,
    cross,
    dealias,
    divergence,
    gradient,
    grad_project,
    helmholtz_split,
    inverse_laplacian,
    inverse_transform,
    l2_norm,
    laplacian,
    leray_project,
    linf_norm,
    outer_product,
    parseval_l2,
    random_band_limited,
    riesz_R,
    transform,
)
from vortexlab.solver import pressure, taylor_green_init


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(3)
    with pytest.raises(ValueError):
        GridSpec(33)
    with pytest.raises(ValueError):
        GridSpec(32, -1.0)
    spec = GridSpec.centered(16, 4.0)
    assert spec.origin_offset == (-2.0, -2.0, -2.0)
    assert spec.h == pytest.approx(0.25)


def test_constant_field_spectrum(spec32):
    f = GridField(spec32, np.full((1, 32, 32, 32), 3.5))
    c = transform(f).coeffs[0]
    assert abs(c[0, 0, 0] - 3.5) < 1e-13
    c2 = c.copy()
    c2[0, 0, 0] = 0.0
    assert np.abs(c2).max() < 1e-13


def test_single_harmonic_modes(spec32):
    x, _, _ = spec32.meshgrid()
    c = transform(GridField(spec32, np.sin(x)[None])).coeffs[0]
    hot = np.argwhere(np.abs(c) > 1e-12)
    assert len(hot) == 2
    assert {tuple(h) for h in hot} == {(1, 0, 0), (31, 0, 0)}
    assert np.allclose(np.abs(c[1, 0, 0]), 0.5, atol=1e-13)


def test_round_trip_and_parseval(spec32, rng):
    f = random_band_limited(spec32, 3, 8, rng)
    g = inverse_transform(transform(f))
    assert l2_norm(g - f) / l2_norm(f) <= 1e-12
    assert abs(parseval_l2(transform(f)) - l2_norm(f)) <= 1e-12 * l2_norm(f)


def test_dimension_mismatch_errors(spec32):
    with pytest.raises(FieldShapeError):
        GridField(spec32, np.zeros((2, 32, 32, 32)))
    scalar = GridField(spec32, np.zeros((1, 32, 32, 32)))
    with pytest.raises(FieldShapeError):
        curl(scalar)
    with pytest.raises(FieldShapeError):
        riesz_R(scalar)


def test_taylor_green_divergence_and_curl(spec32):
    u = taylor_green_init(spec32, 1.0)
    assert linf_norm(divergence(u)) <= 1e-12
    x, y, z = spec32.meshgrid()
    omega3 = curl(u).data[2]
    # symbolic differentiation oracle: w3 = d(u2)/dx - d(u1)/dy = 2 sin x sin y cos z
    assert np.abs(omega3 - 2.0 * np.sin(x) * np.sin(y) * np.cos(z)).max() <= 1e-12


def test_constant_field_derivatives(spec32):
    c = GridField(spec32, np.full((3, 32, 32, 32), 1.3))
    for op in (gradient, divergence, curl, laplacian):
        assert linf_norm(op(c)) == 0.0


def test_inverse_laplacian_eigenfunction(spec32):
    x, _, _ = spec32.meshgrid()
    s = GridField(spec32, np.sin(x)[None])
    out = inverse_laplacian(s)
    assert np.abs(out.field.data[0] + np.sin(x)).max() <= 1e-12
    assert np.abs(out.discarded_mean).max() <= 1e-13


def test_inverse_laplacian_constant_contract(spec32):
    c = GridField(spec32, np.full((1, 32, 32, 32), 2.25))
    out = inverse_laplacian(c)
    assert linf_norm(out.field) <= 1e-13
    assert out.discarded_mean[0] == pytest.approx(2.25, abs=1e-13)


def test_inverse_laplacian_round_trip(spec32, rng):
    f = random_band_limited(spec32, 1, 9, rng)
    g = laplacian(inverse_laplacian(f).field)
    assert l2_norm(g - f) / l2_norm(f) <= 1e-12


def test_helmholtz_split_identities(spec32, rng):
    f = random_band_limited(spec32, 3, 7, rng, mean_zero=False)
    grad_part, curl_part = helmholtz_split(f)
    mean = f.data.reshape(3, -1).mean(axis=1)
    recon = grad_part.data + curl_part.data + mean[:, None, None, None]
    assert np.abs(recon - f.data).max() <= 1e-12 * np.abs(f.data).max()
    assert linf_norm(divergence(curl_part)) <= 1e-10 * linf_norm(f)
    assert linf_norm(curl(grad_part)) <= 1e-10 * linf_norm(f)

    # solenoidal input passes through untouched
    div_free = random_band_limited(spec32, 3, 7, rng, divergence_free=True)
    gp, cp = helmholtz_split(div_free)
    assert l2_norm(gp) <= 1e-12 * l2_norm(div_free)
    assert l2_norm(cp - div_free) <= 1e-12 * l2_norm(div_free)

    # pure gradient goes entirely to the gradient part
    x, _, _ = spec32.meshgrid()
    g = gradient(GridField(spec32, np.sin(x)[None]))
    gp, cp = helmholtz_split(g)
    assert l2_norm(cp) <= 1e-12 * l2_norm(g)
    assert l2_norm(gp - g) <= 1e-12 * l2_norm(g)


def test_projection_idempotence_on_random_fields(spec32, rng):
    f = random_band_limited(spec32, 3, 9, rng)
    p = leray_project(f)
    assert l2_norm(leray_project(p) - p) <= 1e-10 * l2_norm(f)
    assert l2_norm(grad_project(p)) <= 1e-10 * l2_norm(f)


def test_riesz_symbol_oracle(spec32, rng):
    # per-mode oracle: R = tr/2 - (k.T.k)/|k|^2 evaluated independently
    f = random_band_limited(spec32, 3, 5, rng)
    g = random_band_limited(spec32, 3, 5, rng)
    T = outer_product(f, g)
    got = transform(riesz_R(T)).coeffs[0]
    ct = transform(T).coeffs
    kx, ky, kz = spec32.wavenumbers()
    k = (kx, ky, kz)
    k2 = spec32.k_squared()
    trace = ct[0] + ct[4] + ct[8]
    ktk = sum(k[i] * k[j] * ct[3 * i + j] for i in range(3) for j in range(3))
    want = 0.5 * trace - np.divide(ktk, k2, out=np.zeros_like(ktk), where=k2 != 0)
    want[0, 0, 0] = 0.5 * trace[0, 0, 0]
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_riesz_zero_tensor(spec32):
    z = GridField(spec32, np.zeros((9, 32, 32, 32)))
    assert linf_norm(riesz_R(z)) == 0.0


def test_riesz_constant_tensor(spec32):
    # c * Id: only the mean trace survives, R = (3/2) c
    c = 0.8
    data = np.zeros((9, 32, 32, 32))
    for i in range(3):
        data[4 * i] = c
    out = riesz_R(GridField(spec32, data))
    assert np.abs(out.data[0] - 1.5 * c).max() <= 1e-13


def test_riesz_matches_recovered_pressure(spec32):
    # cross-module consistency: R(u (x) u) - |u|^2/2 equals the pressure
    u = taylor_green_init(spec32, 1.0)
    T = dealias(outer_product(u, u))
    r = riesz_R(T).data[0]
    p = pressure(u).data[0]
    half_tr = 0.5 * (T.data[0] + T.data[4] + T.data[8])
    lhs = r - half_tr
    lhs -= lhs.mean()
    rhs = p - p.mean()
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(np.abs(rhs).max(), 1e-300)


def test_vector_identities_dealiased(spec32, rng):
    # vc1 and vc3 on random band-limited fields whose products stay exact
    u = random_band_limited(spec32, 3, 4, rng)
    v = random_band_limited(spec32, 3, 4, rng)
    gu, gv = gradient(u), gradient(v)
    u_grad_v = np.stack([np.sum(u.data * gv.data[3 * i : 3 * i + 3], axis=0) for i in range(3)])
    v_grad_u = np.stack([np.sum(v.data * gu.data[3 * i : 3 * i + 3], axis=0) for i in range(3)])
    uv = GridField(spec32, np.sum(u.data * v.data, axis=0)[None])

    lhs1 = gradient(uv).data
    r1 = lhs1 - u_grad_v - v_grad_u - cross(u, curl(v)).data - cross(v, curl(u)).data
    assert np.abs(r1).max() <= 1e-8 * np.abs(lhs1).max()

    lhs3 = curl(cross(u, v)).data
    r3 = lhs3 - u.data * divergence(v).data[0] + v.data * divergence(u).data[0] - v_grad_u + u_grad_v
    assert np.abs(r3).max() <= 1e-8 * max(np.abs(lhs3).max(), 1e-300)


def test_curl_grad_and_div_curl_vanish(spec32, rng):
    f = random_band_limited(spec32, 1, 9, rng)
    F = random_band_limited(spec32, 3, 9, rng)
    assert linf_norm(curl(gradient(f))) <= 1e-10 * linf_norm(gradient(f))
    assert linf_norm(divergence(curl(F))) <= 1e-10 * linf_norm(gradient(F))


def test_ball_mask_geometry():
    spec = GridSpec.centered(32)
    m = ball_mask(spec, 1.0)
    x, y, z = spec.meshgrid()
    inside = x**2 + y**2 + z**2 <= 1.0 + 1e-12
    assert np.array_equal(m, inside)
