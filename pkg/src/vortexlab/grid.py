"""Periodic-cube field containers and exact spectral differential operators.

Fields live on a uniform n^3 grid over a cube of side L.  All calculus
(gradient, divergence, curl, Laplacian, inverse Laplacian, Helmholtz
projections, the symmetric Riesz operator) is done by Fourier multipliers,
so it is exact for band-limited data.  Fields are immutable value objects
and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Iterable, NamedTuple

import numpy as np

from ._fft import fftn, ifftn

__all__ = [
    "GridSpec",
    "GridField",
    "SpectralField",
    "FieldShapeError",
    "transform",
    "inverse_transform",
    "differential",
    "gradient",
    "divergence",
    "curl",
    "laplacian",
    "inverse_laplacian",
    "InverseLaplacian",
    "helmholtz_split",
    "leray_project",
    "grad_project",
    "riesz_R",
    "dealias",
    "dealias_mask",
    "band_mask",
    "outer_product",
    "cross",
    "magnitude",
    "ball_mask",
    "min_image_radius",
    "lp_norm",
    "l2_norm",
    "linf_norm",
    "random_band_limited",
    "parseval_l2",
]


class FieldShapeError(ValueError):
    """Raised when a field has the wrong number of components for an operation."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a periodic cube: n points per axis, side length L, origin offset.

    Grid coordinates along each axis are ``offset + i * (L / n)``.  A centered
    cube (offset = -L/2) keeps balls around the origin far from the periodic
    seam, which every localization construction here relies on.
    """

    n_points_per_axis: int
    domain_length: float = 2.0 * np.pi
    origin_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        n = self.n_points_per_axis
        if n < 4 or n % 2 != 0:
            raise ValueError(f"n_points_per_axis must be even and >= 4, got {n}")
        if not self.domain_length > 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length}")
        object.__setattr__(self, "origin_offset", tuple(float(c) for c in self.origin_offset))

    @classmethod
    def centered(cls, n: int, domain_length: float = 2.0 * np.pi) -> "GridSpec":
        L = float(domain_length)
        return cls(n, L, (-L / 2, -L / 2, -L / 2))

    @property
    def h(self) -> float:
        """Grid spacing."""
        return self.domain_length / self.n_points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def volume(self) -> float:
        return self.domain_length**3

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """1D coordinate arrays for the three axes."""
        n, h = self.n_points_per_axis, self.h
        return tuple(off + h * np.arange(n) for off in self.origin_offset)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ax, ay, az = self.axes()
        return np.meshgrid(ax, ay, az, indexing="ij")

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable kx, ky, kz arrays (integer multiples of 2*pi/L).

        The unpaired Nyquist mode is zeroed: a real field carries no usable
        derivative information there, and keeping it in odd symbols breaks
        Hermitian symmetry.  All multiplier operators share this convention,
        which is what makes their algebraic identities exact on the grid.
        """
        n = self.n_points_per_axis
        k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=self.h)
        k1[n // 2] = 0.0
        kx = k1[:, None, None]
        ky = k1[None, :, None]
        kz = k1[None, None, :]
        return kx, ky, kz

    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers()
        return kx**2 + ky**2 + kz**2


def _as_component_stack(data: np.ndarray, n: int) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 3:
        data = data[None]
    if data.ndim != 4 or data.shape[1:] != (n, n, n):
        raise FieldShapeError(f"expected data shaped (c, {n}, {n}, {n}), got {data.shape}")
    if data.shape[0] not in (1, 3, 9):
        raise FieldShapeError(f"components must be 1, 3 or 9, got {data.shape[0]}")
    return data


@dataclass(frozen=True)
class GridField:
    """Real-space sampled field on a periodic cube, 1, 3 or 9 components.

    data is component-major with axes (component, x, y, z).
    """

    spec: GridSpec
    data: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        data = _as_component_stack(self.data, self.spec.n_points_per_axis)
        if not np.all(np.isfinite(data)):
            raise ValueError("field data contains non-finite entries")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    def component(self, i: int) -> np.ndarray:
        return self.data[i]

    def with_data(self, data: np.ndarray, time_stamp: float | None = None) -> "GridField":
        t = self.time_stamp if time_stamp is None else time_stamp
        return GridField(self.spec, data, t)

    def with_time(self, time_stamp: float) -> "GridField":
        return GridField(self.spec, self.data, time_stamp)

    # Arithmetic helpers; all return new fields on the same grid.
    def __add__(self, other: "GridField") -> "GridField":
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "GridField") -> "GridField":
        return self.with_data(self.data - other.data)

    def __mul__(self, factor) -> "GridField":
        if isinstance(factor, GridField):
            if factor.components == 1:
                return self.with_data(self.data * factor.data[0])
            if self.components == 1:
                return factor.with_data(factor.data * self.data[0], self.time_stamp)
            raise FieldShapeError("pointwise product needs a scalar factor")
        return self.with_data(self.data * float(factor))

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return self.with_data(-self.data)


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients c_k of a GridField, normalized so f(x) = sum c_k e^{ikx}."""

    spec: GridSpec
    coeffs: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        n = self.spec.n_points_per_axis
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.ndim == 3:
            coeffs = coeffs[None]
        if coeffs.ndim != 4 or coeffs.shape[1:] != (n, n, n):
            raise FieldShapeError(f"expected coeffs shaped (c, {n}, {n}, {n}), got {coeffs.shape}")
        if coeffs.shape[0] not in (1, 3, 9):
            raise FieldShapeError(f"components must be 1, 3 or 9, got {coeffs.shape[0]}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("spectral coefficients contain non-finite entries")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def zero_mode(self) -> np.ndarray:
        return self.coeffs[:, 0, 0, 0].copy()


def transform(field: GridField) -> SpectralField:
    """Forward FFT; coefficients are amplitudes of e^{ikx} (zero mode = mean)."""
    n3 = field.spec.n_points_per_axis**3
    coeffs = fftn(field.data, axes=(1, 2, 3)) / n3
    return SpectralField(field.spec, coeffs, field.time_stamp)


def inverse_transform(spec_field: SpectralField) -> GridField:
    """Inverse FFT back to a real field (imaginary part discarded)."""
    n3 = spec_field.spec.n_points_per_axis**3
    data = ifftn(spec_field.coeffs * n3, axes=(1, 2, 3)).real
    return GridField(spec_field.spec, data, spec_field.time_stamp)


def _coeffs_of(field: GridField | SpectralField) -> tuple[GridSpec, np.ndarray, float]:
    if isinstance(field, SpectralField):
        return field.spec, field.coeffs, field.time_stamp
    n3 = field.spec.n_points_per_axis**3
    return field.spec, fftn(field.data, axes=(1, 2, 3)) / n3, field.time_stamp


def _to_grid(spec: GridSpec, coeffs: np.ndarray, t: float) -> GridField:
    n3 = spec.n_points_per_axis**3
    return GridField(spec, ifftn(coeffs * n3, axes=(1, 2, 3)).real, t)


def gradient(field: GridField) -> GridField:
    """Spectral gradient: scalar -> 3 components, vector -> 9-component Jacobian.

    Jacobian layout is row-major: component 3*i + j holds d(u_i)/d(x_j).
    """
    spec, c, t = _coeffs_of(field)
    kx, ky, kz = spec.wavenumbers()
    ik = (1j * kx, 1j * ky, 1j * kz)
    parts = [c[i] * ik[j] for i in range(c.shape[0]) for j in range(3)]
    return _to_grid(spec, np.stack(parts), t)


def divergence(field: GridField) -> GridField:
    """Spectral divergence: 3 -> 1; for a 9-component tensor T, (div T)_j = d_i T_ij."""
    spec, c, t = _coeffs_of(field)
    kx, ky, kz = spec.wavenumbers()
    ik = (1j * kx, 1j * ky, 1j * kz)
    if c.shape[0] == 3:
        out = c[0] * ik[0] + c[1] * ik[1] + c[2] * ik[2]
        return _to_grid(spec, out[None], t)
    if c.shape[0] == 9:
        rows = []
        for j in range(3):
            rows.append(sum(c[3 * i + j] * ik[i] for i in range(3)))
        return _to_grid(spec, np.stack(rows), t)
    raise FieldShapeError("divergence needs a 3- or 9-component field")


def curl(field: GridField) -> GridField:
    """Spectral curl of a 3-component field."""
    spec, c, t = _coeffs_of(field)
    if c.shape[0] != 3:
        raise FieldShapeError("curl needs a 3-component field")
    kx, ky, kz = spec.wavenumbers()
    ikx, iky, ikz = 1j * kx, 1j * ky, 1j * kz
    out = np.stack(
        [
            iky * c[2] - ikz * c[1],
            ikz * c[0] - ikx * c[2],
            ikx * c[1] - iky * c[0],
        ]
    )
    return _to_grid(spec, out, t)


def laplacian(field: GridField) -> GridField:
    """Spectral Laplacian, any component count."""
    spec, c, t = _coeffs_of(field)
    return _to_grid(spec, -spec.k_squared()[None] * c, t)


def differential(field: GridField, op_kind: str) -> GridField:
    """Dispatch on {gradient, divergence, curl, laplacian}."""
    ops = {
        "gradient": gradient,
        "divergence": divergence,
        "curl": curl,
        "laplacian": laplacian,
    }
    if op_kind not in ops:
        raise ValueError(f"unknown differential kind {op_kind!r}")
    return ops[op_kind](field)


class InverseLaplacian(NamedTuple):
    field: GridField
    discarded_mean: np.ndarray  # per-component zero mode removed before inversion


def inverse_laplacian(field: GridField) -> InverseLaplacian:
    """Solve Laplace(g) = f - mean(f); returns g (zero mean) and the discarded mean."""
    spec, c, t = _coeffs_of(field)
    k2 = spec.k_squared()
    inv = np.zeros_like(k2)
    nz = k2 != 0
    inv[nz] = -1.0 / k2[nz]
    out = c * inv[None]
    discarded = c[:, 0, 0, 0].real.copy()
    out[:, 0, 0, 0] = 0.0
    return InverseLaplacian(_to_grid(spec, out, t), discarded)


def _projection_coeffs(spec: GridSpec, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split coefficients of a 3-component field into (gradient part, solenoidal part).

    Both parts have zero mean; the zero mode (the constant part) belongs to neither.
    """
    if c.shape[0] != 3:
        raise FieldShapeError("Helmholtz projection needs a 3-component field")
    kx, ky, kz = spec.wavenumbers()
    k2 = spec.k_squared()
    inv = np.zeros_like(k2)
    nz = k2 != 0
    inv[nz] = 1.0 / k2[nz]
    k_dot = c[0] * kx + c[1] * ky + c[2] * kz
    grad_part = np.stack([k_dot * kx * inv, k_dot * ky * inv, k_dot * kz * inv])
    curl_part = c - grad_part
    grad_part[:, 0, 0, 0] = 0.0
    curl_part[:, 0, 0, 0] = 0.0
    return grad_part, curl_part


def helmholtz_split(field: GridField) -> tuple[GridField, GridField]:
    """(grad_part, curl_part): field = grad_part + curl_part + componentwise mean."""
    spec, c, t = _coeffs_of(field)
    g, s = _projection_coeffs(spec, c)
    return _to_grid(spec, g, t), _to_grid(spec, s, t)


def leray_project(field: GridField) -> GridField:
    """Divergence-free (solenoidal) projection, mean removed."""
    spec, c, t = _coeffs_of(field)
    _, s = _projection_coeffs(spec, c)
    return _to_grid(spec, s, t)


def grad_project(field: GridField) -> GridField:
    """Gradient-part projection, mean removed."""
    spec, c, t = _coeffs_of(field)
    g, _ = _projection_coeffs(spec, c)
    return _to_grid(spec, g, t)


def riesz_R(tensor: GridField) -> GridField:
    """Symmetric Riesz operator on a 9-component tensor: half the trace minus
    the inverse Laplacian of the double divergence.  Per mode this is
    tr(T)/2 - (k . T . k)/|k|^2; the zero mode is half the mean trace.
    """
    spec, c, t = _coeffs_of(tensor)
    if c.shape[0] != 9:
        raise FieldShapeError("riesz_R needs a 9-component tensor field")
    kx, ky, kz = spec.wavenumbers()
    k = (kx, ky, kz)
    k2 = spec.k_squared()
    inv = np.zeros_like(k2)
    nz = k2 != 0
    inv[nz] = 1.0 / k2[nz]
    trace = c[0] + c[4] + c[8]
    ktk = sum(k[i] * k[j] * c[3 * i + j] for i in range(3) for j in range(3))
    out = 0.5 * trace - ktk * inv
    out[0, 0, 0] = 0.5 * trace[0, 0, 0]
    return _to_grid(spec, out[None], t)


def band_mask(spec: GridSpec, max_mode: int) -> np.ndarray:
    """Boolean mask keeping integer axis modes with |m| <= max_mode."""
    n = spec.n_points_per_axis
    m1 = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    keep = m1 <= max_mode + 1e-9
    return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]


def dealias_mask(spec: GridSpec) -> np.ndarray:
    """Boolean 2/3-rule mask keeping axis modes with |m| <= floor(n/3)."""
    return band_mask(spec, int(np.floor(spec.n_points_per_axis / 3)))


def dealias(field: GridField) -> GridField:
    """Apply the 2/3-rule mask to a field."""
    spec, c, t = _coeffs_of(field)
    return _to_grid(spec, c * dealias_mask(spec)[None], t)


def outer_product(u: GridField, v: GridField) -> GridField:
    """Pointwise tensor product of two 3-component fields, 9 components (u_i v_j)."""
    if u.components != 3 or v.components != 3:
        raise FieldShapeError("outer_product needs 3-component fields")
    parts = [u.data[i] * v.data[j] for i in range(3) for j in range(3)]
    return GridField(u.spec, np.stack(parts), u.time_stamp)


def cross(u: GridField, v: GridField) -> GridField:
    """Pointwise cross product of two 3-component fields."""
    if u.components != 3 or v.components != 3:
        raise FieldShapeError("cross needs 3-component fields")
    a, b = u.data, v.data
    out = np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )
    return GridField(u.spec, out, u.time_stamp)


def magnitude(field: GridField) -> GridField:
    """Pointwise Euclidean magnitude across components, scalar output."""
    return GridField(field.spec, np.sqrt(np.sum(field.data**2, axis=0))[None], field.time_stamp)


def min_image_radius(spec: GridSpec, center: Iterable[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Distance to `center` under the minimum-image convention, shape (n, n, n)."""
    L = spec.domain_length
    xs, ys, zs = spec.axes()
    cx, cy, cz = center
    dx = xs - cx
    dx -= L * np.round(dx / L)
    dy = ys - cy
    dy -= L * np.round(dy / L)
    dz = zs - cz
    dz -= L * np.round(dz / L)
    return np.sqrt(dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2)


def ball_mask(spec: GridSpec, radius: float, center: Iterable[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Boolean mask of grid cells whose centers lie in the ball of given radius."""
    return min_image_radius(spec, center) <= radius


def lp_norm(field: GridField, p: float, mask: np.ndarray | None = None) -> float:
    """Discrete L^p norm over the cube (or a masked region), cell-volume weighted."""
    mag = np.sqrt(np.sum(field.data**2, axis=0))
    if mask is not None:
        mag = mag[mask]
    w = field.spec.cell_volume
    if np.isinf(p):
        return float(mag.max()) if mag.size else 0.0
    return float((np.sum(mag**p) * w) ** (1.0 / p))


def l2_norm(field: GridField, mask: np.ndarray | None = None) -> float:
    return lp_norm(field, 2.0, mask)


def linf_norm(field: GridField, mask: np.ndarray | None = None) -> float:
    return lp_norm(field, np.inf, mask)


def parseval_l2(spec_field: SpectralField) -> float:
    """L^2 norm evaluated from Fourier coefficients (equals the grid L^2 norm)."""
    return float(np.sqrt(spec_field.spec.volume * np.sum(np.abs(spec_field.coeffs) ** 2)))


def _hermitianize(coeffs: np.ndarray) -> np.ndarray:
    """Project complex mode amplitudes onto Hermitian symmetry (real inverse)."""
    rev = coeffs[:, ::-1, ::-1, ::-1]
    rev = np.roll(rev, 1, axis=(1, 2, 3))
    return 0.5 * (coeffs + np.conj(rev))


def random_band_limited(
    spec: GridSpec,
    components: int,
    max_mode: int,
    rng: np.random.Generator,
    divergence_free: bool = False,
    mean_zero: bool = True,
) -> GridField:
    """Random real field with integer modes bounded by max_mode along each axis.

    Low max_mode keeps pointwise products exactly representable on the grid,
    which is what the identity suites rely on.
    """
    n = spec.n_points_per_axis
    if max_mode >= n // 2:
        raise ValueError("max_mode must be below the Nyquist mode")
    c = np.zeros((components, n, n, n), dtype=np.complex128)
    m = 2 * max_mode + 1
    block = rng.standard_normal((components, m, m, m)) + 1j * rng.standard_normal((components, m, m, m))
    idx = np.arange(-max_mode, max_mode + 1) % n
    c[np.ix_(range(components), idx, idx, idx)] = block
    c = _hermitianize(c)
    if mean_zero:
        c[:, 0, 0, 0] = 0.0
    if divergence_free:
        if components != 3:
            raise FieldShapeError("divergence_free requires 3 components")
        _, c = _projection_coeffs(spec, c)
    return _to_grid(spec, c, 0.0)
