"""Periodic fields on the square torus [0, 2pi)^2 with spectral calculus.

Grid arrays are indexed ``values[ix, iy]`` with ``x = ix*h`` and ``y = iy*h``.
Fourier coefficients use the normalisation

    coeffs[k] = (1/n^2) * sum_x values(x) * exp(-i k.x)

so that a band-limited field equals ``sum_k coeffs[k] exp(i k.x)`` exactly and
single Fourier modes have unit-scale coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DOMAIN_MEASURE = 4.0 * np.pi**2

MEAN_TOL = 1e-10
SYMMETRY_TOL = 1e-8


class FieldError(ValueError):
    """Base class for invalid field operations."""


class DimensionError(FieldError):
    pass


class ConsistencyError(FieldError):
    pass


class MeanViolationError(FieldError):
    def __init__(self, mean: float, tol: float = MEAN_TOL):
        super().__init__(f"field mean {mean:.3e} exceeds zero-mean tolerance {tol:.0e}")
        self.mean = mean


@lru_cache(maxsize=None)
def _wavenumbers(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.fft.fftfreq(n, d=1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    kx.setflags(write=False)
    ky.setflags(write=False)
    return kx, ky


@lru_cache(maxsize=None)
def _dealias_mask(n: int) -> np.ndarray:
    kx, ky = _wavenumbers(n)
    mask = np.maximum(np.abs(kx), np.abs(ky)) <= n / 3.0
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n grid on the 2pi-periodic square."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise DimensionError(f"grid size must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise DimensionError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def cell_measure(self) -> float:
        return self.h**2

    @property
    def domain_measure(self) -> float:
        return DOMAIN_MEASURE

    @property
    def kx(self) -> np.ndarray:
        return _wavenumbers(self.n)[0]

    @property
    def ky(self) -> np.ndarray:
        return _wavenumbers(self.n)[1]

    @property
    def k2(self) -> np.ndarray:
        kx, ky = _wavenumbers(self.n)
        return kx**2 + ky**2

    @property
    def dealias_mask(self) -> np.ndarray:
        return _dealias_mask(self.n)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def centered_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the same samples mapped into [-pi, pi)^2."""
        x = np.arange(self.n) * self.h
        x = np.where(x >= np.pi, x - 2.0 * np.pi, x)
        return np.meshgrid(x, x, indexing="ij")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar field held as grid samples and Fourier coefficients."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, grid: GridSpec, values) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n, grid.n):
            raise DimensionError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        coeffs = np.fft.fft2(values) / grid.n**2
        return cls(grid, _readonly(values), _readonly(coeffs))

    @classmethod
    def from_coeffs(cls, grid: GridSpec, coeffs, check: bool = True) -> "SpectralField":
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (grid.n, grid.n):
            raise DimensionError(f"expected shape {(grid.n, grid.n)}, got {coeffs.shape}")
        values = to_physical(coeffs, check=check)
        # store the coefficients of the real part so both views stay consistent
        return cls(grid, _readonly(values), _readonly(np.fft.fft2(values) / grid.n**2))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        z = np.zeros((grid.n, grid.n))
        return cls(grid, _readonly(z), _readonly(z.astype(complex)))

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def _check_grid(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise DimensionError(f"grid mismatch: n={self.grid.n} vs n={other.grid.n}")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check_grid(other)
            return SpectralField.from_values(self.grid, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check_grid(other)
            return SpectralField.from_values(self.grid, self.values - other.values)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return SpectralField.from_values(self.grid, self.values * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Two-component velocity on the torus."""

    grid: GridSpec
    u_x: SpectralField
    u_y: SpectralField

    @classmethod
    def from_values(cls, grid: GridSpec, ux, uy) -> "VelocityField":
        return cls(grid, SpectralField.from_values(grid, ux), SpectralField.from_values(grid, uy))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VelocityField":
        z = SpectralField.zeros(grid)
        return cls(grid, z, z)

    @property
    def components(self) -> tuple[SpectralField, SpectralField]:
        return self.u_x, self.u_y

    def max_speed(self) -> float:
        return float(np.sqrt(self.u_x.values**2 + self.u_y.values**2).max())

    def __add__(self, other):
        if isinstance(other, VelocityField):
            return VelocityField(self.grid, self.u_x + other.u_x, self.u_y + other.u_y)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, VelocityField):
            return VelocityField(self.grid, self.u_x - other.u_x, self.u_y - other.u_y)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return VelocityField(self.grid, self.u_x * scalar, self.u_y * scalar)
        return NotImplemented

    __rmul__ = __mul__


def _grid_for(values: np.ndarray) -> GridSpec:
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionError(f"expected a square 2D array, got shape {values.shape}")
    return GridSpec(int(values.shape[0]))


def to_spectral(values) -> SpectralField:
    values = np.asarray(values, dtype=float)
    return SpectralField.from_values(_grid_for(values), values)


def conjugate_partner(coeffs: np.ndarray) -> np.ndarray:
    """Return conj(c[-k]) laid out at index k."""
    return np.conj(np.roll(np.flip(coeffs, axis=(0, 1)), 1, axis=(0, 1)))


def to_physical(coeffs, check: bool = True) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=complex)
    n = _grid_for(coeffs).n
    if check:
        scale = max(1.0, float(np.abs(coeffs).max(initial=0.0)))
        defect = float(np.abs(coeffs - conjugate_partner(coeffs)).max(initial=0.0))
        if defect > SYMMETRY_TOL * scale:
            raise ConsistencyError(f"coefficients violate conjugate symmetry by {defect:.3e}")
    return np.fft.ifft2(coeffs).real * n**2


def derivative_multiplier(grid: GridSpec, axis: str, order: int) -> np.ndarray:
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if not 1 <= order <= 4:
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    k = grid.kx if axis == "x" else grid.ky
    mult = (1j * k) ** order
    if order % 2:
        mult = np.where(np.abs(k) == grid.n // 2, 0.0, mult)
    return mult


def derivative(f: SpectralField, axis: str, order: int = 1) -> SpectralField:
    """Spectral derivative; the Nyquist line is dropped for odd orders."""
    mult = derivative_multiplier(f.grid, axis, order)
    return SpectralField.from_coeffs(f.grid, f.coeffs * mult, check=False)


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField.from_coeffs(f.grid, -f.grid.k2 * f.coeffs, check=False)


def gradient(f: SpectralField) -> VelocityField:
    return VelocityField(f.grid, derivative(f, "x"), derivative(f, "y"))


def check_zero_mean(f: SpectralField, tol: float = MEAN_TOL):
    if abs(f.mean) > tol:
        raise MeanViolationError(f.mean, tol)


def inverse_laplacian_coeffs(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    k2 = grid.k2.copy()
    k2[0, 0] = 1.0
    out = -coeffs / k2
    out[0, 0] = 0.0
    return out


def invert_laplacian(f: SpectralField) -> SpectralField:
    check_zero_mean(f)
    return SpectralField.from_coeffs(f.grid, inverse_laplacian_coeffs(f.coeffs, f.grid), check=False)


def biot_savart_coeffs(w_hat: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Velocity coefficients (-d_y psi, d_x psi) with psi the inverse Laplacian of w."""
    psi = inverse_laplacian_coeffs(w_hat, grid)
    ux = -derivative_multiplier(grid, "y", 1) * psi
    uy = derivative_multiplier(grid, "x", 1) * psi
    return ux, uy


def biot_savart(omega: SpectralField) -> VelocityField:
    check_zero_mean(omega)
    ux, uy = biot_savart_coeffs(omega.coeffs, omega.grid)
    g = omega.grid
    return VelocityField(g, SpectralField.from_coeffs(g, ux, check=False),
                         SpectralField.from_coeffs(g, uy, check=False))


def curl(v: VelocityField) -> SpectralField:
    g = v.grid
    c = (derivative_multiplier(g, "x", 1) * v.u_y.coeffs
         - derivative_multiplier(g, "y", 1) * v.u_x.coeffs)
    return SpectralField.from_coeffs(g, c, check=False)


def divergence(v: VelocityField) -> SpectralField:
    g = v.grid
    c = (derivative_multiplier(g, "x", 1) * v.u_x.coeffs
         + derivative_multiplier(g, "y", 1) * v.u_y.coeffs)
    return SpectralField.from_coeffs(g, c, check=False)


def spectral_divergence_max(v: VelocityField) -> float:
    """max_k |ik.u(k)| with the same Nyquist convention as ``derivative``."""
    g = v.grid
    c = (derivative_multiplier(g, "x", 1) * v.u_x.coeffs
         + derivative_multiplier(g, "y", 1) * v.u_y.coeffs)
    return float(np.abs(c).max())


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField.from_coeffs(f.grid, f.coeffs * f.grid.dealias_mask, check=False)


def inner_product_l2(f, g) -> float:
    """Grid quadrature h^2 * sum f.g, exact for band-limited fields."""
    if isinstance(f, VelocityField) and isinstance(g, VelocityField):
        return inner_product_l2(f.u_x, g.u_x) + inner_product_l2(f.u_y, g.u_y)
    if isinstance(f, SpectralField) and isinstance(g, SpectralField):
        if f.grid != g.grid:
            raise DimensionError(f"grid mismatch: n={f.grid.n} vs n={g.grid.n}")
        return float(f.grid.cell_measure * np.sum(f.values * g.values))
    raise TypeError("inner product needs two SpectralFields or two VelocityFields")


def l2_norm(f) -> float:
    return float(np.sqrt(max(inner_product_l2(f, f), 0.0)))


def l1_norm(f: SpectralField) -> float:
    return float(f.grid.cell_measure * np.abs(f.values).sum())


def sobolev_norm(f: SpectralField, sigma: float) -> float:
    """Inhomogeneous H^sigma norm with weights (1 + |k|^2)^sigma."""
    w = (1.0 + f.grid.k2) ** sigma
    return float(np.sqrt(DOMAIN_MEASURE * np.sum(w * np.abs(f.coeffs) ** 2)))
