"""Initial data, forcings and exact reference solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .field import (
    DOMAIN_MEASURE,
    GridSpec,
    SpectralField,
    VelocityField,
    biot_savart,
    conjugate_partner,
    curl,
    derivative,
    laplacian,
)


class ScenarioError(ValueError):
    pass


class ResolutionError(ScenarioError):
    def __init__(self, nu: float, n: int, required: int):
        super().__init__(f"n={n} does not resolve nu={nu:g}; need n >= {required}")
        self.required_n = required


# per-kind parameter names and defaults
SCENARIO_PARAMS: dict[str, dict[str, Any]] = {
    "zero": {},
    "taylor_green": {"amplitude": 1.0},
    "counterexample": {},
    "random_smooth": {"seed": 0, "slope": 1.0, "k_max": 4, "amplitude": 1.0},
    "lp_family": {"p": 2.0, "amplitude": 1.0, "seed": 0},
    "lorentz_family": {"q": 2.0, "amplitude": 1.0, "seed": 0},
    "llogl_family": {"alpha": 1.0, "amplitude": 1.0, "seed": 0},
}

FORCING_PARAMS: dict[str, dict[str, Any]] = {
    "zero": {},
    "taylor_green": {"amplitude": 1.0},
    "random_smooth": {"seed": 1, "slope": 1.0, "k_max": 4, "amplitude": 1.0},
    "counterexample": {},
}

_INT_PARAMS = {"seed", "k_max"}


def _coerce_params(kind: str, params: dict, table: dict[str, dict[str, Any]], what: str) -> dict:
    if kind not in table:
        raise ScenarioError(f"unknown {what} kind {kind!r}; expected one of {sorted(table)}")
    allowed = table[kind]
    unknown = set(params) - set(allowed)
    if unknown:
        raise ScenarioError(f"{what} kind {kind!r} does not accept {sorted(unknown)}")
    out = dict(allowed)
    for key, value in params.items():
        out[key] = int(value) if key in _INT_PARAMS else float(value)
    return out


@dataclass(frozen=True)
class ScenarioRef:
    kind: str
    params: dict = field(default_factory=dict)

    def resolved(self, table=SCENARIO_PARAMS, what="scenario") -> dict:
        return _coerce_params(self.kind, self.params, table, what)


# --- Taylor-Green ---------------------------------------------------------


@dataclass(frozen=True)
class TaylorGreen:
    velocity: VelocityField
    vorticity: SpectralField
    energy: float
    enstrophy: float


def taylor_green(grid: GridSpec, nu: float, t: float, amplitude: float = 1.0) -> TaylorGreen:
    X, Y = grid.coordinates()
    a = amplitude * math.exp(-2.0 * nu * t)
    u = VelocityField.from_values(grid, a * np.sin(X) * np.cos(Y), -a * np.cos(X) * np.sin(Y))
    w = SpectralField.from_values(grid, 2.0 * a * np.sin(X) * np.sin(Y))
    return TaylorGreen(u, w, energy=math.pi**2 * a**2, enstrophy=4.0 * math.pi**2 * a**2)


def taylor_green_energy(nu: float, t, amplitude: float = 1.0):
    return math.pi**2 * amplitude**2 * np.exp(-4.0 * nu * np.asarray(t, dtype=float))


# --- smooth bumps and the oscillating vortex family ----------------------


def unit_bump(z, steepness: float = 1.0):
    """exp(a - a/(1 - z^2)) on |z| < 1, zero outside; peak value 1 at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(steepness - steepness / (1.0 - z[inside] ** 2))
    return out


def unit_bump_derivative(z, steepness: float = 1.0):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = (np.exp(steepness - steepness / (1.0 - zi**2))
                   * (-2.0 * steepness * zi / (1.0 - zi**2) ** 2))
    return out


SUPPORT = (0.5, 1.0)
_MID = 0.5 * (SUPPORT[0] + SUPPORT[1])
_HALF = 0.5 * (SUPPORT[1] - SUPPORT[0])

# The radial envelope is a steeper member of the bump family: its Fourier tail
# decays fast enough that the vortex is spectrally resolved at moderate n.
# a = 1 decays like exp(-0.7 sqrt(k)) and leaves O(1e-1) vorticity residuals at n = 256.
ENVELOPE_STEEPNESS = 8.0


def bump_on_support(r, steepness: float = 1.0):
    """Smooth bump supported on [1/2, 1] with maximum 1 at 3/4."""
    return unit_bump((np.asarray(r, dtype=float) - _MID) / _HALF, steepness)


def bump_on_support_derivative(r, steepness: float = 1.0):
    return unit_bump_derivative((np.asarray(r, dtype=float) - _MID) / _HALF, steepness) / _HALF


def envelope(r):
    """Radial cut-off phi of the oscillating vortex."""
    return bump_on_support(r, ENVELOPE_STEEPNESS)


def switch_on(t):
    """Temporal profile gamma with gamma(0) = 0 and max gamma = gamma(3/4) = 1."""
    return bump_on_support(t)


def switch_on_derivative(t):
    return bump_on_support_derivative(t)


def required_resolution(nu: float) -> int:
    n = math.ceil(16.0 * nu ** (-1.0 / 3.0) - 1e-9)
    return n + (n % 2)


def check_resolution(grid: GridSpec, nu: float):
    need = required_resolution(nu)
    if grid.n < need:
        raise ResolutionError(nu, grid.n, need)


_STREAM_NODES = 96


def oscillating_vortex_stream(grid: GridSpec, nu: float) -> SpectralField:
    """Radial stream function psi(r) = int_{1/2}^{r} sin(s/nu^(1/3)) phi(s)/s ds.

    psi vanishes inside the support and is constant beyond it, so the periodic
    extension is smooth and x^perp/|x|^2 sin(|x|/nu^(1/3)) phi(|x|) = perp-grad psi.
    """
    if nu <= 0:
        raise ScenarioError("oscillating vortex needs nu > 0")
    X, Y = grid.centered_coordinates()
    r = np.hypot(X, Y)
    k = nu ** (-1.0 / 3.0)
    x, w = np.polynomial.legendre.leggauss(_STREAM_NODES)

    def radial_integral(upper):
        half = 0.5 * (upper - SUPPORT[0])
        s = SUPPORT[0] + half[:, None] * (x[None, :] + 1.0)
        return half * np.sum(w * np.sin(s * k) * envelope(s) / s, axis=1)

    psi = np.zeros_like(r)
    inside = (r > SUPPORT[0]) & (r < SUPPORT[1])
    psi[inside] = radial_integral(r[inside])
    psi[r >= SUPPORT[1]] = radial_integral(np.array([SUPPORT[1]]))[0]
    return SpectralField.from_values(grid, psi)


def oscillating_vortex_profile(grid: GridSpec, nu: float) -> VelocityField:
    """Stationary Euler field x^perp/|x|^2 sin(|x|/nu^(1/3)) phi(|x|) on [-pi, pi)^2.

    Built as the spectral perp-gradient of its stream function, so it is
    divergence-free to round-off at any resolution; the singular point x = 0
    lies in the region where psi is identically zero.
    """
    psi = oscillating_vortex_stream(grid, nu)
    return VelocityField(grid, -derivative(psi, "y"), derivative(psi, "x"))


def oscillating_vortex_samples(grid: GridSpec, nu: float) -> VelocityField:
    """The same field by direct point evaluation (reference for the stream-function build)."""
    X, Y = grid.centered_coordinates()
    r = np.hypot(X, Y)
    amp = np.zeros_like(r)
    inside = (r >= SUPPORT[0]) & (r <= SUPPORT[1])
    ri = r[inside]
    amp[inside] = np.sin(ri / nu ** (1.0 / 3.0)) * envelope(ri) / ri**2
    return VelocityField.from_values(grid, -Y * amp, X * amp)


@dataclass(frozen=True)
class CounterexampleForcing:
    """Forcing d_t u - nu Lap u for u = U(x) gamma(t) with U the oscillating vortex."""

    grid: GridSpec
    nu: float
    profile: VelocityField
    lap_profile: VelocityField
    profile_vorticity: np.ndarray
    lap_profile_vorticity: np.ndarray

    @classmethod
    def build(cls, grid: GridSpec, nu: float) -> "CounterexampleForcing":
        check_resolution(grid, nu)
        U = oscillating_vortex_profile(grid, nu)
        lapU = VelocityField(grid, laplacian(U.u_x), laplacian(U.u_y))
        wU = curl(U)
        return cls(grid, nu, U, lapU, wU.coeffs, laplacian(wU).coeffs)

    time_dependent = True
    is_zero = False

    def velocity(self, t: float) -> VelocityField:
        return self.profile * float(switch_on_derivative(t)) - self.lap_profile * (
            self.nu * float(switch_on(t)))

    def velocity_coeffs(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        a, b = float(switch_on_derivative(t)), self.nu * float(switch_on(t))
        return (a * self.profile.u_x.coeffs - b * self.lap_profile.u_x.coeffs,
                a * self.profile.u_y.coeffs - b * self.lap_profile.u_y.coeffs)

    def vorticity_coeffs(self, t: float) -> np.ndarray:
        return (float(switch_on_derivative(t)) * self.profile_vorticity
                - self.nu * float(switch_on(t)) * self.lap_profile_vorticity)

    def exact_velocity(self, t: float) -> VelocityField:
        return self.profile * float(switch_on(t))

    def exact_vorticity(self, t: float) -> SpectralField:
        return SpectralField.from_coeffs(self.grid, self.profile_vorticity * float(switch_on(t)),
                                         check=False)


def counterexample_family(grid: GridSpec, nu: float, t: float) -> tuple[VelocityField, VelocityField]:
    """(u^nu(t), f^nu(t)) for the oscillating vortex switched on by gamma(t)."""
    forcing = CounterexampleForcing.build(grid, nu)
    return forcing.exact_velocity(t), forcing.velocity(t)


# --- random smooth fields -------------------------------------------------


def random_smooth_field(grid: GridSpec, seed: int, slope: float = 1.0, k_max: float = 4,
                        amplitude: float = 1.0) -> SpectralField:
    """Zero-mean real field with |coeff(k)| proportional to |k|^-slope for 0 < |k| <= k_max.

    ``amplitude`` is the L2 norm of the result.
    """
    if k_max > grid.n / 3.0:
        raise ScenarioError(f"k_max={k_max} exceeds the dealiasing range n/3={grid.n / 3:.2f}")
    if k_max < 1:
        raise ScenarioError("k_max must be at least 1")
    kmag = np.sqrt(grid.k2)
    active = (kmag > 0) & (kmag <= k_max)
    mag = np.zeros_like(kmag)
    if np.isinf(slope):
        mag[kmag == 1.0] = 1.0
    else:
        mag[active] = kmag[active] ** (-slope)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=kmag.shape)
    theta = theta - np.roll(np.flip(theta, axis=(0, 1)), 1, axis=(0, 1))
    coeffs = mag * np.exp(1j * theta)
    coeffs = 0.5 * (coeffs + conjugate_partner(coeffs))
    norm = math.sqrt(DOMAIN_MEASURE * float(np.sum(np.abs(coeffs) ** 2)))
    if norm > 0:
        coeffs *= amplitude / norm
    return SpectralField.from_coeffs(grid, coeffs)


# --- rearrangement-controlled vorticity families ---------------------------

DISK_RADIUS = 1.2
DISK_MEASURE = math.pi * DISK_RADIUS**2


def _layer_profile(kind: str, params: dict):
    A = params["amplitude"]
    S = DISK_MEASURE
    if kind == "lp":
        p = params["p"]
        if p <= 1:
            raise ScenarioError(f"lp family needs p > 1, got {p}")
        return lambda s: A * (S / s) ** (1.0 / (2.0 * p))
    if kind == "lorentz":
        q = params["q"]
        if not 1.0 <= q <= 2.0:
            raise ScenarioError(f"lorentz family needs q in [1, 2], got {q}")
        return lambda s: A * np.sqrt(S / s) / (1.0 + np.log(S / s)) ** (1.0 / q)
    if kind == "llogl":
        alpha = params["alpha"]
        if alpha <= 0.5:
            raise ScenarioError(f"llogl family needs alpha > 1/2, got {alpha}")
        return lambda s: A * (1.0 + np.log(S / s)) ** alpha
    raise ScenarioError(f"unknown vorticity family {kind!r}")


def vorticity_family(grid: GridSpec, kind: str, params: dict | None = None, seed: int = 0) -> SpectralField:
    """Two sign-opposite radially layered disks with a prescribed decreasing profile.

    Inside each disk the value at distance rho from its centre is F(pi rho^2), so the
    restriction to a disk has decreasing rearrangement F. The disks are exact grid
    translates of each other, which makes the mean vanish to round-off. The seed
    rolls the pattern by whole cells.
    """
    base = {"lp": {"p": 2.0}, "lorentz": {"q": 2.0}, "llogl": {"alpha": 1.0}}
    if kind not in base:
        raise ScenarioError(f"unknown vorticity family {kind!r}")
    merged = {"amplitude": 1.0, **base[kind], **(params or {})}
    F = _layer_profile(kind, merged)
    n, h = grid.n, grid.h
    X, Y = grid.coordinates()
    cx, cy = (n // 4 + 0.5) * h, (n // 2 + 0.5) * h
    s = math.pi * ((X - cx) ** 2 + (Y - cy) ** 2)
    w = np.zeros((n, n))
    inside = s <= DISK_MEASURE
    w[inside] = F(s[inside])
    w = w - np.roll(w, n // 2, axis=0)
    rng = np.random.default_rng(seed)
    shift = rng.integers(0, n, size=2)
    w = np.roll(w, tuple(int(v) for v in shift), axis=(0, 1))
    return SpectralField.from_values(grid, w)


def layered_lp_norm(p: float, amplitude: float = 1.0) -> float:
    """Closed-form L^p norm of the continuum lp family (two disks)."""
    return (4.0 * amplitude**p * DISK_MEASURE) ** (1.0 / p)


# --- forcings ---------------------------------------------------------------


class ZeroForcing:
    time_dependent = False
    is_zero = True

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self._zero = np.zeros((grid.n, grid.n), dtype=complex)

    def vorticity_coeffs(self, t: float) -> np.ndarray:
        return self._zero

    def velocity(self, t: float) -> VelocityField:
        return VelocityField.zeros(self.grid)

    def velocity_coeffs(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self._zero, self._zero


class SteadyForcing:
    """Time-independent vorticity forcing g with velocity forcing f = BiotSavart(g)."""

    time_dependent = False
    is_zero = False

    def __init__(self, g: SpectralField):
        self.grid = g.grid
        self.g = g
        self.f = biot_savart(g)

    def vorticity_coeffs(self, t: float) -> np.ndarray:
        return self.g.coeffs

    def velocity(self, t: float) -> VelocityField:
        return self.f

    def velocity_coeffs(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.f.u_x.coeffs, self.f.u_y.coeffs


def initial_vorticity(ref: ScenarioRef, grid: GridSpec) -> SpectralField:
    p = ref.resolved()
    kind = ref.kind
    if kind in ("zero", "counterexample"):
        # gamma(0) = 0, so the oscillating vortex starts from rest
        return SpectralField.zeros(grid)
    if kind == "taylor_green":
        return taylor_green(grid, 0.0, 0.0, p["amplitude"]).vorticity
    if kind == "random_smooth":
        return random_smooth_field(grid, p["seed"], p["slope"], p["k_max"], p["amplitude"])
    family = kind.removesuffix("_family")
    params = {k: v for k, v in p.items() if k != "seed"}
    return vorticity_family(grid, family, params, seed=int(p["seed"]))


def build_forcing(ref: ScenarioRef, grid: GridSpec, nu: float):
    p = ref.resolved(FORCING_PARAMS, "forcing")
    if ref.kind == "zero":
        return ZeroForcing(grid)
    if ref.kind == "taylor_green":
        return SteadyForcing(taylor_green(grid, 0.0, 0.0, p["amplitude"]).vorticity)
    if ref.kind == "random_smooth":
        return SteadyForcing(random_smooth_field(grid, p["seed"], p["slope"], p["k_max"], p["amplitude"]))
    return CounterexampleForcing.build(grid, nu)
