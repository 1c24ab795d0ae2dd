"""Vorticity-form Navier-Stokes / Euler integrator on the torus.

    d_t w + u.grad w = nu Lap w + g,      u = BiotSavart(w)

The viscous term is integrated exactly per Fourier mode (integrating factor),
the rest with classical RK4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .field import (
    DOMAIN_MEASURE,
    GridSpec,
    SpectralField,
    VelocityField,
    biot_savart,
    check_zero_mean,
    l2_norm,
)
from .scenarios import ScenarioRef, build_forcing, initial_vorticity

log = logging.getLogger(__name__)

CFL_LIMIT = 0.5
MAX_HALVINGS = 10


class SolverError(RuntimeError):
    pass


class StepSizeError(SolverError):
    def __init__(self, cfl: float, suggested_dt: float, ledger: "RunLedger | None" = None):
        super().__init__(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT}; use dt <= {suggested_dt:.3e}")
        self.cfl = cfl
        self.suggested_dt = suggested_dt
        self.ledger = ledger
        self.trajectory = None


class InsufficientDataError(ValueError):
    pass


class HalfSpectrum:
    """Real-to-complex transform workspace for one grid size.

    Coefficients live on the half plane ky >= 0 (shape n x (n/2+1)) with the
    same 1/n^2 normalisation as SpectralField.coeffs. Read-only after
    construction, so instances are shared between threads.
    """

    _cache: dict[int, "HalfSpectrum"] = {}

    def __init__(self, grid: GridSpec):
        n = grid.n
        self.grid = grid
        self.n = n
        self.m = n // 2 + 1
        kx = np.fft.fftfreq(n, 1.0 / n)[:, None]
        ky = np.fft.rfftfreq(n, 1.0 / n)[None, :]
        self.kx = np.broadcast_to(kx, (n, self.m)).copy()
        self.ky = np.broadcast_to(ky, (n, self.m)).copy()
        self.k2 = self.kx**2 + self.ky**2
        self.dx = np.where(np.abs(self.kx) == n // 2, 0.0, 1j * self.kx)
        self.dy = np.where(self.ky == n // 2, 0.0, 1j * self.ky)
        k2 = self.k2.copy()
        k2[0, 0] = 1.0
        self.inv_k2 = 1.0 / k2
        self.inv_k2[0, 0] = 0.0
        self.mask = np.maximum(np.abs(self.kx), np.abs(self.ky)) <= n / 3.0
        # Parseval weights: interior ky columns stand for two conjugate modes
        self.weight = np.full((n, self.m), 2.0)
        self.weight[:, 0] = 1.0
        self.weight[:, -1] = 1.0

    @classmethod
    def of(cls, grid: GridSpec) -> "HalfSpectrum":
        ops = cls._cache.get(grid.n)
        if ops is None:
            ops = cls._cache.setdefault(grid.n, cls(grid))
        return ops

    def to_grid(self, c: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(c, s=(self.n, self.n)) * self.n**2

    def to_coeffs(self, v: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(v) / self.n**2

    def half(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[:, : self.m])

    def field(self, c: np.ndarray) -> SpectralField:
        return SpectralField.from_values(self.grid, self.to_grid(c))

    def l2_sq(self, c: np.ndarray) -> float:
        return DOMAIN_MEASURE * float(np.sum(self.weight * np.abs(c) ** 2))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return DOMAIN_MEASURE * float(np.sum(self.weight * (a * np.conj(b)).real))

    def velocity(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = -w * self.inv_k2
        return -self.dy * psi, self.dx * psi

    def advection(self, w: np.ndarray, ux: np.ndarray, uy: np.ndarray, dealiased: bool = True) -> np.ndarray:
        """Coefficients of (dealiased) u . grad w with u given on the grid."""
        wx = self.to_grid(self.dx * w)
        wy = self.to_grid(self.dy * w)
        out = self.to_coeffs(ux * wx + uy * wy)
        return out * self.mask if dealiased else out

    def nonlinear(self, w: np.ndarray) -> np.ndarray:
        ux_h, uy_h = self.velocity(w)
        out = -self.advection(w, self.to_grid(ux_h), self.to_grid(uy_h))
        # u.grad w = div(u w) has zero mean; drop round-off
        out[0, 0] = 0.0
        return out

    def max_speed(self, w: np.ndarray) -> float:
        ux_h, uy_h = self.velocity(w)
        ux, uy = self.to_grid(ux_h), self.to_grid(uy_h)
        return float(np.sqrt((ux**2 + uy**2).max()))


def nonlinear_term(omega: SpectralField) -> SpectralField:
    """-dealias(u . grad w) with u = BiotSavart(w)."""
    check_zero_mean(omega)
    ops = HalfSpectrum.of(omega.grid)
    return ops.field(ops.nonlinear(ops.half(omega.coeffs)))


Rhs = Callable[[float, np.ndarray], np.ndarray]


def ifrk4_step(w_hat: np.ndarray, t: float, dt: float, decay: np.ndarray, rhs: Rhs) -> np.ndarray:
    """One integrating-factor RK4 step for d_t w = -decay*w + rhs(t, w).

    ``decay`` holds the per-mode linear rates (nu |k|^2); the linear part is exact.
    """
    if dt == 0:
        return w_hat.copy()
    E = np.exp(-decay * dt)
    E2 = np.exp(-decay * (0.5 * dt))
    k1 = rhs(t, w_hat)
    k2 = rhs(t + 0.5 * dt, E2 * (w_hat + 0.5 * dt * k1))
    k3 = rhs(t + 0.5 * dt, E2 * w_hat + 0.5 * dt * k2)
    k4 = rhs(t + dt, E * w_hat + dt * E2 * k3)
    return E * w_hat + (dt / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    t: float
    omega: SpectralField
    u: VelocityField = field(default=None)

    def __post_init__(self):
        if self.u is None:
            object.__setattr__(self, "u", biot_savart(self.omega))


@dataclass(frozen=True)
class SimulationConfig:
    grid: GridSpec
    nu: float
    dt: float
    T: float
    initial: ScenarioRef = ScenarioRef("zero")
    forcing: ScenarioRef = ScenarioRef("zero")
    snapshot_stride: int = 10
    advection: bool = True

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"viscosity must be >= 0, got {self.nu}")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if self.dt > self.T * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds horizon T={self.T}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError(f"T/dt = {steps} is not an integer number of steps")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class RunLedger:
    nu: float
    times: np.ndarray
    energy: np.ndarray
    enstrophy: np.ndarray
    dissipation_cum: np.ndarray
    work_cum: np.ndarray
    identity_residual: np.ndarray

    COLUMNS = ("t", "energy", "enstrophy", "dissipation_cum", "work_cum", "identity_residual")

    @classmethod
    def from_series(cls, nu: float, times, energy, enstrophy, power) -> "RunLedger":
        times = np.asarray(times, dtype=float)
        energy = np.asarray(energy, dtype=float)
        enstrophy = np.asarray(enstrophy, dtype=float)
        power = np.asarray(power, dtype=float)
        diss = nu * cumulative_trapezoid(enstrophy, times)
        work = cumulative_trapezoid(power, times)
        resid = energy - energy[0] + diss - work
        return cls(nu, times, energy, enstrophy, diss, work, resid)

    def __len__(self):
        return len(self.times)

    def rows(self):
        return zip(self.times, self.energy, self.enstrophy, self.dissipation_cum,
                   self.work_cum, self.identity_residual)


def cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


class NavierStokesSolver:
    """Stateful integrator for one run; not shared between threads.

    Works on half-spectrum coefficient arrays (see HalfSpectrum).
    """

    def __init__(self, grid: GridSpec, nu: float, forcing, advection: bool = True):
        self.grid = grid
        self.ops = HalfSpectrum.of(grid)
        self.nu = nu
        self.forcing = forcing
        self.advection = advection
        self.decay = nu * self.ops.k2

    def forcing_coeffs(self, t: float) -> np.ndarray:
        return self.ops.half(self.forcing.vorticity_coeffs(t))

    def rhs(self, t: float, w_hat: np.ndarray) -> np.ndarray:
        out = self.ops.nonlinear(w_hat) if self.advection else np.zeros_like(w_hat)
        if not self.forcing.is_zero:
            out = out + self.forcing_coeffs(t)
        return out

    def speed(self, w_hat: np.ndarray) -> float:
        return self.ops.max_speed(w_hat) if self.advection else 0.0

    def advance(self, w_hat: np.ndarray, t: float, dt: float) -> np.ndarray:
        return ifrk4_step(w_hat, t, dt, self.decay, self.rhs)

    def advance_adaptive(self, w_hat: np.ndarray, t: float, dt: float) -> np.ndarray:
        """Advance by dt, halving the sub-step while the CFL limit is exceeded."""
        speed = self.speed(w_hat)
        h = self.grid.h
        sub = dt
        halvings = 0
        while sub * speed / h > CFL_LIMIT:
            if halvings == MAX_HALVINGS:
                raise StepSizeError(dt * speed / h, CFL_LIMIT * h / speed)
            sub *= 0.5
            halvings += 1
        if halvings:
            log.debug("t=%.4g: CFL forces %d halvings of dt=%g", t, halvings, dt)
        for j in range(2**halvings):
            w_hat = self.advance(w_hat, t + j * sub, sub)
        return w_hat

    def energy_terms(self, w_hat: np.ndarray, t: float) -> tuple[float, float, float]:
        ops = self.ops
        ux, uy = ops.velocity(w_hat)
        energy = 0.5 * (ops.l2_sq(ux) + ops.l2_sq(uy))
        enstrophy = ops.l2_sq(w_hat)
        power = 0.0
        if not self.forcing.is_zero:
            fx, fy = self.forcing.velocity_coeffs(t)
            power = ops.inner(ops.half(fx), ux) + ops.inner(ops.half(fy), uy)
        return energy, enstrophy, power


def step(state: TrajectorySample, dt: float, forcing, nu: float, advection: bool = True) -> TrajectorySample:
    """Advance one sample by dt; raises StepSizeError when the CFL limit is violated."""
    solver = NavierStokesSolver(state.omega.grid, nu, forcing, advection)
    check_zero_mean(state.omega)
    if dt == 0:
        return state
    ops = solver.ops
    w = ops.half(state.omega.coeffs)
    speed = solver.speed(w)
    c = dt * speed / ops.grid.h
    if c > CFL_LIMIT:
        raise StepSizeError(c, CFL_LIMIT * ops.grid.h / speed)
    return TrajectorySample(state.t + dt, ops.field(solver.advance(w, state.t, dt)))


def run(config: SimulationConfig, omega0: SpectralField | None = None, forcing=None):
    """Integrate to T; returns (trajectory, ledger).

    ``omega0``/``forcing`` override the scenario references when given.
    """
    grid = config.grid
    if omega0 is None:
        omega0 = initial_vorticity(config.initial, grid)
    if forcing is None:
        forcing = build_forcing(config.forcing, grid, config.nu)
    check_zero_mean(omega0)
    solver = NavierStokesSolver(grid, config.nu, forcing, config.advection)

    ops = solver.ops
    w = ops.half(omega0.coeffs)
    times, energy, enstrophy, power = [], [], [], []
    trajectory = [TrajectorySample(0.0, omega0)]

    def record(t):
        e, z, p = solver.energy_terms(w, t)
        times.append(t)
        energy.append(e)
        enstrophy.append(z)
        power.append(p)

    record(0.0)
    for i in range(config.n_steps):
        t = i * config.dt
        try:
            w = solver.advance_adaptive(w, t, config.dt)
        except StepSizeError as exc:
            exc.ledger = RunLedger.from_series(config.nu, times, energy, enstrophy, power)
            exc.trajectory = trajectory
            raise
        t_new = (i + 1) * config.dt
        record(t_new)
        if (i + 1) % config.snapshot_stride == 0 or i + 1 == config.n_steps:
            trajectory.append(TrajectorySample(t_new, ops.field(w)))
    ledger = RunLedger.from_series(config.nu, times, energy, enstrophy, power)
    return trajectory, ledger


def _time_derivative(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray, a: float, b: float) -> np.ndarray:
    # three-point Lagrange derivative at the middle node; second order for any spacing
    return (a * a * nxt - b * b * prev + (b * b - a * a) * mid) / (a * b * (a + b))


def pde_residual(trajectory, forcing, nu: float, advection: bool = True, dealiased: bool = True) -> np.ndarray:
    """L2 norm of D_t w + u.grad w - nu Lap w - g at every interior snapshot."""
    if len(trajectory) < 3:
        raise InsufficientDataError(f"need at least 3 snapshots, got {len(trajectory)}")
    ops = HalfSpectrum.of(trajectory[0].omega.grid)
    out = []
    for prev, mid, nxt in zip(trajectory, trajectory[1:], trajectory[2:]):
        a, b = mid.t - prev.t, nxt.t - mid.t
        w = ops.half(mid.omega.coeffs)
        dwdt = _time_derivative(ops.half(prev.omega.coeffs), w, ops.half(nxt.omega.coeffs), a, b)
        res = dwdt + nu * ops.k2 * w
        if advection:
            res = res + ops.advection(w, mid.u.u_x.values, mid.u.u_y.values, dealiased)
        if not forcing.is_zero:
            res = res - ops.half(forcing.vorticity_coeffs(mid.t))
        out.append(math.sqrt(ops.l2_sq(res)))
    return np.array(out)


def velocity_norm(sample: TrajectorySample) -> float:
    return l2_norm(sample.u)
