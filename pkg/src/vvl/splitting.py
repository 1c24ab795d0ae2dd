"""First-order transport/heat splitting for the forced advection-diffusion equation

    d_t b + U.grad b = nu Lap b + g,

together with a convergence study against an unsplit reference solve.

On each outer step [t_n, t_{n+1}] the approximant is

    b(t) = H(t; t_n) E(t; t_n) b(t_n),

where E transports with U and H solves the forced heat equation exactly per
Fourier mode (Duhamel integral by Gauss-Legendre quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .field import GridSpec, SpectralField, VelocityField, check_zero_mean
from .solver import CFL_LIMIT, HalfSpectrum, InsufficientDataError, StepSizeError, ifrk4_step

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(4)

EXACT_REGIME_TOL = 1e-9


class OrderingError(ValueError):
    pass


VelocityProvider = Callable[[float], VelocityField]
ForcingProvider = Callable[[float], SpectralField]


def _velocity_provider(U) -> VelocityProvider | None:
    if U is None:
        return None
    if isinstance(U, VelocityField):
        return lambda t: U
    return U


def _forcing_provider(g) -> ForcingProvider | None:
    if g is None:
        return None
    if isinstance(g, SpectralField):
        return lambda t: g
    return g


class _SplitOperators:
    """Half-spectrum kernels shared by the heat and transport sub-solvers."""

    def __init__(self, grid: GridSpec, nu: float, U=None, g=None):
        self.grid = grid
        self.ops = HalfSpectrum.of(grid)
        self.nu = nu
        self.decay = nu * self.ops.k2
        self.U = _velocity_provider(U)
        self.g = _forcing_provider(g)
        self._frozen: tuple[float, tuple[np.ndarray, np.ndarray]] | None = None
        self._g_cache: dict[float, np.ndarray] = {}

    def velocity_grid(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        v = self.U(t)
        return v.u_x.values, v.u_y.values

    def forcing_half(self, t: float) -> np.ndarray:
        c = self._g_cache.get(t)
        if c is None:
            c = self.ops.half(self.g(t).coeffs)
            if len(self._g_cache) < 4096:
                self._g_cache[t] = c
        return c

    def heat(self, b: np.ndarray, t0: float, t: float) -> np.ndarray:
        dt = t - t0
        out = np.exp(-self.decay * dt) * b
        if self.g is not None and dt > 0:
            for x, w in zip(GL_NODES, GL_WEIGHTS):
                tau = t0 + 0.5 * dt * (x + 1.0)
                out = out + (0.5 * dt * w) * np.exp(-self.decay * (t - tau)) * self.forcing_half(tau)
        return out

    def transport_rhs(self, t: float, b: np.ndarray) -> np.ndarray:
        ux, uy = self.velocity_grid(t)
        out = -self.ops.advection(b, ux, uy)
        out[0, 0] = 0.0
        return out

    def transport_substep(self, b: np.ndarray, t: float, dt: float) -> np.ndarray:
        ux, uy = self.velocity_grid(t)
        speed = float(np.sqrt((ux**2 + uy**2).max()))
        cfl = dt * speed / self.grid.h
        if cfl > CFL_LIMIT:
            raise StepSizeError(cfl, CFL_LIMIT * self.grid.h / speed)
        return ifrk4_step(b, t, dt, np.zeros(b.shape), self.transport_rhs)

    def full_rhs(self, t: float, b: np.ndarray) -> np.ndarray:
        out = self.transport_rhs(t, b) if self.U is not None else np.zeros_like(b)
        if self.g is not None:
            out = out + self.forcing_half(t)
        return out


def _substeps(t0: float, t: float, inner_dt: float) -> tuple[int, float]:
    m = max(1, math.ceil((t - t0) / inner_dt - 1e-9))
    return m, (t - t0) / m


def heat_step(beta0: SpectralField, t0: float, t: float, g=None, nu: float = 1.0) -> SpectralField:
    """H(t; t0) beta0: exact heat propagator plus Duhamel integral of g."""
    if t < t0:
        raise OrderingError(f"heat step needs t >= t0, got t={t} < t0={t0}")
    check_zero_mean(beta0)
    so = _SplitOperators(beta0.grid, nu, g=g)
    return so.ops.field(so.heat(so.ops.half(beta0.coeffs), t0, t))


def transport_step(beta0: SpectralField, t0: float, t: float, U, inner_dt: float) -> SpectralField:
    """E(t; t0) beta0 by RK4 on d_t b = -dealias(U.grad b) with sub-steps <= inner_dt."""
    if t < t0:
        raise OrderingError(f"transport step needs t >= t0, got t={t} < t0={t0}")
    so = _SplitOperators(beta0.grid, 0.0, U=U)
    b = so.ops.half(beta0.coeffs)
    if U is None or t == t0:
        return beta0
    m, sub = _substeps(t0, t, inner_dt)
    for j in range(m):
        b = so.transport_substep(b, t0 + j * sub, sub)
    return so.ops.field(b)


@dataclass
class SplitConfig:
    grid: GridSpec
    nu: float
    Dt: float
    T: float
    beta0: SpectralField
    U: object = None
    g: object = None
    inner_dt: float | None = None

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("splitting needs nu > 0")
        steps = self.T / self.Dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"T/Dt = {steps} is not an integer")
        check_zero_mean(self.beta0)
        if self.inner_dt is None:
            self.inner_dt = self.Dt / 20.0
        if self.g is not None:
            g = _forcing_provider(self.g)
            for t in (0.0, 0.5 * self.T, self.T):
                check_zero_mean(g(t))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.Dt))

    def with_dt(self, Dt: float) -> "SplitConfig":
        ratio = self.inner_dt / self.Dt
        return SplitConfig(self.grid, self.nu, Dt, self.T, self.beta0, self.U, self.g, Dt * ratio)


@dataclass(frozen=True, eq=False)
class SplitSample:
    t: float
    beta: SpectralField


def split_run(config: SplitConfig, record: str = "outer") -> list[SplitSample]:
    """Splitting approximant sampled at outer breakpoints or at every transport sub-step."""
    if record not in ("outer", "substeps"):
        raise ValueError("record must be 'outer' or 'substeps'")
    so = _SplitOperators(config.grid, config.nu, config.U, config.g)
    ops = so.ops
    b = ops.half(config.beta0.coeffs)
    out = [SplitSample(0.0, config.beta0)]
    for n in range(config.n_steps):
        tn, tn1 = n * config.Dt, (n + 1) * config.Dt
        m, sub = _substeps(tn, tn1, config.inner_dt)
        e = b
        for j in range(m):
            t = tn + (j + 1) * sub
            if so.U is not None:
                e = so.transport_substep(e, tn + j * sub, sub)
            if record == "substeps" or j == m - 1:
                bt = so.heat(e, tn, tn1 if j == m - 1 else t)
                out.append(SplitSample(tn1 if j == m - 1 else t, ops.field(bt)))
        b = bt
    return out


def evaluate_split(config: SplitConfig, t: float) -> SpectralField:
    """beta^Delta(t) for arbitrary t, including points just after a breakpoint."""
    so = _SplitOperators(config.grid, config.nu, config.U, config.g)
    ops = so.ops
    b = ops.half(config.beta0.coeffs)
    n_full = min(int(math.floor(t / config.Dt + 1e-12)), config.n_steps)
    if n_full * config.Dt >= t - 1e-15 and n_full > 0:
        n_full -= 1
    for n in range(n_full + 1):
        tn = n * config.Dt
        t_end = min(tn + config.Dt, t)
        m, sub = _substeps(tn, t_end, config.inner_dt) if t_end > tn else (0, 0.0)
        e = b
        for j in range(m):
            if so.U is not None:
                e = so.transport_substep(e, tn + j * sub, sub)
        b = so.heat(e, tn, t_end)
    return ops.field(b)


def reference_solve(config: SplitConfig, dt: float, sample_every: int) -> list[SplitSample]:
    """Unsplit integrating-factor RK4 solve of the same advection-diffusion problem."""
    so = _SplitOperators(config.grid, config.nu, config.U, config.g)
    ops = so.ops
    steps = int(round(config.T / dt))
    b = ops.half(config.beta0.coeffs)
    out = [SplitSample(0.0, config.beta0)]
    for i in range(steps):
        b = ifrk4_step(b, i * dt, dt, so.decay, so.full_rhs)
        if (i + 1) % sample_every == 0:
            out.append(SplitSample((i + 1) * dt, ops.field(b)))
    return out


@dataclass
class RateTable:
    dts: list[float]
    errors: list[float]
    order_local: list[float]
    order_global: float | None
    regime: str
    notes: list[str] = field(default_factory=list)

    def rows(self):
        return zip(self.dts, self.errors, self.order_local)

    def summary(self) -> dict:
        return {"order_global": self.order_global, "regime": self.regime}


def _l2(a: SpectralField, b: SpectralField) -> float:
    d = a.values - b.values
    return math.sqrt(a.grid.cell_measure * float(np.sum(d * d)))


def convergence_study(config: SplitConfig, dt_list: Sequence[float], reference_dt: float | None = None) -> RateTable:
    """Sup-in-time L2 error of the splitting against a fine unsplit reference."""
    dts = sorted((float(d) for d in dt_list), reverse=True)
    if len(dts) < 3:
        raise ValueError("convergence study needs at least 3 time steps")
    ratios = [dts[i] / dts[i + 1] for i in range(len(dts) - 1)]
    if max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise ValueError(f"time steps must form a geometric sequence, got ratios {ratios}")
    dt_min = dts[-1]
    if reference_dt is None:
        reference_dt = dt_min / 100.0
    every = int(round(dt_min / reference_dt))
    ref = reference_solve(config, reference_dt, every)
    ref_by_index = {int(round(s.t / dt_min)): s.beta for s in ref}

    errors = []
    for Dt in dts:
        traj = split_run(config.with_dt(Dt))
        err = 0.0
        for s in traj:
            err = max(err, _l2(s.beta, ref_by_index[int(round(s.t / dt_min))]))
        errors.append(err)

    local = [float("nan")]
    for i in range(1, len(dts)):
        if errors[i] > 0 and errors[i - 1] > 0:
            local.append(math.log(errors[i - 1] / errors[i]) / math.log(dts[i - 1] / dts[i]))
        else:
            local.append(float("nan"))

    notes = []
    if max(errors) < EXACT_REGIME_TOL:
        notes.append("errors at quadrature floor; order not computed")
        return RateTable(dts, errors, local, None, "exact-regime", notes)
    order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    regime = "converging"
    if any(errors[i + 1] >= errors[i] for i in range(len(errors) - 1)):
        regime = "rate-failure"
        notes.append("errors are not monotone in the time step")
    return RateTable(dts, errors, local, order, regime, notes)


@dataclass
class DefectSeries:
    times: np.ndarray
    values: np.ndarray
    nu: float
    Dt: float | None = None

    @property
    def max(self) -> float:
        return float(self.values.max())


def defect_norm(trajectory: Sequence[SplitSample], U, g, nu: float, Dt: float | None = None) -> DefectSeries:
    """L2 norm of D_t b + U.grad b - nu Lap b - g at interior samples (centred differences)."""
    if len(trajectory) < 3:
        raise InsufficientDataError(f"need at least 3 samples, got {len(trajectory)}")
    grid = trajectory[0].beta.grid
    so = _SplitOperators(grid, nu, U, g)
    ops = so.ops
    times, values = [], []
    for prev, mid, nxt in zip(trajectory, trajectory[1:], trajectory[2:]):
        a, b = mid.t - prev.t, nxt.t - mid.t
        p, c, q = (ops.half(s.beta.coeffs) for s in (prev, mid, nxt))
        res = (a * a * q - b * b * p + (b * b - a * a) * c) / (a * b * (a + b))
        res = res + so.decay * c
        if so.U is not None:
            res = res - so.transport_rhs(mid.t, c)
        if so.g is not None:
            res = res - so.forcing_half(mid.t)
        times.append(mid.t)
        values.append(math.sqrt(ops.l2_sq(res)))
    return DefectSeries(np.array(times), np.array(values), nu, Dt)
