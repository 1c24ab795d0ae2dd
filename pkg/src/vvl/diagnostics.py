"""Probes for energy balance, dissipation, decay bounds and convergence across viscosities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field import (
    DOMAIN_MEASURE,
    ConsistencyError,
    GridSpec,
    SpectralField,
    VelocityField,
    curl,
    derivative,
    inner_product_l2,
    l2_norm,
)
from .scenarios import unit_bump
from .solver import RunLedger, cumulative_trapezoid

# Verdict thresholds. These are test budgets standing in for qualitative limits,
# applied per halving of the viscosity and rescaled for other ratios.
DISSIPATION_DECREASE = 1.5
CAUCHY_FACTOR = 0.7


class DomainError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class ResampleError(ValueError):
    pass


def _trapezoid(y, t) -> float:
    y, t = np.asarray(y, dtype=float), np.asarray(t, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


# --- energy bookkeeping -----------------------------------------------------


def balance_residual(ledger: RunLedger, u0_norm: float | None = None) -> np.ndarray:
    """r(t) = 1/2 |u(t)|^2 - 1/2 |u0|^2 - int_0^t <f,u>."""
    e0 = ledger.energy[0] if u0_norm is None else 0.5 * u0_norm**2
    return ledger.energy - e0 - ledger.work_cum


def zeta(ledger: RunLedger) -> np.ndarray:
    """Cumulative viscous dissipation nu * int_0^t |w|^2."""
    if ledger.nu <= 0:
        raise DomainError("the dissipation functional needs nu > 0")
    return ledger.nu * cumulative_trapezoid(ledger.enstrophy, ledger.times)


def forcing_l2_sq(forcing, times) -> np.ndarray:
    """|f(t)|^2 of the velocity forcing at each time (Parseval on the coefficients)."""
    out = np.zeros(len(times))
    if forcing.is_zero:
        return out
    for i, t in enumerate(times):
        fx, fy = forcing.velocity_coeffs(t)
        out[i] = DOMAIN_MEASURE * float(np.sum(np.abs(fx) ** 2 + np.abs(fy) ** 2))
    return out


def l2t_norm(series_sq, times) -> float:
    """(int |.|^2 dt)^(1/2) from a series of squared spatial norms."""
    return math.sqrt(max(_trapezoid(series_sq, times), 0.0))


def gronwall_probe(ledger: RunLedger, f_l2t_l2x: float) -> float:
    """min_t [(|u0|^2 + sqrt(t) M) exp(sqrt(t) M) - |u(t)|^2]; non-negative when the bound holds."""
    if not math.isfinite(f_l2t_l2x):
        raise ValueError("forcing norm must be finite")
    u_sq = 2.0 * ledger.energy
    a = np.sqrt(ledger.times) * f_l2t_l2x
    bound = (u_sq[0] + a) * np.exp(a)
    return float(np.min(bound - u_sq))


def enstrophy_probe(ledger: RunLedger, f_sq) -> float:
    """min over tau <= t of |w(tau)|^2 + (1/nu) int_tau^t |f|^2 - |w(t)|^2."""
    if ledger.nu <= 0:
        raise DomainError("the enstrophy inequality needs nu > 0")
    F = cumulative_trapezoid(np.asarray(f_sq, dtype=float), ledger.times) / ledger.nu
    Z = ledger.enstrophy
    slack = (Z[:, None] - F[:, None]) + (F[None, :] - Z[None, :])  # [tau, t]
    upper = np.triu(np.ones_like(slack, dtype=bool))
    return float(np.min(slack[upper]))


@dataclass
class DecayProbe:
    nus: list
    sup_values: list
    ratio: float
    notes: list = field(default_factory=list)


def vorticity_decay_probe(sweep: "SweepResult") -> DecayProbe:
    """sup_t sqrt(nu t) |w(t)| for each viscous run, and the max/min ratio across nu."""
    nus, sups, notes = [], [], []
    for nu, ledger in zip(sweep.nus, sweep.ledgers):
        if nu <= 0:
            notes.append(f"nu={nu:g} excluded: the bound is for viscous runs")
            continue
        q = np.sqrt(nu * ledger.times * ledger.enstrophy)
        nus.append(nu)
        sups.append(float(np.max(q)))
    ratio = max(sups) / min(sups) if sups and min(sups) > 0 else math.nan
    return DecayProbe(nus, sups, ratio, notes)


# --- structure functions --------------------------------------------------


def _offsets(grid: GridSpec, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Lattice offsets (i, j) with 0 < h |(i, j)| <= r."""
    if r < grid.h:
        raise DomainError(f"r={r} is below the grid spacing {grid.h:.4g}; no offsets")
    m = int(math.floor(r / grid.h))
    i, j = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1), indexing="ij")
    keep = (grid.h * np.hypot(i, j) <= r * (1 + 1e-12)) & ((i != 0) | (j != 0))
    return i[keep], j[keep]


def _autocorrelation(f: SpectralField) -> np.ndarray:
    """C[i, j] = h^2 sum_x f(x + (i, j) h) f(x)."""
    n = f.grid.n
    return DOMAIN_MEASURE * np.real(np.fft.ifft2(np.abs(f.coeffs) ** 2)) * n * n


def structure_function(v, r: float) -> float:
    """S2(v; r): root of the mean of |v(. + h) - v|^2 over lattice offsets 0 < |h| <= r."""
    comps = v.components if isinstance(v, VelocityField) else (v,)
    grid = comps[0].grid
    i, j = _offsets(grid, r)
    total = np.zeros(len(i))
    for c in comps:
        C = _autocorrelation(c)
        total += 2.0 * (C[0, 0] - C[i % grid.n, j % grid.n])
    return math.sqrt(max(float(np.mean(total)), 0.0))


def structure_function_direct(v, r: float) -> float:
    """Same quantity by explicit index rolling; slow reference path."""
    comps = v.components if isinstance(v, VelocityField) else (v,)
    grid = comps[0].grid
    i, j = _offsets(grid, r)
    acc = 0.0
    for a, b in zip(i, j):
        for c in comps:
            d = np.roll(c.values, (-a, -b), axis=(0, 1)) - c.values
            acc += grid.cell_measure * float(np.sum(d * d))
    return math.sqrt(acc / len(i))


def s2_time(trajectory, r: float) -> float:
    """(int_0^T S2(u(t); r)^2 dt)^(1/2) by the trapezoid rule on the samples."""
    times = [s.t for s in trajectory]
    vals = [structure_function(s.u, r) ** 2 for s in trajectory]
    return math.sqrt(_trapezoid(vals, times))


@dataclass(frozen=True)
class InterpolationSample:
    omega_l2: float
    r_grad_omega: float
    s2_over_r: float

    @property
    def ratio(self) -> float:
        denom = self.r_grad_omega + 2.0 * self.s2_over_r
        return self.omega_l2 / denom if denom > 0 else 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return self.omega_l2, self.r_grad_omega, self.s2_over_r


def interpolation_probe(u: VelocityField, omega: SpectralField, r: float) -> InterpolationSample:
    """|w|, r |grad w| and S2(u; r)/r, the three terms of the interpolation inequality."""
    mismatch = float(np.max(np.abs(curl(u).values - omega.values)))
    if mismatch > 1e-8 * max(1.0, float(np.max(np.abs(omega.values)))):
        raise ConsistencyError(f"curl(u) differs from omega by {mismatch:.3g}")
    grad_sq = l2_norm(derivative(omega, "x")) ** 2 + l2_norm(derivative(omega, "y")) ** 2
    return InterpolationSample(l2_norm(omega), r * math.sqrt(grad_sq), structure_function(u, r) / r)


# --- distances between runs ---------------------------------------------------


def _restrict(coeffs: np.ndarray, n_from: int, n_to: int) -> np.ndarray:
    """Spectral truncation to the modes |k_x|, |k_y| < n_to/2 (Nyquist lines dropped)."""
    kt = np.fft.fftfreq(n_to, 1.0 / n_to).astype(int)
    keep = np.abs(kt) < n_to // 2
    src = kt[keep] % n_from
    out = np.zeros((n_to, n_to), dtype=complex)
    ix = np.flatnonzero(keep)
    out[np.ix_(ix, ix)] = coeffs[np.ix_(src, src)]
    return out


def _velocity_coeffs(sample, n: int) -> list[np.ndarray]:
    u = sample.u
    m = u.grid.n
    if m == n:
        return [u.u_x.coeffs, u.u_y.coeffs]
    return [_restrict(u.u_x.coeffs, m, n), _restrict(u.u_y.coeffs, m, n)]


def _common_times(a, b, tol: float = 1e-9):
    tb = np.array([s.t for s in b])
    pairs = []
    for sa in a:
        j = int(np.argmin(np.abs(tb - sa.t))) if len(tb) else -1
        if j >= 0 and abs(tb[j] - sa.t) <= tol * max(1.0, abs(sa.t)):
            pairs.append((sa, b[j]))
    return pairs


def convergence_metrics(run_a, run_b) -> tuple[float, float]:
    """(L2_t L2_x, C_t L2_x) distance between the velocities of two trajectories.

    Samples are matched at common times; grids must be nested and the finer run is
    spectrally truncated to the coarser one.
    """
    na, nb = run_a[0].u.grid.n, run_b[0].u.grid.n
    lo, hi = min(na, nb), max(na, nb)
    if hi % lo:
        raise ResampleError(f"grids n={na} and n={nb} are not nested")
    pairs = _common_times(run_a, run_b)
    if not pairs:
        raise ResampleError("trajectories share no sample times")
    times, dist_sq = [], []
    for sa, sb in pairs:
        ca, cb = _velocity_coeffs(sa, lo), _velocity_coeffs(sb, lo)
        d = sum(float(np.sum(np.abs(x - y) ** 2)) for x, y in zip(ca, cb)) * DOMAIN_MEASURE
        times.append(sa.t)
        dist_sq.append(d)
    return l2t_norm(dist_sq, times), math.sqrt(max(dist_sq))


# --- weak pairings ------------------------------------------------------------


def radial_test_bump(grid: GridSpec) -> SpectralField:
    """Smooth bump of |x| supported in |x| < 1, centred at the origin of [-pi, pi)^2."""
    X, Y = grid.centered_coordinates()
    return SpectralField.from_values(grid, unit_bump(np.hypot(X, Y)))


def default_test_family(grid: GridSpec, vector: bool = True) -> dict:
    """The 8 lowest real Fourier modes and a radial bump; as perp-gradients when ``vector``."""
    x, y = grid.coordinates()
    scalars = {
        "cos_x": np.cos(x), "sin_x": np.sin(x), "cos_y": np.cos(y), "sin_y": np.sin(y),
        "cos_x+y": np.cos(x + y), "sin_x+y": np.sin(x + y),
        "cos_x-y": np.cos(x - y), "sin_x-y": np.sin(x - y),
    }
    family = {k: SpectralField.from_values(grid, v) for k, v in scalars.items()}
    family["bump"] = radial_test_bump(grid)
    if not vector:
        return family
    return {k: VelocityField(grid, -derivative(s, "y"), derivative(s, "x")) for k, s in family.items()}


@dataclass
class PairingTable:
    names: list
    times: np.ndarray
    pairings: np.ndarray  # [time, test]
    integrated: np.ndarray  # int_0^T <v, psi_j> dt

    def rows(self):
        return zip(self.names, self.integrated)


def weak_pairing_probe(series: Sequence[tuple[float, object]], test_fields: dict) -> PairingTable:
    """Pairings <v(t), psi_j> and their trapezoid time integrals."""
    names = list(test_fields)
    times = np.array([t for t, _ in series], dtype=float)
    vals = np.array([[inner_product_l2(v, test_fields[k]) for k in names] for _, v in series])
    vals = vals.reshape(len(times), len(names))
    integrated = np.array([_trapezoid(vals[:, j], times) for j in range(len(names))])
    return PairingTable(names, times, vals, integrated)


def forcing_series(forcing, times) -> list[tuple[float, VelocityField]]:
    return [(float(t), forcing.velocity(float(t))) for t in times]


# --- sweeps and verdicts --------------------------------------------------------

FORCING_MODES = ("strong", "weak-oscillatory")


@dataclass
class SweepResult:
    nus: list
    ledgers: list
    trajectories: list
    forcing_mode: str = "strong"

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.nus, self.nus[1:])):
            raise ConfigurationError(f"viscosities must be strictly decreasing, got {self.nus}")
        if not (len(self.nus) == len(self.ledgers) == len(self.trajectories)):
            raise ConfigurationError("one ledger and one trajectory per viscosity required")
        if self.forcing_mode not in FORCING_MODES:
            raise ConfigurationError(f"forcing mode must be one of {FORCING_MODES}")


@dataclass
class BalanceReport:
    nus: list
    zeta_T: list
    l2l2_gaps: list
    ctl2_gaps: list
    balance_residual_final: list
    flags: dict

    def to_json(self) -> dict:
        return {
            "nus": list(map(float, self.nus)),
            "zeta_T": list(map(float, self.zeta_T)),
            "l2l2_gaps": list(map(float, self.l2l2_gaps)),
            "ctl2_gaps": list(map(float, self.ctl2_gaps)),
            "balance_residual_final": list(map(float, self.balance_residual_final)),
            "flags": dict(self.flags),
        }


def _halvings(nu_a: float, nu_b: float) -> float:
    return math.log2(nu_a / nu_b)


def theorem_verdict(sweep: SweepResult) -> BalanceReport:
    """Numeric proxies for dissipation anomaly, strong convergence and their equivalence."""
    if len(sweep.nus) < 3:
        raise ConfigurationError(f"at least 3 viscosities required, got {len(sweep.nus)}")
    if any(nu <= 0 for nu in sweep.nus):
        raise ConfigurationError("verdicts compare viscous runs only")
    nus = list(sweep.nus)
    zeta_T = [float(zeta(ledger)[-1]) for ledger in sweep.ledgers]
    residual = [float(balance_residual(ledger)[-1]) for ledger in sweep.ledgers]
    gaps = [convergence_metrics(a, b) for a, b in zip(sweep.trajectories, sweep.trajectories[1:])]
    l2l2 = [g[0] for g in gaps]
    ctl2 = [g[1] for g in gaps]

    anomalous = not all(
        zeta_T[i] >= DISSIPATION_DECREASE ** _halvings(nus[i], nus[i + 1]) * zeta_T[i + 1]
        for i in range(len(nus) - 1))
    strong = all(
        l2l2[i + 1] <= CAUCHY_FACTOR ** _halvings(nus[i + 1], nus[i + 2]) * l2l2[i]
        for i in range(len(l2l2) - 1))
    abs_res = [abs(r) for r in residual]
    residual_to_zero = all(b < a for a, b in zip(abs_res, abs_res[1:]))
    flags = {
        "forcing_mode": sweep.forcing_mode,
        "anomalous_dissipation": anomalous,
        "strong_convergence": strong,
        "balance_residual_to_zero": residual_to_zero,
    }
    if sweep.forcing_mode == "strong":
        flags["equivalence_consistent"] = strong == residual_to_zero
    else:
        # the weak limit of the oscillating family is u = 0, which is balanced identically
        flags["limit_balance_residual"] = 0.0
    return BalanceReport(nus, zeta_T, l2l2, ctl2, residual, flags)


def l2t_velocity_norm(trajectory) -> float:
    """|u|_{L2_t L2_x} from the trajectory samples."""
    return l2t_norm([l2_norm(s.u) ** 2 for s in trajectory], [s.t for s in trajectory])
