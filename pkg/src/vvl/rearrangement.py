"""Rearrangement-invariant quantities of grid functions.

Grid functions are treated as piecewise constant on cells of measure h^2. The
supremum of the integral of |f| over sets of measure s is then attained by
filling the largest cells first, so M_s is the piecewise-linear interpolant of
the prefix sums of the sorted magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .field import DOMAIN_MEASURE, GridSpec, SpectralField, l1_norm


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RearrangementProfile:
    cell_measure: float
    sorted_abs: np.ndarray
    cum: np.ndarray  # cum[k] = M_{k h^2}; cum[0] = 0

    @property
    def total_measure(self) -> float:
        return self.cell_measure * len(self.sorted_abs)

    @property
    def l1(self) -> float:
        return float(self.cum[-1])

    @classmethod
    def from_cum(cls, cell_measure: float, cum: np.ndarray) -> "RearrangementProfile":
        cum = np.asarray(cum, dtype=float)
        return cls(cell_measure, np.diff(cum) / cell_measure, cum)


def profile(f) -> RearrangementProfile:
    """Sorted magnitudes and their prefix sums; ties broken by flattened index."""
    if isinstance(f, SpectralField):
        values, cell = f.values, f.grid.cell_measure
    else:
        values = np.asarray(f, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"expected a square grid, got shape {values.shape}")
        # raw arrays may be smaller than any solver grid (e.g. 4x4 oracle checks)
        cell = (2.0 * math.pi / values.shape[0]) ** 2
    a = np.abs(values).ravel()
    order = np.argsort(-a, kind="stable")
    s = a[order]
    cum = np.concatenate(([0.0], np.cumsum(s) * cell))
    s.setflags(write=False)
    cum.setflags(write=False)
    return RearrangementProfile(cell, s, cum)


def _check_measure(p: RearrangementProfile, s):
    s = np.asarray(s, dtype=float)
    top = p.total_measure
    if np.any(s < 0) or np.any(s > top * (1 + 1e-12)):
        raise DomainError(f"measure must lie in [0, {top:.6g}], got {s}")
    return np.clip(s, 0.0, top)


def maximal_function(p: RearrangementProfile, s):
    """M_s: supremum of the integral of |f| over sets of measure s."""
    scalar = np.ndim(s) == 0
    s = _check_measure(p, s)
    out = np.interp(np.atleast_1d(s), np.arange(len(p.cum)) * p.cell_measure, p.cum)
    return float(out[0]) if scalar else out


def default_s_samples(grid: GridSpec, count: int = 32) -> np.ndarray:
    return np.geomspace(grid.cell_measure, DOMAIN_MEASURE, count)


def _segment_integral(p: RearrangementProfile, upper: float, power: float) -> float:
    """Integral over (0, upper] of M_s^power ds/s, segment by segment."""
    c = p.cell_measure
    if upper <= 0:
        return 0.0
    K = len(p.sorted_abs)
    kmax = min(K, int(math.ceil(upper / c - 1e-12)))
    # first cell: M_s = a0 s, so the integrand a0^q s^(q-1) integrates in closed form
    x = min(upper, c)
    total = p.sorted_abs[0] ** power * x**power / power
    if kmax <= 1:
        return float(total)
    k = np.arange(1, kmax)
    lo = k * c
    hi = np.minimum((k + 1) * c, upper)
    a = p.cum[k]
    b = p.sorted_abs[k]

    def gauss(m):
        x, w = np.polynomial.legendre.leggauss(m)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        s = mid[:, None] + half[:, None] * x[None, :]
        M = a[:, None] + b[:, None] * (s - lo[:, None])
        return half * np.sum(w[None, :] * M**power / s, axis=1)

    coarse, fine = gauss(8), gauss(16)
    bad = np.abs(fine - coarse) > 1e-11 * np.maximum(np.abs(fine), 1e-300)
    for i in np.flatnonzero(bad):
        ai, bi, li = a[i], b[i], lo[i]
        fine[i] = integrate.quad(lambda s: (ai + bi * (s - li)) ** power / s, li, hi[i],
                                 epsabs=0.0, epsrel=1e-12)[0]
    return float(total + np.sum(fine))


def lorentz_norm(p: RearrangementProfile, q: float) -> float:
    """(integral_0^{4 pi^2} M_s^q ds/s)^(1/q)."""
    if not 1.0 <= q <= 2.0:
        raise DomainError(f"q must lie in [1, 2], got {q}")
    if p.l1 == 0:
        return 0.0
    return _segment_integral(p, p.total_measure, q) ** (1.0 / q)


def decay_functional(p: RearrangementProfile, delta: float, q: float = 2.0) -> float:
    """integral_0^delta M_s^q ds/s."""
    if not 0.0 < delta <= p.total_measure * (1 + 1e-12):
        raise DomainError(f"delta must lie in (0, {p.total_measure:.6g}], got {delta}")
    return _segment_integral(p, min(delta, p.total_measure), q)


def time_integrated_profile(fields: Sequence[SpectralField], times: Sequence[float]) -> RearrangementProfile:
    """Piecewise-linear s -> integral_0^T M_s(g(tau)) dtau (trapezoid in time)."""
    times = np.asarray(times, dtype=float)
    if len(fields) != len(times):
        raise ValueError("fields and times differ in length")
    profiles = [profile(g) for g in fields]
    w = np.zeros(len(times))
    if len(times) > 1:
        dt = np.diff(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    cum = sum(wi * pr.cum for wi, pr in zip(w, profiles))
    return RearrangementProfile.from_cum(profiles[0].cell_measure, cum)


def forcing_decay_functional(fields, times, delta: float, q: float = 2.0) -> float:
    """integral_0^delta (integral_0^T M_s(g(tau)) dtau)^q ds/s."""
    return decay_functional(time_integrated_profile(fields, times), delta, q)


def orlicz_integral(abs_values: np.ndarray, cell: float, lam: float, alpha: float) -> float:
    r = abs_values / lam
    r = r[r > 1.0]
    return float(cell * np.sum(r * np.log(r) ** alpha))


def llogl_norm(f: SpectralField, alpha: float, rtol: float = 1e-10) -> float:
    """Luxemburg norm of L(log L)^alpha: least lambda with the Orlicz integral <= 1."""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    a = np.abs(f.values).ravel()
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    cell = f.grid.cell_measure
    hi = float(a.max())  # the integrand vanishes once lambda >= max|f|
    lo = 0.5 * hi
    while orlicz_integral(a, cell, lo, alpha) <= 1.0:
        hi = lo
        lo *= 0.5
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if orlicz_integral(a, cell, mid, alpha) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def _as_field(x, grid: GridSpec) -> SpectralField:
    return x if isinstance(x, SpectralField) else SpectralField.from_coeffs(grid, x, check=False)


def apriori_bound_check(trajectory, g_times=None, g_fields=None, s_samples=None) -> float:
    """Largest value of M_s(w(t)) - M_s(w0) - int_0^t M_s(g) over sampled (s, t).

    ``trajectory`` holds samples with ``.t`` and ``.omega``. The forcing series is
    integrated by the trapezoid rule on ``g_times`` and interpolated linearly to the
    trajectory times; omit it for unforced runs.
    """
    grid = trajectory[0].omega.grid
    if s_samples is None:
        s_samples = default_s_samples(grid)
    s_samples = np.asarray(s_samples, dtype=float)
    m0 = maximal_function(profile(trajectory[0].omega), s_samples)
    t_traj = np.array([sample.t for sample in trajectory])
    forcing_int = np.zeros((len(t_traj), len(s_samples)))
    if g_fields is not None:
        g_times = np.asarray(g_times, dtype=float)
        mg = np.array([maximal_function(profile(_as_field(g, grid)), s_samples) for g in g_fields])
        cum = np.zeros_like(mg)
        if len(g_times) > 1:
            cum[1:] = np.cumsum(0.5 * (mg[1:] + mg[:-1]) * np.diff(g_times)[:, None], axis=0)
        for j in range(len(s_samples)):
            forcing_int[:, j] = np.interp(t_traj, g_times, cum[:, j])
    worst = -math.inf
    for i, sample in enumerate(trajectory):
        mt = maximal_function(profile(sample.omega), s_samples)
        worst = max(worst, float(np.max(mt - m0 - forcing_int[i])))
    return worst


def norm_report(f: SpectralField, qs=(1.0, 1.5, 2.0), alphas=(1.0,), deltas=None) -> dict:
    p = profile(f)
    if deltas is None:
        deltas = (0.01, 0.1, 1.0)
    return {
        "l1": l1_norm(f),
        "lorentz": {str(q): lorentz_norm(p, q) for q in qs},
        "llogl": {str(a): llogl_norm(f, a) for a in alphas},
        "decay": {str(d): decay_functional(p, d) for d in deltas},
    }
