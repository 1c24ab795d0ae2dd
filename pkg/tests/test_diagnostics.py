import json
import math

import numpy as np
import pytest

from vvl.field import ConsistencyError, GridSpec, SpectralField, VelocityField, biot_savart, l2_norm, to_spectral
from vvl.diagnostics import (
    ConfigurationError,
    DomainError,
    ResampleError,
    SweepResult,
    balance_residual,
    convergence_metrics,
    default_test_family,
    enstrophy_probe,
    forcing_l2_sq,
    gronwall_probe,
    interpolation_probe,
    l2t_norm,
    l2t_velocity_norm,
    radial_test_bump,
    s2_time,
    structure_function,
    structure_function_direct,
    theorem_verdict,
    vorticity_decay_probe,
    weak_pairing_probe,
    zeta,
)
from vvl.scenarios import ScenarioRef, build_forcing, random_smooth_field
from vvl.solver import SimulationConfig, TrajectorySample, run


def tg_run(nu, n=32, T=1.0, dt=0.01, stride=10):
    return run(SimulationConfig(GridSpec(n), nu, dt, T, initial=ScenarioRef("taylor_green"), snapshot_stride=stride))


def zero_ledger():
    return run(SimulationConfig(GridSpec(16), 0.1, 0.1, 1.0))[1]


def sample_velocity(grid, seed, k_max=6):
    return biot_savart(random_smooth_field(grid, seed, k_max=k_max))


class TestEnergyProbes:
    def test_zero_run(self):
        led = zero_ledger()
        assert np.all(balance_residual(led) == 0)
        assert np.all(zeta(led) == 0)
        assert gronwall_probe(led, 0.0) == 0.0

    def test_taylor_green_closed_forms(self):
        nu = 0.01
        _, led = tg_run(nu, dt=1e-3, stride=100)
        exact = np.pi**2 * (1 - np.exp(-4 * nu * led.times))
        assert np.max(np.abs(balance_residual(led) + exact)) < 1e-6
        assert np.max(np.abs(zeta(led) - exact)) < 1e-6
        assert np.all(np.diff(zeta(led)) >= 0)

    def test_residual_identity_of_the_ledger(self):
        cfg = SimulationConfig(GridSpec(32), 0.02, 5e-3, 0.5, initial=ScenarioRef("random_smooth"),
                               forcing=ScenarioRef("random_smooth", {"seed": 1}))
        _, led = run(cfg)
        diff = balance_residual(led) + led.dissipation_cum - led.identity_residual
        assert np.max(np.abs(diff)) < 1e-13

    def test_explicit_initial_norm(self):
        _, led = tg_run(0.01)
        u0 = math.sqrt(2 * led.energy[0])
        assert np.allclose(balance_residual(led, u0), balance_residual(led), atol=1e-14)

    def test_euler_taylor_green_is_balanced(self):
        _, led = tg_run(0.0)
        assert np.max(np.abs(balance_residual(led))) < 1e-8

    def test_zeta_needs_viscosity(self):
        _, led = tg_run(0.0, T=0.1)
        with pytest.raises(DomainError):
            zeta(led)

    def test_zeta_increasing_in_viscosity(self):
        values = [zeta(tg_run(nu, T=0.5)[1])[-1] for nu in (0.01, 0.05, 0.1, 0.25)]
        assert np.all(np.diff(values) > 0)

    def test_gronwall_unforced_and_forced(self):
        _, led = tg_run(0.01)
        assert gronwall_probe(led, 0.0) >= -1e-6
        cfg = SimulationConfig(GridSpec(32), 0.01, 0.01, 1.0, initial=ScenarioRef("taylor_green"),
                               forcing=ScenarioRef("random_smooth", {"amplitude": 0.1}))
        _, led = run(cfg)
        f_sq = forcing_l2_sq(build_forcing(cfg.forcing, cfg.grid, cfg.nu), led.times)
        # the slack vanishes at t = 0 and is non-negative afterwards
        assert gronwall_probe(led, l2t_norm(f_sq, led.times)) >= 0
        with pytest.raises(ValueError):
            gronwall_probe(led, math.inf)

    def test_enstrophy_inequality(self):
        cfg = SimulationConfig(GridSpec(32), 0.01, 0.01, 1.0, initial=ScenarioRef("random_smooth"),
                               forcing=ScenarioRef("random_smooth", {"seed": 2, "amplitude": 3.0}))
        _, led = run(cfg)
        f_sq = forcing_l2_sq(build_forcing(cfg.forcing, cfg.grid, cfg.nu), led.times)
        assert enstrophy_probe(led, f_sq) >= -1e-6
        _, euler = tg_run(0.0, T=0.1)
        with pytest.raises(DomainError):
            enstrophy_probe(euler, np.zeros(len(euler)))

    def test_l2t_norm(self):
        t = np.linspace(0, 2, 201)
        assert l2t_norm(np.full_like(t, 3.0), t) == pytest.approx(math.sqrt(6.0))


class TestDecayProbe:
    def test_taylor_green(self):
        sweep = SweepResult([0.02, 0.01], [tg_run(0.02)[1], tg_run(0.01)[1]], [[], []])
        probe = vorticity_decay_probe(sweep)
        assert probe.nus == [0.02, 0.01]
        assert all(math.isfinite(v) and v > 0 for v in probe.sup_values)

    def test_vanishes_at_initial_time(self):
        _, led = tg_run(0.01)
        q = np.sqrt(0.01 * led.times * led.enstrophy)
        assert q[0] == 0

    def test_inviscid_excluded(self):
        sweep = SweepResult([0.01, 0.0], [tg_run(0.01)[1], tg_run(0.0)[1]], [[], []])
        probe = vorticity_decay_probe(sweep)
        assert probe.nus == [0.01]
        assert any("excluded" in note for note in probe.notes)
        assert probe.ratio == 1.0


class TestStructureFunction:
    def test_constant_field(self):
        g = GridSpec(16)
        v = VelocityField.from_values(g, np.full((16, 16), 2.0), np.full((16, 16), -1.0))
        assert structure_function(v, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_double_loop(self):
        g = GridSpec(16)
        x, _ = g.coordinates()
        v = VelocityField.from_values(g, np.sin(x), np.zeros((16, 16)))
        for k in (1, 2, 3):
            r = k * g.h
            assert structure_function(v, r) == pytest.approx(structure_function_direct(v, r), abs=1e-12)

    def test_single_offset_closed_form(self):
        # r = h: offsets (+-1, 0), (0, +-1); |sin(x + h) - sin x|^2 integrates to 4 pi^2 (1 - cos h)
        g = GridSpec(16)
        x, _ = g.coordinates()
        v = VelocityField.from_values(g, np.sin(x), np.zeros((16, 16)))
        expected = math.sqrt(0.5 * 4 * np.pi**2 * (1 - math.cos(g.h)))
        assert structure_function(v, g.h) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_bounded_by_twice_the_norm(self, seed):
        rng = np.random.default_rng(seed)
        g = GridSpec(32)
        v = VelocityField.from_values(g, rng.standard_normal((32, 32)), rng.standard_normal((32, 32)))
        for r in (g.h, 0.5, 1.5, np.pi):
            assert structure_function(v, r) <= 2 * l2_norm(v) + 1e-12

    def test_monotone_in_radius_for_low_modes(self):
        g = GridSpec(64)
        v = sample_velocity(g, 3, k_max=3)
        radii = g.h * np.arange(1, 20)
        vals = [structure_function(v, r) for r in radii]
        assert np.all(np.diff(vals) >= -1e-12)

    def test_scalar_fields_accepted(self):
        g = GridSpec(16)
        f = random_smooth_field(g, 1)
        assert structure_function(f, 0.8) == pytest.approx(structure_function_direct(f, 0.8), rel=1e-12)

    def test_below_grid_spacing(self):
        with pytest.raises(DomainError):
            structure_function(sample_velocity(GridSpec(16), 0, k_max=4), 0.1)

    def test_time_integrated(self):
        g = GridSpec(16)
        v = sample_velocity(g, 0, k_max=4)
        w = random_smooth_field(g, 0, k_max=4)
        traj = [TrajectorySample(t, w) for t in (0.0, 0.5, 1.0)]
        assert s2_time(traj, 1.0) == pytest.approx(structure_function(v, 1.0), rel=1e-10)


class TestInterpolationProbe:
    def test_single_mode(self):
        g = GridSpec(32)
        x, _ = g.coordinates()
        u = VelocityField.from_values(g, np.zeros((32, 32)), -np.cos(x))
        w = to_spectral(np.sin(x))
        sample = interpolation_probe(u, w, 0.5)
        assert sample.omega_l2 == pytest.approx(math.sqrt(2) * np.pi)
        assert sample.r_grad_omega == pytest.approx(0.5 * math.sqrt(2) * np.pi)
        assert sample.s2_over_r == pytest.approx(structure_function_direct(u, 0.5) / 0.5, rel=1e-12)
        assert 0 < sample.ratio < math.inf

    def test_zero(self):
        g = GridSpec(16)
        z = SpectralField.zeros(g)
        sample = interpolation_probe(VelocityField(g, z, z), z, 0.5)
        assert sample.as_tuple() == (0.0, 0.0, 0.0)

    def test_curl_mismatch(self):
        g = GridSpec(16)
        w = random_smooth_field(g, 0)
        with pytest.raises(ConsistencyError):
            interpolation_probe(biot_savart(w), 2.0 * w, 0.5)

    def test_ensemble_ratio_is_bounded(self):
        g = GridSpec(64)
        ratios = []
        for seed in range(50):
            w = random_smooth_field(g, seed, slope=float(seed % 3), k_max=3 + seed % 15)
            for r in (0.1, 0.5, 1.0):
                ratios.append(interpolation_probe(biot_savart(w), w, r).ratio)
        assert all(math.isfinite(x) and x > 0 for x in ratios)
        assert max(ratios) < 10.0


class TestConvergenceMetrics:
    def test_identical_runs(self):
        traj, _ = tg_run(0.01)
        assert convergence_metrics(traj, traj) == (0.0, 0.0)

    def test_metric_properties(self):
        runs = [tg_run(nu)[0] for nu in (0.05, 0.02, 0.01)]
        d = {(i, j): convergence_metrics(runs[i], runs[j]) for i in range(3) for j in range(3)}
        for k in range(2):
            for i in range(3):
                for j in range(3):
                    assert d[i, j][k] == pytest.approx(d[j, i][k], abs=1e-14)
                    for m in range(3):
                        assert d[i, j][k] <= d[i, m][k] + d[m, j][k] + 1e-10

    def test_taylor_green_halving(self):
        nu = 0.05
        a, _ = tg_run(nu, T=2.0)
        b, _ = tg_run(nu / 2, T=2.0)
        t = np.array([s.t for s in a])
        per_component = np.pi * np.max(np.abs(np.exp(-2 * nu * t) - np.exp(-nu * t)))
        _, ct = convergence_metrics(a, b)
        # each velocity component has norm pi e^{-2 nu t}; the vector distance adds them in quadrature
        assert ct == pytest.approx(math.sqrt(2) * per_component, abs=1e-6)
        gap_x = max(l2_norm(sa.u.u_x - sb.u.u_x) for sa, sb in zip(a, b))
        assert gap_x == pytest.approx(per_component, abs=1e-6)

    def test_nested_grids_by_truncation(self):
        a, _ = tg_run(0.02, n=32)
        b, _ = tg_run(0.02, n=64)
        assert convergence_metrics(a, b)[1] < 1e-10

    def test_non_nested_grids(self):
        a, _ = tg_run(0.02, n=32, T=0.1)
        b, _ = tg_run(0.02, n=48, T=0.1)
        with pytest.raises(ResampleError):
            convergence_metrics(a, b)

    def test_disjoint_times(self):
        g = GridSpec(16)
        w = random_smooth_field(g, 0)
        with pytest.raises(ResampleError):
            convergence_metrics([TrajectorySample(0.0, w)], [TrajectorySample(0.5, w)])


class TestWeakPairings:
    def test_family_layout(self):
        fam = default_test_family(GridSpec(32))
        assert len(fam) == 9 and "bump" in fam
        scalars = default_test_family(GridSpec(32), vector=False)
        assert set(scalars) == set(fam)

    def test_bump_support(self):
        g = GridSpec(64)
        X, Y = g.centered_coordinates()
        b = radial_test_bump(g).values
        assert np.all(b[np.hypot(X, Y) >= 1.0] == 0)
        assert b.max() > 0

    def test_orthogonal_family_is_diagonal(self):
        g = GridSpec(32)
        fam = default_test_family(g, vector=False)
        modes = {k: v for k, v in fam.items() if k != "bump"}
        table = np.array([weak_pairing_probe([(0.0, f), (1.0, f)], modes).integrated for f in modes.values()])
        off = table - np.diag(np.diag(table))
        assert np.max(np.abs(off)) < 1e-10
        assert np.allclose(np.diag(table), 2 * np.pi**2)

    def test_zero_field(self):
        g = GridSpec(16)
        z = SpectralField.zeros(g)
        fam = default_test_family(g)
        table = weak_pairing_probe([(0.0, VelocityField(g, z, z)), (1.0, VelocityField(g, z, z))], fam)
        assert np.all(table.integrated == 0)
        assert [name for name, _ in table.rows()] == list(fam)


@pytest.fixture(scope="module")
def tg_sweep():
    nus = [0.04, 0.02, 0.01]
    runs = [tg_run(nu) for nu in nus]
    return SweepResult(nus, [r[1] for r in runs], [r[0] for r in runs])


class TestVerdict:
    def test_taylor_green_sweep(self, tg_sweep):
        rep = theorem_verdict(tg_sweep)
        assert rep.flags["strong_convergence"] is True
        assert rep.flags["anomalous_dissipation"] is False
        assert rep.flags["balance_residual_to_zero"] is True
        assert rep.flags["equivalence_consistent"] is True
        exact = [np.pi**2 * (1 - np.exp(-4 * nu)) for nu in tg_sweep.nus]
        assert np.allclose(rep.zeta_T, exact, atol=1e-5)

    def test_report_json(self, tg_sweep):
        doc = json.loads(json.dumps(theorem_verdict(tg_sweep).to_json()))
        assert set(doc) == {"nus", "zeta_T", "l2l2_gaps", "ctl2_gaps", "balance_residual_final", "flags"}
        assert len(doc["l2l2_gaps"]) == 2

    def test_weak_mode_reports_trivial_limit(self, tg_sweep):
        sweep = SweepResult(tg_sweep.nus, tg_sweep.ledgers, tg_sweep.trajectories, "weak-oscillatory")
        flags = theorem_verdict(sweep).flags
        assert flags["limit_balance_residual"] == 0.0
        assert "equivalence_consistent" not in flags

    def test_too_few_viscosities(self, tg_sweep):
        with pytest.raises(ConfigurationError):
            theorem_verdict(SweepResult(tg_sweep.nus[:1], tg_sweep.ledgers[:1], tg_sweep.trajectories[:1]))

    def test_inviscid_member(self):
        runs = [tg_run(nu, T=0.1) for nu in (0.02, 0.01, 0.0)]
        sweep = SweepResult([0.02, 0.01, 0.0], [r[1] for r in runs], [r[0] for r in runs])
        with pytest.raises(ConfigurationError):
            theorem_verdict(sweep)

    @pytest.mark.parametrize("nus,mode", [([0.01, 0.02, 0.005], "strong"), ([0.02, 0.01, 0.005], "other")])
    def test_sweep_validation(self, nus, mode):
        with pytest.raises(ConfigurationError):
            SweepResult(nus, [None] * 3, [None] * 3, mode)

    def test_velocity_norm(self):
        traj, _ = tg_run(0.0, T=1.0)
        assert l2t_velocity_norm(traj) == pytest.approx(math.sqrt(2) * np.pi, rel=1e-12)
