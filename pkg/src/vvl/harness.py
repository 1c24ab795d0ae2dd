"""Experiment orchestration: runs, sweeps, splitting studies, diagnostics and manifests."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import LabConfig
from .diagnostics import (
    BalanceReport,
    SweepResult,
    balance_residual,
    default_test_family,
    enstrophy_probe,
    forcing_l2_sq,
    forcing_series,
    gronwall_probe,
    interpolation_probe,
    l2t_norm,
    s2_time,
    theorem_verdict,
    vorticity_decay_probe,
    weak_pairing_probe,
    zeta,
)
from .field import GridSpec, SpectralField, biot_savart, l2_norm
from .plots import emit_plots
from .rearrangement import apriori_bound_check, norm_report
from .scenarios import build_forcing, initial_vorticity, taylor_green
from .solver import SimulationConfig, StepSizeError, run
from .splitting import SplitConfig, convergence_study, defect_norm, split_run
from .storage import sha256, write_csv, write_json, write_ledger, write_pairing_table, write_rate_table, write_snapshot

log = logging.getLogger(__name__)


def thread_cap(default: int | None = None) -> int:
    env = os.environ.get("VVL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer VVL_THREADS=%r", env)
    return default or (os.cpu_count() or 1)


def run_dir_name(nu: float) -> str:
    return f"nu_{nu:.6g}"


@dataclass
class RunOutcome:
    nu: float
    trajectory: list | None = None
    ledger: object = None
    files: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def simulation_config(cfg: LabConfig, nu: float) -> SimulationConfig:
    return SimulationConfig(GridSpec(cfg.n), nu, cfg.get("time.dt"), cfg.get("time.T"),
                            cfg.scenario, cfg.forcing, cfg.get("output.snapshot_stride"),
                            cfg.get("physics.advection"))


def _persist_run(directory: Path, trajectory, ledger, cfg: LabConfig) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    if ledger is not None:
        files.append(write_ledger(directory / "ledger.csv", ledger))
    if trajectory and cfg.get("output.snapshots"):
        dt = cfg.get("time.dt")
        for s in trajectory:
            files.append(write_snapshot(directory / f"omega_{int(round(s.t / dt)):06d}.vvl", s.omega))
    return files


def execute_run(cfg: LabConfig, nu: float, out_dir: Path) -> RunOutcome:
    """One run; failures are captured and whatever was computed is still written."""
    directory = out_dir / run_dir_name(nu)
    try:
        trajectory, ledger = run(simulation_config(cfg, nu))
    except StepSizeError as exc:
        files = _persist_run(directory, getattr(exc, "trajectory", None), exc.ledger, cfg)
        return RunOutcome(nu, files=files, error=str(exc))
    except Exception as exc:  # noqa: BLE001 - reported per run, sweep continues
        log.error("run nu=%g failed: %s", nu, exc)
        return RunOutcome(nu, error=f"{type(exc).__name__}: {exc}")
    files = _persist_run(directory, trajectory, ledger, cfg)
    return RunOutcome(nu, trajectory, ledger, files)


@dataclass
class SweepOutcome:
    runs: list
    result: SweepResult | None
    report: BalanceReport | None
    files: list
    notes: list

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.runs) and not any(n.startswith("error") for n in self.notes)


def pairing_rows(cfg: LabConfig, nus) -> list:
    """Time-integrated pairings of the velocity forcing with the fixed test family."""
    grid = GridSpec(cfg.n)
    family = default_test_family(grid)
    times = np.linspace(0.0, cfg.get("time.T"), cfg.get("pairing.samples"))
    rows = []
    for nu in nus:
        table = weak_pairing_probe(forcing_series(build_forcing(cfg.forcing, grid, nu), times), family)
        rows.extend((nu, name, value) for name, value in table.rows())
    return rows


def run_sweep(cfg: LabConfig, out_dir: Path | None = None) -> SweepOutcome:
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nus = sorted(set(cfg.nus), reverse=True)
    if not nus:
        raise ValueError("empty viscosity list")
    workers = min(len(nus), thread_cap())
    with ThreadPoolExecutor(max_workers=workers) as pool:
        runs = list(pool.map(lambda nu: execute_run(cfg, nu, out_dir), nus))
    # everything below runs after the join, on this thread only
    files = [f for r in runs for f in r.files]
    notes = [f"error: nu={r.nu:g}: {r.error}" for r in runs if not r.ok]
    good = [r for r in runs if r.ok]
    result = report = None
    if good:
        result = SweepResult([r.nu for r in good], [r.ledger for r in good],
                             [r.trajectory for r in good], cfg.get("forcing.mode"))
    if result is not None and len(good) >= 3:
        report = theorem_verdict(result)
        files.append(write_json(out_dir / "report.json", report.to_json()))
    elif result is not None:
        notes.append(f"verdict skipped: {len(good)} completed run(s), at least 3 needed")
    if cfg.forcing.kind == "counterexample" and good:
        try:
            files.append(write_pairing_table(out_dir / "pairing.csv", pairing_rows(cfg, [r.nu for r in good])))
        except Exception as exc:  # noqa: BLE001
            notes.append(f"error: pairing table: {exc}")
    if cfg.get("output.plots") and good:
        try:
            files.extend(emit_plots(out_dir, [r.ledger for r in good], report))
        except Exception as exc:  # noqa: BLE001 - plots are optional
            log.warning("plot emission failed: %s", exc)
            notes.append(f"warning: plots: {exc}")
    return SweepOutcome(runs, result, report, files, notes)


def simulate(cfg: LabConfig, out_dir: Path) -> tuple[list, list]:
    """Each viscosity as an independent run, plus norm reports of the initial and final vorticity."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files, notes = [], []
    outcomes = [execute_run(cfg, nu, out_dir) for nu in sorted(set(cfg.nus), reverse=True)]
    for r in outcomes:
        files.extend(r.files)
        if not r.ok:
            notes.append(f"error: nu={r.nu:g}: {r.error}")
            continue
        d = out_dir / run_dir_name(r.nu)
        files.append(write_json(d / "norms.json", {"initial": norm_report(r.trajectory[0].omega),
                                                   "final": norm_report(r.trajectory[-1].omega)}))
    good = [r.ledger for r in outcomes if r.ok]
    if cfg.get("output.plots") and good:
        files.extend(emit_plots(out_dir, good))
    return files, notes


def split_study(cfg: LabConfig, out_dir: Path) -> tuple[list, list]:
    """Rate table and defect series of the splitting scheme for the first viscosity."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(cfg.n)
    nu, T = cfg.nus[0], cfg.get("time.T")
    beta0 = initial_vorticity(cfg.scenario, grid)
    U = taylor_green(grid, 0.0, 0.0).velocity if cfg.get("split.velocity") == "taylor_green" else None
    forcing = build_forcing(cfg.forcing, grid, nu)
    g = None
    if not forcing.is_zero:
        g = (lambda t: SpectralField.from_coeffs(grid, forcing.vorticity_coeffs(t), check=False))
    coarsest = cfg.get("split.coarsest")
    dts = [T / (coarsest * 2**k) for k in range(cfg.get("split.levels"))]
    base = SplitConfig(grid, nu, dts[0], T, beta0, U, g)
    table = convergence_study(base, dts)
    files = write_rate_table(out_dir, table)
    rows = []
    for Dt in dts:
        series = defect_norm(split_run(base.with_dt(Dt), record="substeps"), U, g, nu, Dt)
        rows.append((Dt, series.max))
    files.append(write_csv(out_dir / "defect.csv", ("dt", "defect_max"), rows))
    notes = [f"note: {n}" for n in table.notes]
    return files, notes


def diagnose(cfg: LabConfig, out_dir: Path) -> tuple[list, list]:
    """Runs every viscosity and evaluates the energy, enstrophy, rearrangement and structure probes."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(cfg.n)
    files, notes, per_nu = [], [], {}
    radii = [rr for rr in cfg.get("diagnose.r") if rr >= grid.h]
    notes.extend(f"note: r={rr:g} skipped, below the grid spacing" for rr in cfg.get("diagnose.r")
                 if rr < grid.h)
    outcomes = [execute_run(cfg, nu, out_dir) for nu in sorted(set(cfg.nus), reverse=True)]
    for r in outcomes:
        files.extend(r.files)
        if not r.ok:
            notes.append(f"error: nu={r.nu:g}: {r.error}")
            continue
        forcing = build_forcing(cfg.forcing, grid, r.nu)
        led, traj = r.ledger, r.trajectory
        f_sq = forcing_l2_sq(forcing, led.times)
        entry = {
            "balance_residual_final": float(balance_residual(led)[-1]),
            "identity_residual_max": float(np.max(np.abs(led.identity_residual))),
            "gronwall_slack": gronwall_probe(led, l2t_norm(f_sq, led.times)),
            "apriori_violation": apriori_bound_check(
                traj, led.times, [forcing.vorticity_coeffs(t) for t in led.times]),
            "s2_time": {f"{rr:g}": s2_time(traj, rr) for rr in radii},
            "interpolation_ratio": {f"{rr:g}": interpolation_probe(traj[-1].u, traj[-1].omega, rr).ratio
                                    for rr in radii},
            "norms_initial": norm_report(traj[0].omega, cfg.get("diagnose.q"), cfg.get("diagnose.alpha"),
                                         cfg.get("diagnose.delta")),
            "velocity_l2_final": l2_norm(traj[-1].u),
        }
        if r.nu > 0:
            entry["zeta_T"] = float(zeta(led)[-1])
            entry["enstrophy_slack"] = enstrophy_probe(led, f_sq)
        per_nu[f"{r.nu:g}"] = entry
    good = [r for r in outcomes if r.ok]
    summary = {"runs": per_nu}
    viscous = [r for r in good if r.nu > 0]
    if viscous:
        sweep = SweepResult([r.nu for r in viscous], [r.ledger for r in viscous],
                            [r.trajectory for r in viscous], cfg.get("forcing.mode"))
        probe = vorticity_decay_probe(sweep)
        summary["vorticity_decay"] = {"nus": probe.nus, "sup": probe.sup_values, "ratio": probe.ratio,
                                      "notes": probe.notes}
    files.append(write_json(out_dir / "diagnostics.json", summary))
    return files, notes


def scenario_dump(cfg: LabConfig, out_dir: Path) -> tuple[list, list]:
    """Initial vorticity, its velocity, and the forcing at mid-horizon, as snapshots plus norms."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = GridSpec(cfg.n)
    omega0 = initial_vorticity(cfg.scenario, grid)
    files = [write_snapshot(out_dir / "omega0.vvl", omega0),
             write_snapshot(out_dir / "u0.vvl", biot_savart(omega0))]
    t_mid = 0.5 * cfg.get("time.T")
    for nu in sorted(set(cfg.nus), reverse=True):
        forcing = build_forcing(cfg.forcing, grid, nu)
        g = SpectralField.from_coeffs(grid, forcing.vorticity_coeffs(t_mid), check=False)
        files.append(write_snapshot(out_dir / f"forcing_{run_dir_name(nu)}.vvl", g))
    files.append(write_json(out_dir / "norms.json", norm_report(omega0, cfg.get("diagnose.q"),
                                                                cfg.get("diagnose.alpha"),
                                                                cfg.get("diagnose.delta"))))
    return files, []


def write_manifest(out_dir: Path, command: str, cfg: LabConfig, files, wall_time: float, notes) -> Path:
    out_dir = Path(out_dir)
    inventory = {}
    for f in sorted({Path(f) for f in files}):
        inventory[str(f.relative_to(out_dir)) if f.is_relative_to(out_dir) else str(f)] = sha256(f)
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.echo(),
        "wall_time_s": wall_time,
        "files": inventory,
        "notes": list(notes),
    }
    return write_json(out_dir / "manifest.json", manifest)


COMMANDS = ("simulate", "sweep", "split", "diagnose", "scenario-dump")


def execute(command: str, cfg: LabConfig, out_dir: Path | None = None) -> tuple[bool, list, list]:
    """Run one CLI command; returns (success, files, notes). The manifest is always written."""
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    if command == "sweep":
        outcome = run_sweep(cfg, out_dir)
        files, notes, ok = outcome.files, outcome.notes, outcome.ok
    else:
        handler = {"simulate": simulate, "split": split_study, "diagnose": diagnose,
                   "scenario-dump": scenario_dump}[command]
        files, notes = handler(cfg, out_dir)
        ok = not any(n.startswith("error") for n in notes)
    write_manifest(out_dir, command, cfg, files, time.perf_counter() - start, notes)
    return ok, files, notes
