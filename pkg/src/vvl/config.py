"""Line-oriented experiment configuration: ``section.key = value``.

Blank lines and ``#`` comments are ignored. Scenario and forcing parameters are
free-form ``scenario.<param>`` / ``forcing.<param>`` keys validated against the
parameter table of the selected kind; every other key must appear in SCHEMA.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .scenarios import FORCING_PARAMS, SCENARIO_PARAMS, ScenarioError, ScenarioRef


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    return tuple(float(s) for s in items)


def _even_n(text: str) -> int:
    n = int(text)
    if n % 2 or n < 8:
        raise ValueError(f"grid.n must be an even integer >= 8, got {n}")
    return n


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise ValueError(f"must be positive, got {x}")
    return x


def _positive_int(text: str) -> int:
    k = int(text)
    if k < 1:
        raise ValueError(f"must be a positive integer, got {k}")
    return k


def _mode(text: str) -> str:
    text = text.strip()
    if text not in ("strong", "weak-oscillatory"):
        raise ValueError(f"expected 'strong' or 'weak-oscillatory', got {text!r}")
    return text


def _velocity_kind(text: str) -> str:
    text = text.strip()
    if text not in ("taylor_green", "zero"):
        raise ValueError(f"expected 'taylor_green' or 'zero', got {text!r}")
    return text


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str | None  # None marks a required key
    help: str


SCHEMA: dict[str, Key] = {
    "grid.n": Key(_even_n, None, "grid points per axis (even, >= 8)"),
    "time.dt": Key(_positive, None, "time step"),
    "time.T": Key(_positive, None, "time horizon"),
    "physics.nu": Key(_floats, None, "viscosity, or a comma list for sweeps"),
    "physics.advection": Key(_bool, "true", "include the transport term"),
    "scenario.kind": Key(str.strip, None, "initial vorticity generator"),
    "forcing.kind": Key(str.strip, None, "vorticity forcing generator"),
    "forcing.mode": Key(_mode, "strong", "strong or weak-oscillatory forcing regime"),
    "output.dir": Key(str.strip, None, "output directory"),
    "output.snapshot_stride": Key(_positive_int, "10", "steps between stored snapshots"),
    "output.snapshots": Key(_bool, "true", "write omega_<step>.vvl files"),
    "output.plots": Key(_bool, "true", "write SVG plots"),
    "split.velocity": Key(_velocity_kind, "taylor_green", "frozen transport velocity"),
    "split.coarsest": Key(_positive_int, "8", "T/Dt at the coarsest splitting level"),
    "split.levels": Key(_positive_int, "4", "number of Dt halvings in the rate study"),
    "diagnose.r": Key(_floats, "0.1,0.5,1.0", "structure-function radii"),
    "diagnose.q": Key(_floats, "1,1.5,2", "Lorentz exponents"),
    "diagnose.alpha": Key(_floats, "1", "Orlicz exponents"),
    "diagnose.delta": Key(_floats, "0.01,0.1,1", "decay-functional cut-offs"),
    "pairing.samples": Key(_positive_int, "201", "time samples for weak pairings"),
}

REQUIRED = tuple(k for k, spec in SCHEMA.items() if spec.default is None)


def _is_param_key(key: str) -> bool:
    section, _, name = key.partition(".")
    return section in ("scenario", "forcing") and name != "kind" and (section, name) != ("forcing", "mode")


@dataclass(frozen=True)
class LabConfig:
    """Validated configuration; ``raw`` keeps the textual values for echo and round trips."""

    raw: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "_values", dict(self.raw))

    def get(self, key: str):
        text = self._values.get(key, SCHEMA[key].default)
        return SCHEMA[key].parse(text)

    @property
    def n(self) -> int:
        return self.get("grid.n")

    @property
    def nus(self) -> tuple[float, ...]:
        return self.get("physics.nu")

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output.dir"))

    def params(self, section: str) -> dict:
        prefix = section + "."
        return {k[len(prefix):]: v for k, v in self.raw if k.startswith(prefix) and _is_param_key(k)}

    @property
    def scenario(self) -> ScenarioRef:
        return ScenarioRef(self.get("scenario.kind"), self.params("scenario"))

    @property
    def forcing(self) -> ScenarioRef:
        return ScenarioRef(self.get("forcing.kind"), self.params("forcing"))

    def echo(self) -> dict:
        """Every schema key with its effective value, plus scenario parameters."""
        out = {k: self._values.get(k, spec.default) for k, spec in SCHEMA.items()}
        out.update({k: v for k, v in self.raw if _is_param_key(k)})
        return dict(sorted(out.items()))

    def with_overrides(self, overrides: dict[str, str]) -> "LabConfig":
        merged = dict(self.raw)
        merged.update(overrides)
        return validate(merged)


def _split_line(line: str, lineno: int) -> tuple[str, str] | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"expected 'section.key = value', got {text!r}", lineno)
    key, value = (s.strip() for s in text.split("=", 1))
    if "." not in key:
        raise ConfigError(f"key {key!r} lacks a section prefix", lineno, key)
    return key, value


def validate(values: dict[str, str], lines: dict[str, int] | None = None) -> LabConfig:
    lines = lines or {}
    for key, text in values.items():
        if key in SCHEMA:
            try:
                SCHEMA[key].parse(text)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}", lines.get(key), key) from None
        elif not _is_param_key(key):
            raise ConfigError(f"unknown key {key!r}", lines.get(key), key)
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key}", key=key)
    if not SCHEMA["physics.nu"].parse(values["physics.nu"]):
        raise ConfigError("physics.nu: empty viscosity list", lines.get("physics.nu"), "physics.nu")
    cfg = LabConfig(tuple(sorted(values.items())))
    try:
        cfg.scenario.resolved(SCENARIO_PARAMS, "scenario")
        cfg.forcing.resolved(FORCING_PARAMS, "forcing")
    except (ScenarioError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        out[key] = value
    return out


def parse_config_text(text: str, overrides: dict[str, str] | None = None) -> LabConfig:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        kv = _split_line(line, lineno)
        if kv is None:
            continue
        key, value = kv
        if key in values:
            raise ConfigError(f"duplicate key {key}", lineno, key)
        values[key] = value
        lines[key] = lineno
    values.update(overrides or {})
    return validate(values, lines)


def parse_config(path, overrides: dict[str, str] | None = None) -> LabConfig:
    return parse_config_text(Path(path).read_text(), overrides)


def format_config(cfg: LabConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.raw)
