"""Run configuration: a single TOML document describing the model window,
the potential, grid resolution, solver and thermodynamics knobs, and the
output location. CLI flags override file values."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .potentials import (
    ModelParams,
    Potential,
    constant_potential,
    load_table_csv,
    polynomial_potential,
    separable_potential,
)

__all__ = ["ConfigError", "RunConfig", "load_run_config"]


class ConfigError(ValueError):
    """The configuration file is missing, malformed, or out of range."""


@dataclass(frozen=True)
class GridConfig:
    t_nodes: int = 64
    quad_order: int = 64
    t_min_factor: float = 0.25
    tail_fraction: float = 0.35
    s_min_factor: float = 1e-3


@dataclass(frozen=True)
class SolverConfig:
    tol: float | None = None
    tol_factor: float = 1e-10
    max_iters: int = 10000
    damping_floor: float = 1.0 / 16.0
    newton_accel: bool = True


@dataclass(frozen=True)
class HypothesisConfig:
    safety: float = 1.001
    x_points: int = 129


@dataclass(frozen=True)
class ThermoConfig:
    half_width_factor: float = 0.02
    n_samples: int = 33
    center_factor: float = 1.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    potential_spec: dict
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    hypothesis: HypothesisConfig = field(default_factory=HypothesisConfig)
    thermo: ThermoConfig = field(default_factory=ThermoConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = "."

    def build_potential(self) -> Potential:
        spec = dict(self.potential_spec)
        kind = spec.pop("kind", None)
        if kind == "constant":
            return constant_potential(float(spec["value"]), self.model)
        if kind == "separable":
            return separable_potential(spec["coeffs"], self.model)
        if kind == "polynomial":
            return polynomial_potential(spec["coeffs2d"], self.model)
        if kind == "table":
            path = spec["path"]
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            return load_table_csv(path, self.model)
        raise ConfigError(f"unknown potential kind {kind!r}")


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _fill(cls, sec: dict, name: str):
    known = set(cls.__dataclass_fields__)
    extra = set(sec) - known
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    try:
        return cls(**sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{name}] section: {exc}") from exc


def load_run_config(path) -> RunConfig:
    """Parse and validate a run configuration from a TOML file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc

    msec = _section(doc, "model")
    try:
        model = ModelParams(float(msec["epsilon"]), float(msec["debye"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad [model] section: {exc}") from exc

    psec = _section(doc, "potential")
    if "kind" not in psec:
        raise ConfigError("[potential] needs a 'kind'")

    cfg = RunConfig(
        model=model,
        potential_spec=dict(psec),
        grid=_fill(GridConfig, _section(doc, "grid"), "grid"),
        solver=_fill(SolverConfig, _section(doc, "solver"), "solver"),
        hypothesis=_fill(HypothesisConfig, _section(doc, "hypothesis"), "hypothesis"),
        thermo=_fill(ThermoConfig, _section(doc, "thermo"), "thermo"),
        output=_fill(OutputConfig, _section(doc, "output"), "output"),
        base_dir=os.path.dirname(os.path.abspath(path)),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    g, s, t = cfg.grid, cfg.solver, cfg.thermo
    if g.t_nodes < 16:
        raise ConfigError("grid.t_nodes must be at least 16")
    if g.quad_order < 16:
        raise ConfigError("grid.quad_order must be at least 16")
    if not (0.0 < g.t_min_factor < 1.0):
        raise ConfigError("grid.t_min_factor must lie in (0, 1)")
    if not (0.0 < g.s_min_factor < 0.1):
        raise ConfigError("grid.s_min_factor must lie in (0, 0.1)")
    if s.tol is not None and s.tol <= 0:
        raise ConfigError("solver.tol must be positive")
    if s.tol_factor <= 0:
        raise ConfigError("solver.tol_factor must be positive")
    if s.max_iters < 1:
        raise ConfigError("solver.max_iters must be positive")
    if not (0.0 < s.damping_floor <= 1.0):
        raise ConfigError("solver.damping_floor must lie in (0, 1]")
    if cfg.hypothesis.safety < 1.0:
        raise ConfigError("hypothesis.safety must be >= 1")
    if t.n_samples < 17:
        raise ConfigError("thermo.n_samples must be at least 17")
    if t.half_width_factor <= 0:
        raise ConfigError("thermo.half_width_factor must be positive")
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be 'csv' or 'json'")
