"""Scenario configuration: strict schema, lossless round-trip.

Config files are TOML (or JSON); unknown keys are rejected because a
silently ignored physics parameter produces wrong science, not an error
message.  beta may be the literal `inf` for zero temperature.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import ConfigurationError

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


@dataclass
class StateConfig:
    kind: str = "thermal"
    beta: float = math.inf
    squeeze_r: float = 0.0
    squeeze_phi: float = 0.0


@dataclass
class FieldConfig:
    mass: float = 0.0
    box_size: float = 200.0
    uv_cutoff: float = 6.0
    hbar: float = 1.0
    state: StateConfig = dc_field(default_factory=StateConfig)


@dataclass
class ParticleConfig:
    kind: str = "dipole"               # dipole | monopole
    mass: float = 1.0
    charge: float = 0.1
    position: list = dc_field(default_factory=lambda: [50.0])
    velocity: list = dc_field(default_factory=lambda: [0.0])
    frequency: float = 1.0             # dipole internal frequency
    q0: float = 0.0
    qdot0: float = 0.0
    external_force: list = dc_field(default_factory=lambda: [0.0])


@dataclass
class GridConfig:
    t_start: float = 0.0
    t_end: float = 16.0
    points: int = 512


@dataclass
class EnsembleConfig:
    size: int = 1
    seed: int = 0
    zero_noise: bool = False
    block_size: int = 64
    burn_in: float = 0.0               # window start for spectral statistics
    probe_frequencies: list = dc_field(default_factory=list)


@dataclass
class ToleranceConfig:
    tol_sc: float = 1e-10
    tol_ode: float = 1e-10
    eps_psd: float = 1e-10


@dataclass
class FdrConfig:
    kappa_cutoff: float = 0.0          # 0 -> half the grid Nyquist
    residual_tolerance: float = 1e-2


@dataclass
class QbmConfig:
    coupling: float = 1.0
    cutoff: float = 2.0                # ohmic exponential cutoff frequency
    k_max: float = 12.0
    span: float = 40.0
    points: int = 1024
    residual_tolerance: float = 1e-2


@dataclass
class NoiseCheckConfig:
    modes: int = 8
    grid_points: int = 256
    realizations: int = 4096
    max_exceed_fraction: float = 0.01
    min_realizations: int = 256        # CLT validity guard for the bands


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = dc_field(default_factory=lambda: ["csv", "json"])
    trajectories: bool = False


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    dimension: str = "1+1"
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    particles: list = dc_field(default_factory=lambda: [ParticleConfig()])
    grid: GridConfig = dc_field(default_factory=GridConfig)
    ensemble: EnsembleConfig = dc_field(default_factory=EnsembleConfig)
    tolerances: ToleranceConfig = dc_field(default_factory=ToleranceConfig)
    fdr: FdrConfig = dc_field(default_factory=FdrConfig)
    qbm: QbmConfig = dc_field(default_factory=QbmConfig)
    noise_check: NoiseCheckConfig = dc_field(default_factory=NoiseCheckConfig)
    output: OutputConfig = dc_field(default_factory=OutputConfig)

    def validate(self):
        if self.dimension not in ("1+1", "3+1"):
            raise ConfigurationError(f"dimension must be '1+1' or '3+1', got {self.dimension!r}")
        g = self.grid
        if not g.t_end > g.t_start:
            raise ConfigurationError("grid.t_end must exceed grid.t_start")
        if g.points < 2:
            raise ConfigurationError("grid.points must be >= 2")
        e = self.ensemble
        if e.size < 1:
            raise ConfigurationError("ensemble.size must be >= 1")
        t = self.tolerances
        for name in ("tol_sc", "tol_ode", "eps_psd"):
            if getattr(t, name) <= 0:
                raise ConfigurationError(f"tolerances.{name} must be positive")
        if not (self.field.state.beta > 0):
            raise ConfigurationError("field.state.beta must be positive (inf allowed)")
        for p in self.particles:
            if p.kind not in ("dipole", "monopole"):
                raise ConfigurationError(f"particle kind {p.kind!r} unknown")
            if p.mass <= 0:
                raise ConfigurationError("particle mass must be positive")
        return self


_NESTED = {
    "field": FieldConfig,
    "state": StateConfig,
    "grid": GridConfig,
    "ensemble": EnsembleConfig,
    "tolerances": ToleranceConfig,
    "fdr": FdrConfig,
    "qbm": QbmConfig,
    "noise_check": NoiseCheckConfig,
    "output": OutputConfig,
}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a table")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigurationError(f"{path}.{key}: unknown key (strict mode)")
        if key == "particles":
            if not isinstance(value, list):
                raise ConfigurationError(f"{path}.particles: expected an array of tables")
            kwargs[key] = [_build(ParticleConfig, v, f"{path}.particles[{i}]")
                           for i, v in enumerate(value)]
        elif key in _NESTED and isinstance(value, dict):
            kwargs[key] = _build(_NESTED[key], value, f"{path}.{key}")
        else:
            if key == "beta" and isinstance(value, str):
                if value.lower() in ("inf", "infinity"):
                    value = math.inf
                else:
                    raise ConfigurationError(f"{path}.beta: bad value {value!r}")
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "scenario").validate()


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text())
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"{path}: parse error: {exc}") from exc
    return config_from_dict(data)


def canonical_json(cfg: ScenarioConfig) -> str:
    """Deterministic serialization used for hashing and round-trips."""
    return json.dumps(config_to_dict(cfg), sort_keys=True, allow_nan=True)
