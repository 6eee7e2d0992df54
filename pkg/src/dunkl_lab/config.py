"""Experiment configuration: flat INI-style files with section headers.

Every run is a pure function of (config, seed), so the config format is
deliberately small: four sections describing the geometry, the grid, the
kernel and the operator, plus one section for the experiment driver.
Unknown sections or keys are hard errors; a config that parses is a config
whose every key is meaningful.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, fields

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "parse_config_text",
    "config_to_text",
    "worker_count",
]

_WORKERS_ENV = "DUNKL_LAB_WORKERS"

_EXPERIMENTS = ("exp_weak_11", "exp_h1_atoms", "exp_bmo_blo", "exp_kernel_bounds")
_OPERATORS = ("maximal", "gfunc", "variation", "oscillation")
_FAMILIES = ("z2", "dihedral")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # [rootsys]
    family: str = "z2"
    multiplicities: tuple = (1.0,)
    dihedral_order: int = 4
    # [grid]
    box_halfwidth: float = 12.0
    resolution: int = 256
    grading: float = 2.0
    # [kernel]
    derivative_order: int = 0
    fd_relative_step: float = 0.01
    richardson_levels: int = 2
    # [operator]
    operator: str = "maximal"
    sigma: float = 2.0
    t_min: float = 1e-3
    t_max: float = 1e2
    time_count: int = 64
    bracket_count: int = 16
    # [experiment]
    experiment: str = "exp_weak_11"
    seed: int = 20260813
    cases: int = 25
    lambda_decades: float = 3.0
    out: str = "runs"

    def rootsys_spec(self) -> dict:
        """Structured root-system spec consumed by build_root_system."""
        if self.family == "z2":
            return {"family": "z2", "multiplicities": list(self.multiplicities)}
        return {
            "family": "dihedral",
            "order": self.dihedral_order,
            "multiplicities": list(self.multiplicities),
        }


_SCHEMA = {
    "rootsys": ("family", "multiplicities", "dihedral_order"),
    "grid": ("box_halfwidth", "resolution", "grading"),
    "kernel": ("derivative_order", "fd_relative_step", "richardson_levels"),
    "operator": ("name", "sigma", "t_min", "t_max", "time_count",
                 "bracket_count"),
    "experiment": ("name", "seed", "cases", "lambda_decades", "out"),
}
# config key -> dataclass field, where they differ
_RENAME = {("operator", "name"): "operator", ("experiment", "name"): "experiment"}


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _parse_value(field_name: str, raw: str):
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[field_name]
    raw = raw.strip()
    try:
        if field_name == "multiplicities":
            parts = raw.replace(",", " ").split()
            if not parts:
                raise ValueError("empty multiplicity list")
            return tuple(float(p) for p in parts)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {field_name!r}: {raw!r} ({exc})") from exc


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.family not in _FAMILIES:
        raise ConfigError(f"unknown family {cfg.family!r}; choose from {_FAMILIES}")
    if any(k < 0 for k in cfg.multiplicities):
        raise ConfigError("multiplicities must be nonnegative")
    if cfg.family == "dihedral":
        if cfg.dihedral_order < 3:
            raise ConfigError("dihedral order must be >= 3")
        if len(cfg.multiplicities) not in (1, 2):
            raise ConfigError("dihedral takes one or two multiplicities")
    if cfg.box_halfwidth <= 0:
        raise ConfigError("box_halfwidth must be positive")
    if cfg.resolution < 8 or cfg.resolution % 2:
        raise ConfigError("resolution must be an even integer >= 8")
    if cfg.grading < 1.0:
        raise ConfigError("grading must be >= 1")
    if not 0 <= cfg.derivative_order <= 4:
        raise ConfigError("derivative_order must lie in 0..4")
    if not 0.0 < cfg.fd_relative_step < 0.2:
        raise ConfigError("fd_relative_step must lie in (0, 0.2)")
    if cfg.richardson_levels not in (1, 2):
        raise ConfigError("richardson_levels must be 1 or 2")
    if cfg.operator not in _OPERATORS:
        raise ConfigError(f"unknown operator {cfg.operator!r}; choose from {_OPERATORS}")
    if cfg.sigma < 1.0:
        raise ConfigError("sigma must be >= 1")
    if not 0 < cfg.t_min < cfg.t_max:
        raise ConfigError("need 0 < t_min < t_max")
    if cfg.time_count < 2:
        raise ConfigError("time_count must be >= 2")
    if cfg.bracket_count < 1:
        raise ConfigError("bracket_count must be >= 1")
    if cfg.experiment not in _EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {cfg.experiment!r}; choose from {_EXPERIMENTS}")
    if cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg.cases < 1:
        raise ConfigError("cases must be >= 1")
    if cfg.lambda_decades <= 0:
        raise ConfigError("lambda_decades must be positive")
    return cfg


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    updates = {}
    seed_seen = False
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            field_name = _RENAME.get((section, key), key)
            updates[field_name] = _parse_value(field_name, raw)
            if field_name == "seed":
                seed_seen = True
    if not seed_seen:
        raise ConfigError("config must set seed under [experiment]")
    return validate(ExperimentConfig(**updates))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Render a config back to the INI text that parse_config_text accepts."""
    parser = configparser.ConfigParser()
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for section, keys in _SCHEMA.items():
        parser[section] = {}
        for key in keys:
            field_name = _RENAME.get((section, key), key)
            val = values[field_name]
            if field_name == "multiplicities":
                val = " ".join(format(v, "g") for v in val)
            parser[section][key] = str(val)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def worker_count() -> int:
    raw = os.environ.get(_WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{_WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{_WORKERS_ENV} must be >= 1")
    return n
