"""Declarative run configuration: JSON file plus CLI-flag overrides.

Precedence is flags > file > defaults. Unknown keys anywhere in the file are
rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from wncs.model import ModelParams
from wncs.sim import SimConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class GridConfig:
    n_nodes: int = 201
    tau_max: int = 25
    x_max_mult: float = 5.0


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 400


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of a run; embedded verbatim in every
    artifact so a run can be reproduced from its outputs."""

    model: ModelParams = field(default_factory=ModelParams)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": {
                "a": self.model.a,
                "sigma2": self.model.sigma2,
                "p": self.model.p,
                "p_up": self.model.p_up,
                "p_down": self.model.p_down,
                "beta": self.model.beta,
                "B": self.model.B,
                "harvest_probs": list(self.model.harvest_probs),
            },
            "grid": {
                "n_nodes": self.grid.n_nodes,
                "tau_max": self.grid.tau_max,
                "x_max_mult": self.grid.x_max_mult,
            },
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter},
            "sim": {
                "n_rollouts": self.sim.n_rollouts,
                "seed": self.sim.seed,
                "horizon": self.sim.horizon,
                "x0": self.sim.x0,
                "tau0": self.sim.tau0,
                "y0": self.sim.y0,
                "b0": self.sim.b0,
            },
        }


_SECTION_KEYS = {
    "model": {"a", "sigma2", "p", "p_up", "p_down", "beta", "B", "harvest_probs"},
    "grid": {"n_nodes", "tau_max", "x_max_mult"},
    "solver": {"tol", "max_iter"},
    "sim": {"n_rollouts", "seed", "horizon", "x0", "tau0", "y0", "b0"},
}


def _check_keys(section: str, data: dict) -> None:
    unknown = set(data) - _SECTION_KEYS[section]
    if unknown:
        raise ConfigError(
            f"unknown keys in [{section}]: {sorted(unknown)}; "
            f"valid: {sorted(_SECTION_KEYS[section])}"
        )


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")
    unknown = set(raw) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sections = {}
    for name in _SECTION_KEYS:
        data = raw.get(name, {})
        if not isinstance(data, dict):
            raise ConfigError(f"section [{name}] must be an object")
        _check_keys(name, data)
        sections[name] = data
    try:
        model = ModelParams(
            **{
                k: (tuple(v) if k == "harvest_probs" else v)
                for k, v in sections["model"].items()
            }
        )
        return RunConfig(
            model=model,
            grid=GridConfig(**sections["grid"]),
            solver=SolverConfig(**sections["solver"]),
            sim=SimConfig(**sections["sim"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw)


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Return a copy of ``config`` with non-None flag overrides applied."""
    d = config.to_dict()
    flag_map = {
        "tol": ("solver", "tol"),
        "max_iter": ("solver", "max_iter"),
        "grid_nodes": ("grid", "n_nodes"),
        "tau_max": ("grid", "tau_max"),
        "x_max_mult": ("grid", "x_max_mult"),
        "seed": ("sim", "seed"),
        "n_rollouts": ("sim", "n_rollouts"),
        "horizon": ("sim", "horizon"),
    }
    for flag, value in overrides.items():
        if value is None:
            continue
        if flag not in flag_map:
            raise ConfigError(f"unknown override flag {flag!r}")
        section, key = flag_map[flag]
        d[section][key] = value
    return config_from_dict(d)
