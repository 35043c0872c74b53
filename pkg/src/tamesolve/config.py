"""Run configuration: YAML files merged over the packaged defaults."""
from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1
COMMANDS = ("solve", "branch", "census", "verify-tame", "nashmoser", "uniqueness")
PROBLEM_KINDS = ("examplea", "nemytskii", "synthetic")


def load_defaults() -> dict:
    text = resources.files("tamesolve").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(cfg: dict, dotted: str, positive: bool = False, integer: bool = False,
            nullable: bool = False) -> None:
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node[p]
    value = node[leaf]
    if value is None and nullable:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config field {dotted!r} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"config field {dotted!r} must be an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"config field {dotted!r} must be positive, got {value!r}")


def _pair(cfg: dict, dotted: str) -> None:
    section, key = dotted.split(".")
    value = cfg[section][key]
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)):
        raise ConfigError(f"config field {dotted!r} must be [re, im], got {value!r}")


def validate(cfg: dict) -> dict:
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"config field 'schema_version' must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}"
        )
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"config field 'command' must be one of {COMMANDS}, got {cfg['command']!r}")
    if cfg["problem"]["kind"] not in PROBLEM_KINDS:
        raise ConfigError(
            f"config field 'problem.kind' must be one of {PROBLEM_KINDS}, got {cfg['problem']['kind']!r}"
        )
    if cfg["problem"]["phi"] not in ("sine", "arctan"):
        raise ConfigError(f"config field 'problem.phi' must be sine or arctan, got {cfg['problem']['phi']!r}")
    if cfg["branch"]["shape"] not in ("line", "circle"):
        raise ConfigError(f"config field 'branch.shape' must be line or circle, got {cfg['branch']['shape']!r}")
    _number(cfg, "seed", integer=True)
    for key in ("n", "grid_size", "k_max", "neumann_terms"):
        _number(cfg, f"problem.{key}", positive=True, integer=True)
    for key in ("R", "a", "coupling", "radius", "ell_prime", "eps"):
        _number(cfg, f"problem.{key}")
    _number(cfg, "problem.m", positive=True, nullable=True)
    _number(cfg, "problem.dps", positive=True, integer=True, nullable=True)
    for key in ("step", "max_step", "min_step", "growth", "tol"):
        _number(cfg, f"solver.{key}", positive=True)
    _number(cfg, "solver.atol")
    _number(cfg, "solver.max_steps", positive=True, integer=True)
    _number(cfg, "solver.a_prime", nullable=True)
    _pair(cfg, "solve.target")
    _pair(cfg, "branch.end")
    _pair(cfg, "census.target")
    for key in ("steps", "samples", "lead_in"):
        _number(cfg, f"branch.{key}", positive=True, integer=True)
    for key in ("samples", "k_max", "trials"):
        _number(cfg, f"verify_tame.{key}", positive=True, integer=True)
    for key in ("levels", "inner_max_steps", "modes"):
        _number(cfg, f"nashmoser.{key}", integer=True, positive=key != "modes")
    for key in ("levels_b", "targets"):
        _number(cfg, f"uniqueness.{key}", positive=True, integer=True)
    _number(cfg, "nashmoser.r", positive=True)
    _number(cfg, "census.radius", positive=True)
    return cfg


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then top-level ``overrides``; validated."""
    cfg = load_defaults()
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return validate(cfg)
