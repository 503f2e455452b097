"""Experiment configuration: typed sections, TOML round-trip and overrides.

Precedence is built-in defaults, then the config file, then command-line
flags. ``None`` values are omitted from the TOML output and restored as
``None`` when absent.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "HardnessSettings",
    "LearnSettings",
    "VerifySettings",
    "apply_overrides",
    "load_config",
    "dump_config",
]

U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class LearnSettings:
    d: int = 20
    k: int = 1
    eps: float = 0.25
    sigma: float = 0.1
    activation: str = "relu"
    noise: str = "gaussian"
    alpha_low: float = 0.5
    alpha_high: float = 1.5
    # if set, the first two weights sit at this angle (degrees) and k must be 2
    angle_deg: float | None = None
    chow_mult: float = 50.0
    mean_mult: float = 50.0
    select_mult: float = 1.0
    min_bucket_size: int = 64
    delta: float = 0.1
    c: float = 2.0
    cover_eps: float | None = None
    max_candidates: int = 2_000_000
    n_test: int = 100_000

    def validate(self):
        if self.k < 1:
            raise ConfigError(f"learn.k must be at least 1, got {self.k}")
        if self.d < self.k:
            raise ConfigError(f"learn.d={self.d} must be at least learn.k={self.k}")
        if not 0 < self.eps < 1:
            raise ConfigError(f"learn.eps must lie in (0, 1), got {self.eps}")
        if self.sigma < 0:
            raise ConfigError(f"learn.sigma must be non-negative, got {self.sigma}")
        if not 0 < self.alpha_low <= self.alpha_high:
            raise ConfigError("learn.alpha_low must be positive and at most learn.alpha_high")
        if self.noise not in ("gaussian", "bounded-uniform"):
            raise ConfigError(f"learn.noise must be 'gaussian' or 'bounded-uniform', got {self.noise!r}")
        if self.angle_deg is not None and self.k != 2:
            raise ConfigError("learn.angle_deg requires learn.k = 2")
        if self.n_test < 2:
            raise ConfigError("learn.n_test must be at least 2")


@dataclass
class HardnessSettings:
    d: int = 200
    k: int = 4
    m: int = 32
    bound: float = 0.25
    n_mc: int = 1_000_000
    phi: str = "relu"
    sigma_out: str = "identity"
    degree_cap: int = 8
    max_attempts: int | None = None

    def validate(self):
        if self.k < 1:
            raise ConfigError(f"hardness.k must be at least 1, got {self.k}")
        if self.d < 2:
            raise ConfigError(f"hardness.d must be at least 2, got {self.d}")
        if self.m < 1:
            raise ConfigError(f"hardness.m must be at least 1, got {self.m}")
        if not 0 <= self.bound < 1:
            raise ConfigError(f"hardness.bound must lie in [0, 1), got {self.bound}")
        if self.n_mc < 2:
            raise ConfigError("hardness.n_mc must be at least 2")
        if not 0 <= self.degree_cap <= 60:
            raise ConfigError("hardness.degree_cap must lie in 0..60")


@dataclass
class VerifySettings:
    # None runs every invariant; an empty list runs none
    invariants: list[str] | None = None
    grid_order: int = 64
    n_points: int = 1000
    n_mc: int = 200_000

    def validate(self):
        if self.grid_order < 1:
            raise ConfigError("verify.grid_order must be positive")
        if self.n_points < 1 or self.n_mc < 2:
            raise ConfigError("verify.n_points and verify.n_mc must be positive")


@dataclass
class ExperimentConfig:
    seed: int = 0
    trials: int = 5
    threads: int = 1
    out: str = "results"
    learn: LearnSettings = field(default_factory=LearnSettings)
    hardness: HardnessSettings = field(default_factory=HardnessSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)

    def validate(self) -> "ExperimentConfig":
        if not 0 <= self.seed <= U64_MAX:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        self.learn.validate()
        self.hardness.validate()
        self.verify.validate()
        return self

    def to_dict(self) -> dict:
        return _strip_none(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data, "").validate()


_SECTIONS = {"learn": LearnSettings, "hardness": HardnessSettings, "verify": VerifySettings}


def _strip_none(d: dict) -> dict:
    return {k: _strip_none(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}


def _coerce(value: Any, typ: str, where: str):
    """Check ``value`` against the annotation string ``typ``."""
    optional = "None" in typ
    base = typ.replace("| None", "").strip()
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where} may not be empty")
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite")
        return float(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if base == "list[str]":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where} must be a list of strings")
        return list(value)
    raise AssertionError(f"unhandled annotation {typ}")


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix or 'root'} must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(prefix + u for u in unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _SECTIONS and cls is ExperimentConfig:
            kwargs[name] = _build(_SECTIONS[name], value, f"{name}.")
        else:
            kwargs[name] = _coerce(value, fields[name].type, prefix + name)
    return cls(**kwargs)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a TOML config file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig().validate()
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def apply_overrides(cfg: ExperimentConfig, assignments: list[str] | None = None, **top) -> ExperimentConfig:
    """Return a new config with ``section.key=value`` assignments and top-level flags applied.

    Values are parsed as TOML scalars, so ``learn.k=2`` gives an integer and
    ``hardness.phi="tanh"`` (or bare ``hardness.phi=tanh``) a string.
    """
    data = cfg.to_dict()
    for key, value in top.items():
        if value is not None:
            data[key] = value
    for item in assignments or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        try:
            value = tomli.loads(f"v = {raw.strip()}")["v"]
        except tomli.TOMLDecodeError:
            value = raw.strip()
        target = data
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key!r} does not name a section key")
        target[parts[-1]] = value
    return ExperimentConfig.from_dict(data)
