"""Scenario configuration: file (YAML or JSON) plus flag overrides, validated and fully resolved."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import MassPartition, UsageError
from .flow import GridSpec


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


@dataclass
class ScenarioConfig:
    scenario: str = "two_blocks"
    masses: list[float] = field(default_factory=lambda: [0.5, 0.5])
    g: list[float] = field(default_factory=lambda: [0.0, 1.0])
    dt: float = 1e-3
    T: float = 1.0
    N: int = 2000
    seed: int = 0
    out: str = "out"
    # conditioning
    eps: float = 0.05
    coal_deadline: float | None = None  # resolved to 0.8 T
    max_draws: int = 200_000
    probe_times: list[float] | None = None  # resolved to 0.25 T, 0.5 T, 0.9 T
    # direction ladder
    ladder: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])
    zero_drift: bool = False
    rn_components: list[int] | None = None  # resolved to the first two directions
    rn_times: list[float] = field(default_factory=lambda: [0.5, 1.0])
    # bridge
    z0: float = 0.0
    # simulate
    export_paths: int = 3
    # verify
    full: bool = False

    @property
    def partition(self) -> MassPartition:
        return MassPartition(tuple(self.masses))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.dt, self.T)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Merge defaults < file < overrides, validate, and fill every derived default."""
    merged: dict = {}
    for src in (file_values or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        for key, value in src.items():
            if key not in FIELDS:
                raise ConfigError(key, "unknown field")
            merged[key] = value
    try:
        cfg = ScenarioConfig(**merged)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc
    _coerce(cfg)
    _validate(cfg)
    if cfg.coal_deadline is None:
        cfg.coal_deadline = 0.8 * cfg.T
    if cfg.probe_times is None:
        cfg.probe_times = [0.25 * cfg.T, 0.5 * cfg.T, 0.9 * cfg.T]
    if cfg.rn_components is None:
        cfg.rn_components = list(range(1, min(2, len(cfg.masses) - 1) + 1))
    return cfg


def _coerce(cfg: ScenarioConfig):
    def num(name, kind):
        value = getattr(cfg, name)
        if value is None:
            return
        try:
            if kind is int and float(value) != int(value):
                raise ValueError
            setattr(cfg, name, kind(value))
        except (TypeError, ValueError):
            raise ConfigError(name, f"expected {kind.__name__}, got {value!r}") from None

    for name in ("dt", "T", "eps", "coal_deadline", "z0"):
        num(name, float)
    for name in ("N", "seed", "max_draws", "export_paths"):
        num(name, int)
    for name, kind in (("masses", float), ("g", float), ("probe_times", float), ("ladder", int),
                       ("rn_components", int), ("rn_times", float)):
        value = getattr(cfg, name)
        if value is None:
            continue
        if not isinstance(value, (list, tuple)):
            raise ConfigError(name, "expected a list")
        try:
            setattr(cfg, name, [kind(v) for v in value])
        except (TypeError, ValueError):
            raise ConfigError(name, f"expected a list of {kind.__name__}") from None


def _validate(cfg: ScenarioConfig):
    try:
        p = cfg.partition
    except UsageError as exc:
        raise ConfigError("masses", str(exc)) from None
    if len(cfg.g) != p.n:
        raise ConfigError("g", f"has {len(cfg.g)} entries, masses has {p.n}")
    if np.any(np.diff(cfg.g) < 0):
        raise ConfigError("g", "initial values must be non-decreasing")
    try:
        cfg.grid
    except UsageError as exc:
        raise ConfigError("dt", str(exc)) from None
    if cfg.N < 1:
        raise ConfigError("N", "must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be non-negative")
    if cfg.eps <= 0:
        raise ConfigError("eps", "must be positive")
    if cfg.coal_deadline is not None and not 0 <= cfg.coal_deadline < cfg.T:
        raise ConfigError("coal_deadline", "must lie in [0, T)")
    if cfg.max_draws < 1:
        raise ConfigError("max_draws", "must be positive")
    for name in ("probe_times", "rn_times"):
        for i, t in enumerate(getattr(cfg, name) or []):
            if not 0 <= t <= cfg.T:
                raise ConfigError(f"{name}[{i}]", f"{t} outside [0, T]")
    if not cfg.ladder or any(n < 1 for n in cfg.ladder):
        raise ConfigError("ladder", "needs positive direction indices")
    for i, j in enumerate(cfg.rn_components or []):
        if not 1 <= j <= p.n - 1:
            raise ConfigError(f"rn_components[{i}]", f"component {j} outside 1..{p.n - 1}")
