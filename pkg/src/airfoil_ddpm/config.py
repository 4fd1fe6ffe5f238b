"""Run configuration: one JSON document, overridable per key from the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .aero import SOLVERS
from .diffusion import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    n_target: int = 1000
    a0_range: tuple[float, float] = (0.3, 1.0)
    coeff_range: tuple[float, float] = (-0.5, 1.5)
    seed: int = 0
    solver: str = "surrogate"
    reynolds: float = 1e6
    alpha_deg: float = 5.0
    outlier_percentile: float = 99.5
    split_sizes: tuple[int, int, int] = (600, 200, 200)
    parallelism: int = 1

    def __post_init__(self):
        if self.n_target < 1 or self.parallelism < 1:
            raise ValueError("n_target and parallelism must be >= 1")
        if sum(self.split_sizes) > self.n_target or min(self.split_sizes) < 0:
            raise ValueError(f"split sizes {self.split_sizes} do not fit n_target {self.n_target}")
        if not 0 < self.outlier_percentile <= 100:
            raise ValueError("outlier_percentile must lie in (0, 100]")
        if self.a0_range[0] > self.a0_range[1] or self.coeff_range[0] > self.coeff_range[1]:
            raise ValueError("ranges must be (low, high)")
        if self.reynolds <= 0:
            raise ValueError("reynolds must be > 0")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")


@dataclass(frozen=True)
class ScheduleConfig:
    beta_start: float = 1e-3
    beta_end: float = 0.2
    t_max: int = 1000

    def __post_init__(self):
        if self.t_max < 1 or not 0 < self.beta_start <= self.beta_end < 1:
            raise ValueError("need t_max >= 1 and 0 < beta_start <= beta_end < 1")


@dataclass(frozen=True)
class ModelConfig:
    hidden_layers: int = 4
    hidden_width: int = 32
    init_seed: int = 0

    def __post_init__(self):
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("hidden_layers and hidden_width must be >= 1")


@dataclass(frozen=True)
class SamplingConfig:
    seed: int = 2024
    count: int = 10
    max_retries: int = 10
    cd_threshold: float = 0.01

    def __post_init__(self):
        if self.count < 1 or self.max_retries < 0:
            raise ValueError("count must be >= 1 and max_retries >= 0")


@dataclass(frozen=True)
class PathsConfig:
    dataset: str = "out/dataset.csv"
    checkpoint: str = "out/checkpoint.json"
    output_dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def to_dict(self) -> dict:
        return asdict(self)


# Table 4 variant: larger dataset and wider network
LARGE_VARIANT = {"dataset.n_target": 6000, "dataset.split_sizes": (3600, 1200, 1200), "model.hidden_width": 64}


def _coerce(value: Any, default: Any, key: str):
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes"):
                    return True
                if value.lower() in ("0", "false", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, tuple):
            items = value.split(",") if isinstance(value, str) else list(value)
            if len(items) != len(default):
                raise ValueError(f"expected {len(default)} values")
            return tuple(_coerce(v, d, key) for v, d in zip(items, default))
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if isinstance(default, float):
            return float(value)
        if default is None:
            return None if value in (None, "none", "None", "") else int(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def config_keys(cfg: RunConfig = RunConfig()) -> dict[str, Any]:
    """Flat ``section.key -> value`` view."""
    out = {}
    for sec in fields(cfg):
        sub = getattr(cfg, sec.name)
        for f in fields(sub):
            out[f"{sec.name}.{f.name}"] = getattr(sub, f.name)
    return out


def _resolve_key(key: str, cfg: RunConfig) -> str:
    keys = config_keys(cfg)
    key = key.replace("-", "_")
    if key in keys:
        return key
    matches = [k for k in keys if k.split(".", 1)[1] == key]
    if len(matches) == 1:
        return matches[0]
    if matches:
        raise ConfigError(f"ambiguous key {key!r}: {', '.join(matches)}")
    raise ConfigError(f"unknown config key {key!r}")


def apply_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    defaults = config_keys(RunConfig())
    sections: dict[str, dict] = {}
    for raw, value in overrides.items():
        key = _resolve_key(raw, cfg)
        sec, name = key.split(".", 1)
        default = defaults[key]
        if key == "training.max_steps":
            default = None
        sections.setdefault(sec, {})[name] = _coerce(value, default, key)
    for sec, vals in sections.items():
        try:
            cfg = replace(cfg, **{sec: replace(getattr(cfg, sec), **vals)})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config document must be a JSON object")
    flat = {}
    for sec, vals in d.items():
        if not isinstance(vals, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        for k, v in vals.items():
            flat[f"{sec}.{k}"] = v
    for key in flat:
        if key not in config_keys():
            raise ConfigError(f"unknown config key {key!r}")
    return apply_overrides(RunConfig(), flat)


def load_config(path) -> RunConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return from_dict(d)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
