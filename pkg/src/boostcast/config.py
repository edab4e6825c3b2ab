"""Run configuration: one file, environment overrides, then CLI flags."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from . import transforms as tf
from .features import DATASETS, FeatureConfig
from .gbdt import BoostParams
from .indicators import IndicatorParams

ENV_PREFIX = "BOOSTCAST_"

# the nine (dataset, target) runs of the test matrix, with their report labels
MATRIX = (
    ("DS1", "log_returns", "Log Returns"),
    ("DS2", "std_log_returns", "Standardized Log Returns"),
    ("DS1", "returns", "Returns"),
    ("DS2", "std_returns", "Standardized Returns"),
    ("DS1", "ema_ratio", "EMA Ratio"),
    ("DS2", "std_ema_ratio", "Standardized EMA Ratio"),
    ("DS1", "ema_diff_ratio", "EMA Difference Ratio"),
    ("DS3", "log_returns", "Benchmark (Log Returns)"),
    ("DS4", "std_log_returns", "Benchmark (Standardized Log Returns)"),
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    data: str | None = None
    dataset: str = "DS1"
    target_transform: str = "log_returns"
    trials: int = 25
    seed: int = 7
    objective: str = "loss"
    n_jobs: int = 1
    out: str = "out"
    full_stats: bool = False
    allow_nonstationary: bool = False
    holdout_fraction: float = 0.8
    boost: BoostParams = field(default_factory=BoostParams)
    indicators: IndicatorParams = field(default_factory=IndicatorParams)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choose from {', '.join(DATASETS)}")
        if self.target_transform not in tf.TARGET_METHODS:
            raise ConfigError(f"unknown target transform {self.target_transform!r}")
        if self.target_transform.startswith("std_") != (self.dataset in ("DS2", "DS4")):
            raise ConfigError(f"target {self.target_transform} is incompatible with {self.dataset}"
                              " (standardized targets need DS2/DS4, raw targets DS1/DS3)")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.objective not in ("loss", "mae"):
            raise ConfigError("objective must be 'loss' or 'mae'")

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(indicators=self.indicators, holdout_fraction=self.holdout_fraction,
                             full_stats=self.full_stats, allow_nonstationary=self.allow_nonstationary)

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {"boost": BoostParams, "indicators": IndicatorParams}


def _coerce(value: str, like):
    if isinstance(like, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"cannot read {value!r} as {type(like).__name__}") from None
    return value


def from_mapping(d: dict, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    top = {f.name for f in fields(RunConfig)}
    unknown = set(d) - top
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kw = {}
    for k, v in d.items():
        if k in _NESTED:
            if not isinstance(v, dict):
                raise ConfigError(f"{k} must be a mapping")
            cls = _NESTED[k]
            names = {f.name for f in fields(cls)}
            bad = set(v) - names
            if bad:
                raise ConfigError(f"unknown {k} keys: {', '.join(sorted(bad))}")
            try:
                kw[k] = replace(getattr(base, k), **v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{k}: {exc}") from None
        else:
            kw[k] = v
    try:
        return replace(base, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".json":
        d = json.loads(text)
    else:
        d = yaml.safe_load(text) or {}
    if not isinstance(d, dict):
        raise ConfigError("config file must hold a mapping")
    return d


def env_overrides(environ=None, base: RunConfig | None = None) -> dict:
    """BOOSTCAST_TRIALS=5 or BOOSTCAST_BOOST__LEARNING_RATE=0.01 style overrides."""
    environ = os.environ if environ is None else environ
    base = base or RunConfig()
    out: dict = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        if len(path) == 1 and hasattr(base, path[0]) and path[0] not in _NESTED:
            cur = getattr(base, path[0])
            out[path[0]] = raw if cur is None else _coerce(raw, cur)
        elif len(path) == 2 and path[0] in _NESTED and hasattr(getattr(base, path[0]), path[1]):
            cur = getattr(getattr(base, path[0]), path[1])
            out.setdefault(path[0], {})[path[1]] = _coerce(raw, cur)
        else:
            raise ConfigError(f"unknown environment override {key}")
    return out


def resolve(config_path=None, environ=None, overrides: dict | None = None) -> RunConfig:
    """Defaults < config file < environment < explicit overrides (CLI flags)."""
    cfg = RunConfig()
    if config_path:
        cfg = from_mapping(load_file(config_path), cfg)
    env = env_overrides(environ, cfg)
    if env:
        cfg = from_mapping(env, cfg)
    if overrides:
        cfg = from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)
    return cfg
