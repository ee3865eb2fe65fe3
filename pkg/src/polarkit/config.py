"""Pipeline configuration: nested YAML with dotted-key overrides.

Every leaf of :data:`DEFAULTS` can be set in a YAML file and overridden on
the command line as ``--section.key VALUE`` (values parsed as YAML, so
``--features.a.ngram_range "[2, 5]"`` works).  ``POLARKIT_CONFIG`` names a
default config file.
"""

from __future__ import annotations

import copy
import os
from pathlib import Path
from typing import Any, Iterator, Mapping

import yaml

from .corpus import Subtask
from .ensemble import DEFAULT_GRID
from .features import FeatureSpace
from .losses import LOSS_KINDS
from .stratify import SplitSpec
from .trainer import TrainConfig

__all__ = ["ENV_VAR", "DEFAULTS", "ConfigError", "load_config", "flatten", "set_dotted",
           "parse_value", "validate", "split_spec", "train_config", "feature_spaces", "dump"]

ENV_VAR = "POLARKIT_CONFIG"

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "subtask": None,
    "format": "csv",
    "paths": {"train": None, "dev": None, "test": None, "out": "polarkit-out"},
    "pipeline": {"subtasks": ["detect", "type", "manifest"]},
    "split": {"ratios": [0.85, 0.15], "per_language": True},
    "train": {
        "learning_rate": None,
        "epochs": 20,
        "batch_size": 32,
        "warmup_ratio": 0.1,
        "patience": 2,
        "loss": "wbce",
        "gamma": 2.0,
        "mode": "independent",
        "shuffle": True,
        "projection_dim": 64,
    },
    # two heterogeneous feature spaces, one model each
    "features": {
        "a": {"ngram_range": [1, 4], "n_features": 2 ** 18, "signed": False, "max_chars": 256},
        "b": {"ngram_range": [2, 5], "n_features": 2 ** 16, "signed": True, "max_chars": 256},
    },
    "ensemble": {"alpha": 0.7, "tune": True, "per_subtask": False, "grid": None,
                 "threshold": 0.5},
    "report": {"collapse_floor": 0.05, "gate": True, "charts": True},
    "ablate": {"losses": ["bce", "focal", "wbce"], "seeds": [42]},
}


class ConfigError(ValueError):
    """Bad key, value or type in a configuration (a usage error)."""


def flatten(cfg: Mapping, prefix: str = "") -> Iterator[tuple[str, Any]]:
    """Yield ``(dotted_key, value)`` for every leaf, in definition order."""
    for key, value in cfg.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            yield from flatten(value, name + ".")
        else:
            yield name, value


def _default_leaf(key: str):
    node: Any = DEFAULTS
    for part in key.split("."):
        if not isinstance(node, Mapping) or part not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node = node[part]
    if isinstance(node, Mapping):
        raise ConfigError(f"{key!r} is a section, not a key")
    return node


def _check_type(key: str, value):
    default = _default_leaf(key)
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
    return value


def set_dotted(cfg: dict, key: str, value) -> None:
    value = _check_type(key, value)
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def parse_value(text: str):
    """Parse a command-line override as a YAML scalar or flow collection."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc}") from None


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None,
                env: Mapping[str, str] | None = None) -> dict:
    """Defaults, then the YAML file (``path`` or ``$POLARKIT_CONFIG``), then overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    env = os.environ if env is None else env
    path = path or env.get(ENV_VAR) or None
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} not found")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        for key, value in flatten(loaded):
            set_dotted(cfg, key, value)
    for key, value in (overrides or {}).items():
        set_dotted(cfg, key, value)
    validate(cfg)
    return cfg


def validate(cfg: Mapping) -> None:
    try:
        if cfg["subtask"] is not None:
            Subtask.parse(cfg["subtask"])
        for s in cfg["pipeline"]["subtasks"]:
            Subtask.parse(s)
        if cfg["format"] not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl")
        split_spec(cfg)
        train_config(cfg)
        feature_spaces(cfg)
        for loss in cfg["ablate"]["losses"]:
            if loss not in LOSS_KINDS:
                raise ConfigError(f"unknown loss {loss!r}")
        grid = cfg["ensemble"]["grid"]
        if grid is not None and (not grid or any(not 0 <= float(a) <= 1 for a in grid)):
            raise ConfigError("ensemble.grid values must lie in [0, 1]")
        if not 0.0 <= float(cfg["ensemble"]["alpha"]) <= 1.0:
            raise ConfigError("ensemble.alpha must lie in [0, 1]")
        if not 0.0 < float(cfg["ensemble"]["threshold"]) < 1.0:
            raise ConfigError("ensemble.threshold must lie in (0, 1)")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def split_spec(cfg: Mapping) -> SplitSpec:
    return SplitSpec(tuple(cfg["split"]["ratios"]), int(cfg["seed"]))


def train_config(cfg: Mapping, **changes) -> TrainConfig:
    t = dict(cfg["train"])
    t.update(changes)
    return TrainConfig(seed=int(cfg["seed"]), **t)


def feature_spaces(cfg: Mapping) -> dict[str, FeatureSpace]:
    out = {}
    for name, fs in cfg["features"].items():
        out[name] = FeatureSpace(tuple(fs["ngram_range"]), int(fs["n_features"]),
                                 bool(fs["signed"]), int(fs["max_chars"]))
    return out


def grid(cfg: Mapping) -> tuple[float, ...]:
    g = cfg["ensemble"]["grid"]
    return DEFAULT_GRID if g is None else tuple(float(a) for a in g)


def dump(cfg: Mapping) -> str:
    return yaml.safe_dump(dict(cfg), sort_keys=True, default_flow_style=None)
