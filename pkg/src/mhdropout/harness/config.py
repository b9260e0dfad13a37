"""Experiment configurations and their JSON loading.

Each experiment has a dataclass of defaults. A JSON config file overrides
any subset of its fields; unknown keys and ill-typed values are rejected.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError


def ratio_to_subset(ratio: float, n_subnetworks: int) -> int:
    """``T = max(1, round(r * 2^D))``."""
    if not 0.0 < ratio <= 1.0:
        raise ConfigError(f"subset ratio must lie in (0, 1], got {ratio}")
    return max(1, int(round(ratio * n_subnetworks)))


@dataclass
class SweepConfig:
    ratios: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    trials: int = 30
    seed: int = 0
    n_targets: int = 5
    input_size: int = 2
    output_size: int = 2
    hidden: int = 4
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"
    p: float = 0.5
    steps: int = 2000
    learning_rate: float = 0.5
    baselines: bool = True
    workers: int = 1


@dataclass
class MultipointConfig:
    trials: int = 20
    seed: int = 0
    n_targets: int = 5
    input_size: int = 2
    output_size: int = 2
    hidden: int = 4
    hidden_activation: str = "sigmoid"
    output_activation: str = "sigmoid"
    n_predictors: int = 16
    init_scale: float = 0.5
    bias_scale: float = 0.5
    # "sequential": one update per target in shuffled order; "batch": all at once.
    schedule: str = "sequential"
    # Training stops once no output moves by more than steady_tol over
    # check_every steps, or after steps in total. steady_tol 0 trains the full steps.
    steps: int = 20000
    check_every: int = 250
    steady_tol: float = 1e-4
    learning_rate: float = 3.0
    tolerance: float = 0.05
    workers: int = 1


@dataclass
class SineConfig:
    trials: int = 1
    seed: int = 0
    count: int = 1000
    noise: float = 0.1
    n_components: int = 3
    hidden: list = field(default_factory=lambda: [6, 6, 6, 6, 6])
    offset_hidden: list = field(default_factory=lambda: [6])
    ratio: float = 0.1
    p: float = 0.5
    lam: float = 0.1
    learning_rate: float = 0.5
    # The plain regression baseline diverges at the MoM rate.
    ffn_learning_rate: float = 0.1
    epochs: int = 300
    batch_size: int = 50
    inference_mean: str = "predictive"
    eval_x: list = field(default_factory=lambda: [0.44, 0.47, 0.5, 0.53, 0.56])
    samples: int = 1000
    baselines: bool = True
    workers: int = 1


@dataclass
class GmmConfig:
    trials: int = 1
    seed: int = 0
    count: int = 2000
    means: list = field(default_factory=lambda: [[0.25, 0.25], [0.75, 0.3], [0.5, 0.75]])
    sds: list = field(default_factory=lambda: [[0.05, 0.08], [0.08, 0.04], [0.06, 0.06]])
    weights: list = field(default_factory=lambda: [0.5, 0.3, 0.2])
    n_components: int = 3
    hidden: list = field(default_factory=lambda: [4])
    offset_hidden: list = field(default_factory=lambda: [6])
    ratio: float = 0.25
    p: float = 0.5
    lam: float = 0.1
    learning_rate: float = 0.05
    steps: int = 5000
    batch_size: int = 32
    inference_mean: str = "predictive"
    variance_samples: int = 64
    samples: int = 10000
    baselines: bool = True
    workers: int = 1


@dataclass
class VQCompareConfig:
    trials: int = 1
    seed: int = 0
    count: int = 2000
    centres: list = field(default_factory=lambda: [[0.2, 0.2], [0.8, 0.2], [0.2, 0.8], [0.8, 0.8]])
    spread: float = 0.05
    codes: list = field(default_factory=lambda: [2, 4, 8])
    latent_size: int = 2
    hidden: int = 16
    offset_hidden: list = field(default_factory=lambda: [6])
    subset_size: int = 8
    beta: float = 0.25
    latent_weight: float = 1.0
    learning_rate: float = 0.2
    steps: int = 5000
    batch_size: int = 32
    samples: int = 4000
    workers: int = 1


CONFIGS = {
    "sweep": SweepConfig,
    "multipoint": MultipointConfig,
    "sine": SineConfig,
    "gmm": GmmConfig,
    "vq-compare": VQCompareConfig,
}


def _check_type(name: str, default, value):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"{name}: expected {type(default).__name__}, got {value!r}")


def validate(cfg) -> None:
    positive = ("trials", "steps", "epochs", "count", "samples", "batch_size", "n_targets", "hidden", "workers", "check_every")
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in positive and isinstance(v, int) and v < 1:
            raise ConfigError(f"{f.name} must be >= 1, got {v}")
    for name in ("learning_rate", "ffn_learning_rate"):
        if getattr(cfg, name, 1.0) <= 0:
            raise ConfigError(f"{name} must be positive")
    if hasattr(cfg, "lam") and cfg.lam <= 0:
        raise ConfigError("lam must be positive")
    if hasattr(cfg, "p") and not 0.0 < cfg.p < 1.0:
        raise ConfigError("p must lie in (0, 1)")
    if getattr(cfg, "steady_tol", 0.0) < 0:
        raise ConfigError("steady_tol must be non-negative")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    for r in list(getattr(cfg, "ratios", [])) + ([cfg.ratio] if hasattr(cfg, "ratio") else []):
        if not isinstance(r, (int, float)) or not 0.0 < r <= 1.0:
            raise ConfigError(f"subset ratio must lie in (0, 1], got {r!r}")
    if getattr(cfg, "inference_mean", "encoder") not in ("encoder", "predictive"):
        raise ConfigError("inference_mean must be 'encoder' or 'predictive'")
    if getattr(cfg, "schedule", "batch") not in ("batch", "sequential"):
        raise ConfigError("schedule must be 'batch' or 'sequential'")
    if hasattr(cfg, "codes") and any(not isinstance(k, int) or k < 2 or k % 2 for k in cfg.codes):
        raise ConfigError("codes must be even integers >= 2")


def make_config(experiment: str, overrides: dict | None = None):
    try:
        cls = CONFIGS[experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment {experiment!r}") from None
    cfg = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} for {experiment}")
        _check_type(key, getattr(cfg, key), value)
        setattr(cfg, key, float(value) if isinstance(getattr(cfg, key), float) else value)
    validate(cfg)
    return cfg


def load_config(experiment: str, path=None):
    if path is None:
        return make_config(experiment)
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return make_config(experiment, doc)
