"""Versioned JSON checkpoints for MoM, VQ and MH-VQ models.

Layout (format version 1)::

    {
      "format": "mhdropout-checkpoint",
      "version": 1,
      "kind": "mom" | "vq" | "mhvq",
      "config": {...},                      # constructor arguments
      "parameters": {name: {"shape": [...], "values": [...]}},
      "posterior": [[...], ...] | null      # joint token table (VQ kinds)
    }

Values are written with ``repr`` precision so a round trip is exact.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mhvq import MHVQConfig, MHVQModel, PosteriorTable, VQConfig, VQModel
from .mom import MoMConfig, MoMModel

FORMAT = "mhdropout-checkpoint"
VERSION = 1

_KINDS = {
    "mom": (MoMConfig, MoMModel),
    "vq": (VQConfig, VQModel),
    "mhvq": (MHVQConfig, MHVQModel),
}


def _kind_of(model) -> str:
    for kind, (_, cls) in _KINDS.items():
        if type(model) is cls:
            return kind
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def to_dict(model, posterior: PosteriorTable | None = None) -> dict:
    params = {
        name: {"shape": list(p.shape), "values": p.data.ravel().tolist()} for name, p in model.named_parameters().items()
    }
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": _kind_of(model),
        "config": dataclasses.asdict(model.config),
        "parameters": params,
        "posterior": None if posterior is None else posterior.probs.tolist(),
    }


def from_dict(doc: dict):
    """Rebuild ``(model, posterior)`` from :func:`to_dict` output."""
    if doc.get("format") != FORMAT:
        raise ConfigError("not a checkpoint document")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('version')}")
    try:
        config_cls, model_cls = _KINDS[doc["kind"]]
    except KeyError:
        raise ConfigError(f"unknown model kind {doc.get('kind')!r}") from None
    cfg = dict(doc["config"])
    for key, value in cfg.items():
        if isinstance(value, list):
            cfg[key] = tuple(value)
    model = model_cls(config_cls(**cfg))
    named = model.named_parameters()
    stored = doc["parameters"]
    if set(stored) != set(named):
        raise ConfigError("checkpoint parameters do not match the architecture")
    for name, p in named.items():
        entry = stored[name]
        value = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        if value.shape != p.shape:
            raise ConfigError(f"parameter {name}: expected {p.shape}, got {value.shape}")
        p.data = value
        p.zero_grad()
    posterior = None if doc.get("posterior") is None else PosteriorTable(np.asarray(doc["posterior"], dtype=np.float64))
    return model, posterior


def save(path, model, posterior: PosteriorTable | None = None) -> None:
    Path(path).write_text(json.dumps(to_dict(model, posterior)))


def load(path):
    return from_dict(json.loads(Path(path).read_text()))
