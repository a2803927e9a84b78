"""Run configuration: a TOML document with ``[data]``, ``[model]``, ``[training]``, ``[eval]``,
``[drift]`` and ``[collapse]`` tables.

Every key has a default (see :data:`DEFAULTS`); unknown tables or keys are
rejected with a :class:`ConfigError` naming the dotted key path.
"""
from __future__ import annotations

import copy
import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS = {
    "data": {
        "resolution": 128,        # native grid; coarser grids are strided subsamples
        "count": 576,             # samples drawn
        "n_train": 512,           # leading samples used for training, the rest for testing
        "seed": 0,
        "sigma": 1.0,
        "tau": 3.0,
        "alpha": 2.0,
        "band_limit": 8,          # integer: keep |k_i| < cutoff; true: cutoff resolution/4; false: none
        "path": "",               # dataset file for train/eval (empty: generate in memory)
    },
    "model": {
        "kind": "fno",            # fno | convnet
        "width": 32,
        "modes": 16,
        "blocks": 2,
        "num_frequencies": 3,
        "proj_hidden": 64,
        "k": 15,                  # convnet stencil half-width
        "seed": 0,
    },
    "training": {
        "epochs": 60,
        "batch_size": 8,
        "lr": 1e-3,
        "weight_decay": 1e-4,
        "lr_halving": 20,
        "resolutions": [32],
        "seed": 0,
        "shuffle": True,
        "loss": {"l2": 1.0},
        "derivative": "fourier",
    },
    "eval": {
        "resolutions": [16, 32, 64, 128],
        "batch": 16,
        "model_name": "",         # empty: the model kind
    },
    "drift": {
        "layer": "integral_transform",   # integral_transform | spectral_conv | attention | encdec | knn
        "n0": 16,
        "levels": 4,
        "seed": 0,
    },
    "collapse": {
        "taps": [0.25, 0.5, 0.25],
        "radius": 0.25,
        "n0": 16,
        "levels": 6,
    },
}


def _check(path: str, value, default):
    if path == "data.band_limit":
        ok = isinstance(value, int) and (isinstance(value, bool) or value >= 1)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(path, f"expected {type(default).__name__}, got {type(value).__name__} {value!r}")
    return float(value) if isinstance(default, float) else value


def merge(doc: dict) -> dict:
    """Defaults overlaid with ``doc``; unknown keys raise."""
    out = copy.deepcopy(DEFAULTS)
    for table, values in doc.items():
        if table not in DEFAULTS:
            raise ConfigError(table, "unknown config table")
        if not isinstance(values, dict):
            raise ConfigError(table, "expected a table")
        for key, value in values.items():
            path = f"{table}.{key}"
            if key not in DEFAULTS[table]:
                raise ConfigError(path, "unknown config key")
            default = DEFAULTS[table][key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise ConfigError(path, "expected a table")
                out[table][key] = {str(k): _check(f"{path}.{k}", v, 1.0) for k, v in value.items()}
            else:
                out[table][key] = _check(path, value, default)
    return out


def loads(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML: {exc}") from None
    return merge(doc)


def load(path) -> dict:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file {path} does not exist") from None
    except UnicodeDecodeError:
        raise ConfigError("<file>", f"config file {path} is not UTF-8") from None
    return loads(text)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
