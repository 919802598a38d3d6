"""Run configuration: JSON schema, profiles and validation.

A run config is a flat JSON document holding the architecture knobs, data
settings and the optimizer budget. Every command validates its config
against the schema below before touching any state; violations raise
``ConfigError`` naming the offending schema path.
"""

import json
from dataclasses import dataclass, field

import jsonschema

__all__ = ["RunConfig", "ConfigError", "load_config", "PROFILES", "RUN_CONFIG_SCHEMA"]


class ConfigError(ValueError):
    pass


RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "net": {"enum": ["basic", "generic", "complex"]},
        "size": {"type": "integer", "minimum": 8},
        "filters": {"type": "integer", "minimum": 1},
        "filter_size": {"type": "integer", "minimum": 1},
        "fusion_size": {"type": ["integer", "null"], "minimum": 1},
        "stages": {"type": "integer", "minimum": 1},
        "subiters": {"type": "integer", "minimum": 1},
        "controls": {"type": "integer", "minimum": 2},
        "sampling_rate": {"type": "number", "exclusiveMinimum": 0.01, "maximum": 1.0},
        "noise_sigma": {"type": "number", "minimum": 0.0},
        "noise_sigma_max": {"type": ["number", "null"], "minimum": 0.0},
        "init": {"enum": ["model", "random"]},
        "rho": {"type": "number", "exclusiveMinimum": 0.0},
        "lam": {"type": "number", "exclusiveMinimum": 0.0},
        "step": {"type": "number", "exclusiveMinimum": 0.0, "maximum": 1.0},
        "eta": {"type": "number"},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "counts": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "train": {"type": "integer", "minimum": 1},
                "val": {"type": "integer", "minimum": 0},
                "test": {"type": "integer", "minimum": 1},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iters": {"type": "integer", "minimum": 1},
                "history": {"type": "integer", "minimum": 1},
                "c1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "c2": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "gtol": {"type": "number", "minimum": 0},
                "record_every": {"type": "integer", "minimum": 1},
            },
        },
        "paths": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "data_dir": {"type": "string"},
                "out_dir": {"type": "string"},
            },
        },
    },
}

PROFILES = {
    # desk-scale defaults: small grids, minutes of CPU
    "tiny": {
        "net": "generic",
        "size": 32,
        "filters": 8,
        "filter_size": 3,
        "stages": 3,
        "subiters": 1,
        "controls": 101,
        "sampling_rate": 0.2,
        "counts": {"train": 20, "val": 5, "test": 10},
        "train": {"max_iters": 150},
    },
    # the full-scale architecture; documented, not promised to finish fast
    "paper": {
        "net": "generic",
        "size": 256,
        "filters": 128,
        "filter_size": 5,
        "stages": 10,
        "subiters": 1,
        "controls": 101,
        "sampling_rate": 0.2,
        "init": "random",
        "counts": {"train": 100, "val": 0, "test": 50},
        "train": {"max_iters": 1000},
    },
}

_DEFAULTS = {
    "net": "generic",
    "size": 32,
    "filters": 8,
    "filter_size": 3,
    "fusion_size": None,
    "stages": 3,
    "subiters": 1,
    "controls": 101,
    "sampling_rate": 0.2,
    "noise_sigma": 0.0,
    "noise_sigma_max": None,
    "init": "model",
    "rho": 1.0,
    "lam": 0.05,
    "step": 0.1,
    "eta": 1.0,
    "seed": 0,
    "threads": 1,
    "counts": {"train": 20, "val": 5, "test": 10},
    "train": {
        "max_iters": 100,
        "history": 10,
        "c1": 1e-4,
        "c2": 0.9,
        "gtol": 1e-8,
        "record_every": 1,
    },
    "paths": {"data_dir": "data", "out_dir": "out"},
}


@dataclass
class RunConfig:
    net: str
    size: int
    filters: int
    filter_size: int
    fusion_size: object
    stages: int
    subiters: int
    controls: int
    sampling_rate: float
    noise_sigma: float
    noise_sigma_max: object
    init: str
    rho: float
    lam: float
    step: float
    eta: float
    seed: int
    threads: int
    counts: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    @property
    def with_phase(self):
        return self.net == "complex"


def _merge(base, update):
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def validate_config(document):
    validator = jsonschema.Draft202012Validator(RUN_CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(document), key=lambda e: e.json_path)
    if errors:
        lines = [f"{e.json_path}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def load_config(path=None, profile=None, overrides=None):
    """Assemble a validated RunConfig from defaults, an optional profile,
    an optional JSON file and explicit overrides (in that order)."""
    document = dict(_DEFAULTS)
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
        document = _merge(document, PROFILES[profile])
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        validate_config(user)
        document = _merge(document, user)
    if overrides:
        document = _merge(document, {k: v for k, v in overrides.items() if v is not None})
    validate_config(document)
    cfg = RunConfig(**document)
    if cfg.init == "model" and cfg.filters != cfg.filter_size**2 - 1:
        raise ConfigError(
            f"$.filters: model-based initialization with filter_size="
            f"{cfg.filter_size} fixes filters={cfg.filter_size ** 2 - 1}, "
            f"got {cfg.filters}"
        )
    if cfg.fusion_size is not None and cfg.fusion_size % 2 != 1:
        raise ConfigError("$.fusion_size: must be odd")
    if cfg.filter_size % 2 != 1:
        raise ConfigError("$.filter_size: must be odd")
    return cfg
