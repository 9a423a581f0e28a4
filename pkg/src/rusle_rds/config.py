"""Run configuration: JSON schema, loading and hashing.

A configuration is validated in full before any computation; unknown keys
and wrong types are rejected.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .exceptions import ConfigError, InputIOError

CONFIG_ENV_VAR = "RUSLE_RDS_CONFIG"

_num = {"type": "number"}
_range = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["indicators", "equations", "cover_table", "rds", "classification"],
    "properties": {
        "description": {"type": "string"},
        "indicators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_\\-]+$"},
                    "kind": {
                        "enum": ["total", "count", "mfi", "pci", "annual_max", "wet_day_intensity"]
                    },
                    "params": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "months": {
                                "type": "array",
                                "items": {"type": "integer", "minimum": 1, "maximum": 12},
                                "minItems": 1,
                            },
                            "threshold": {"type": "number", "minimum": 0},
                            "per": {"enum": ["year", "month"]},
                        },
                    },
                    "description": {"type": "string"},
                    "units": {"type": "string"},
                },
            },
        },
        "equations": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "region", "terms", "fingerprint", "input_ranges"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_\\-]+$"},
                    "region": {"type": "string"},
                    "source": {"type": "string"},
                    "note": {"type": "string"},
                    "intercept": _num,
                    "terms": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["indicator", "coef"],
                            "properties": {
                                "indicator": {"type": "string"},
                                "coef": _num,
                                "exponent": _num,
                            },
                        },
                    },
                    "outer": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["coef", "exponent"],
                        "properties": {"coef": _num, "exponent": _num},
                    },
                    "fingerprint": {"type": "object", "additionalProperties": _num},
                    "input_ranges": {"type": "object", "additionalProperties": _range},
                    "output_bounds": _range,
                },
            },
        },
        "cover_table": {
            "type": "object",
            "minProperties": 1,
            "propertyNames": {"pattern": "^-?[0-9]+$"},
            "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "rds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variant", "aggregation", "guard_margin"],
            "properties": {
                "variant": {"enum": ["sum", "max"]},
                "aggregation": {"enum": ["mean", "median", "min", "geometric_mean"]},
                "guard_margin": {"type": "number", "minimum": 0},
                "fingerprint_statistic": {"enum": ["mean", "median"]},
            },
        },
        "classification": {
            "type": "object",
            "additionalProperties": False,
            "required": ["breaks"],
            "properties": {"breaks": {"type": "array", "items": _num, "minItems": 1}},
        },
        "factors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "slope_length_m": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "energy_equation": {"enum": ["rusle", "wischmeier"]},
                "resampling": {
                    "type": "object",
                    "additionalProperties": {"enum": ["nearest", "bilinear"]},
                },
            },
        },
        "render": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "similarity_ramp": {"type": "string"},
                "erosivity_ramp": {"type": "string"},
                "erosion_ramp": {"type": "string"},
                "erosion_log": {"type": "boolean"},
            },
        },
        "io": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "precip_dir": {"type": "string"},
                "dem": {"type": "string"},
                "sand": {"type": "string"},
                "silt": {"type": "string"},
                "clay": {"type": "string"},
                "landcover": {"type": "string"},
                "stoniness": {"type": "string"},
                "slope_length": {"type": "string"},
                "gauges": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["path"],
                        "properties": {
                            "id": {"type": "string"},
                            "path": {"type": "string"},
                            "x": _num,
                            "y": _num,
                        },
                    },
                },
            },
        },
    },
}


def validate_config(doc) -> dict:
    """Validate a configuration document; raise :class:`ConfigError` on the first problem."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {where}: {e.message}")
    _check_consistency(doc)
    return doc


def _check_consistency(doc):
    ids = [i["id"] for i in doc["indicators"]]
    known = set(ids)
    if len(known) != len(ids):
        raise ConfigError("duplicate indicator ids in config")
    eq_ids = [e["id"] for e in doc["equations"]]
    if len(set(eq_ids)) != len(eq_ids):
        raise ConfigError("duplicate equation ids in config")
    for e in doc["equations"]:
        used = {t["indicator"] for t in e["terms"]}
        refs = used | set(e["fingerprint"]) | set(e["input_ranges"])
        missing = refs - known
        if missing:
            raise ConfigError(f"equation {e['id']!r} references unknown indicators {sorted(missing)}")
    breaks = doc["classification"]["breaks"]
    if any(b >= c for b, c in zip(breaks, breaks[1:])):
        raise ConfigError("classification breaks must be strictly ascending")


def load_config(path=None) -> dict:
    """Load and validate a configuration file.

    ``path`` defaults to ``$RUSLE_RDS_CONFIG``, then the shipped default.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return default_config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return validate_config(doc)


@lru_cache(maxsize=1)
def _default_text() -> str:
    return resources.files("rusle_rds").joinpath("data/default_config.json").read_text(encoding="utf-8")


def default_config() -> dict:
    """A fresh copy of the shipped default configuration."""
    return validate_config(copy.deepcopy(json.loads(_default_text())))


def config_hash(doc) -> str:
    """SHA-256 of the canonical JSON encoding."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
