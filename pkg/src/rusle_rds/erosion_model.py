"""Soil-loss composition and sensitivity classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ConfigError
from .raster import Raster, require_aligned
from .rusle_factors import FactorSet

FACTOR_ORDER = ("R", "K", "L", "S", "C", "St", "P")
DEFAULT_BREAKS = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)


@dataclass(frozen=True)
class ErosionMap:
    er: Raster  # t ha-1 yr-1
    classes: Raster
    metadata: dict = field(default_factory=dict)


def compose(factors: FactorSet, r: Raster, breaks: Sequence[float] = DEFAULT_BREAKS, provenance: dict | None = None) -> ErosionMap:
    """Soil loss ``R*K*L*S*C*St*P``, multiplied left to right in that fixed order.

    Nodata wherever any factor is nodata. ``provenance`` maps factor names
    to free-form descriptions recorded in the metadata.
    """
    fs = factors.as_dict()
    layers = [r] + [fs[k] for k in FACTOR_ORDER[1:]]
    require_aligned(*layers)
    ok = np.logical_and.reduce([x.valid for x in layers])
    er = np.where(ok, layers[0].data, np.nan)
    for x in layers[1:]:
        er = er * np.where(ok, x.data, np.nan)
    er_r = Raster(r.spec, er, valid=ok)
    meta = {
        "factor_order": list(FACTOR_ORDER),
        "units": "t ha-1 yr-1",
        "class_breaks": [float(b) for b in breaks],
        "valid_cells": int(ok.sum()),
        "provenance": dict(provenance or {}),
    }
    return ErosionMap(er=er_r, classes=classify(er_r, breaks), metadata=meta)


def classify(er: Raster, breaks: Sequence[float]) -> Raster:
    """Class k for values in ``[breaks[k-1], breaks[k])``; ``len(breaks) + 1`` classes."""
    b = np.asarray(list(breaks), dtype=np.float64)
    if b.size < 1:
        raise ConfigError("at least one class break is required")
    if not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
        raise ConfigError("class breaks must be finite and strictly ascending")
    out = np.full(er.shape, np.nan)
    out[er.valid] = np.searchsorted(b, er.data[er.valid], side="right")
    return Raster(er.spec, out, valid=er.valid)
