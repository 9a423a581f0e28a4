"""Climatic indicators from multi-year daily precipitation.

Indicators are computed over complete calendar years only. Every multi-year
average is taken over per-year values sorted before summation, so results
are bitwise independent of the order in which years appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (
    EmptyRegionError,
    InsufficientDataError,
    RegistryError,
    ValidationError,
)
from .raster import GridSpec, Raster, require_aligned

KINDS = {
    "total": {"months", "threshold", "per"},
    "count": {"months", "threshold"},
    "mfi": set(),
    "pci": set(),
    "annual_max": set(),
    "wet_day_intensity": {"threshold"},
}


@dataclass(frozen=True)
class IndicatorDef:
    """One climatic indicator: an id plus a computation kind and its parameters.

    Kinds
    -----
    total
        Mean annual precipitation over ``months`` (default all) counting only
        days with depth >= ``threshold`` (default 0); ``per="month"`` divides
        by 12.
    count
        Mean annual number of days with depth >= ``threshold`` in ``months``.
    mfi
        Modified Fournier index, sum of squared mean monthly totals over the
        mean annual total.
    pci
        Precipitation concentration index, 100 * sum(p_m^2) / P^2.
    annual_max
        Mean of the annual maximum daily depth.
    wet_day_intensity
        Total depth on days >= ``threshold`` (default 1 mm) divided by the
        number of such days, pooled over all years.
    """

    id: str
    kind: str
    params: dict = field(default_factory=dict)
    description: str = ""
    units: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RegistryError(f"indicator {self.id!r}: unknown kind {self.kind!r}")
        extra = set(self.params) - KINDS[self.kind]
        if extra:
            raise RegistryError(f"indicator {self.id!r}: unexpected parameters {sorted(extra)}")
        months = self.params.get("months")
        if months is not None and (not months or any(m not in range(1, 13) for m in months)):
            raise RegistryError(f"indicator {self.id!r}: months must be a non-empty subset of 1..12")
        if self.params.get("per", "year") not in ("year", "month"):
            raise RegistryError(f"indicator {self.id!r}: per must be 'year' or 'month'")
        thr = self.params.get("threshold", 0.0)
        if not np.isfinite(thr) or thr < 0:
            raise RegistryError(f"indicator {self.id!r}: threshold must be >= 0")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "params": dict(self.params),
            "description": self.description,
            "units": self.units,
        }


class IndicatorRegistry(Sequence):
    """Ordered collection of uniquely named indicator definitions."""

    def __init__(self, indicators: Iterable[IndicatorDef]):
        self._items = list(indicators)
        ids = [d.id for d in self._items]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise RegistryError(f"duplicate indicator ids: {sorted(dup)}")
        self._index = {d.id: k for k, d in enumerate(self._items)}

    @classmethod
    def from_config(cls, entries: Iterable[dict]) -> "IndicatorRegistry":
        return cls(
            IndicatorDef(
                id=e["id"],
                kind=e["kind"],
                params=dict(e.get("params", {})),
                description=e.get("description", ""),
                units=e.get("units", ""),
            )
            for e in entries
        )

    def to_config(self) -> list[dict]:
        return [d.to_dict() for d in self._items]

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self._items]

    def get(self, indicator_id: str) -> IndicatorDef:
        try:
            return self._items[self._index[indicator_id]]
        except KeyError:
            raise RegistryError(f"unknown indicator id {indicator_id!r}") from None

    def __contains__(self, indicator_id) -> bool:
        return indicator_id in self._index

    def __getitem__(self, k):
        return self._items[k]

    def __len__(self):
        return len(self._items)

    def __repr__(self):
        return f"IndicatorRegistry({self.ids})"


def default_registry() -> IndicatorRegistry:
    """The shipped 26-indicator registry (from the default configuration)."""
    from .config import default_config

    return IndicatorRegistry.from_config(default_config()["indicators"])


# ---------------------------------------------------------------------------
# array core: X has shape (n_days, n_cells)


@dataclass
class _YearIndex:
    """Layout of the complete-year evaluation window."""

    keep: np.ndarray  # bool over input days
    years: np.ndarray  # calendar year of each kept day
    month_starts: np.ndarray  # offsets of (year, month) segments in kept days
    year_starts: np.ndarray
    month_of_segment: np.ndarray  # 1..12 per segment
    n_years: int


def _year_index(dates) -> _YearIndex:
    d = np.asarray(dates, dtype="datetime64[D]")
    if d.ndim != 1:
        raise ValidationError("dates must be one-dimensional")
    if d.size and np.any(np.diff(d.astype(np.int64)) <= 0):
        raise ValidationError("dates must be strictly increasing")
    years = d.astype("datetime64[Y]").astype(np.int64) + 1970
    keep = np.zeros(d.size, dtype=bool)
    for y in np.unique(years):
        sel = years == y
        n_days = int(
            (np.datetime64(f"{y + 1}-01-01") - np.datetime64(f"{y}-01-01")).astype(np.int64)
        )
        if sel.sum() == n_days:
            keep |= sel
    if not keep.any():
        raise InsufficientDataError("daily stack covers no complete calendar year")
    kd = d[keep]
    ky = years[keep]
    km = kd.astype("datetime64[M]").astype(np.int64) % 12 + 1
    seg = np.flatnonzero(np.r_[True, (np.diff(ky) != 0) | (np.diff(km) != 0)])
    ystart = np.flatnonzero(np.r_[True, np.diff(ky) != 0])
    return _YearIndex(
        keep=keep,
        years=ky,
        month_starts=seg,
        year_starts=ystart,
        month_of_segment=km[seg],
        n_years=len(ystart),
    )


def _monthly(x: np.ndarray, idx: _YearIndex) -> np.ndarray:
    """Per-year, per-month sums, shape (n_years, 12, n_cells)."""
    sums = np.add.reduceat(x, idx.month_starts, axis=0)
    return sums.reshape(idx.n_years, 12, x.shape[1])


def _mean_over_years(per_year: np.ndarray) -> np.ndarray:
    # sorting first makes the result independent of year order
    return np.sort(per_year, axis=0).sum(axis=0) / per_year.shape[0]


def _indicator_array(x: np.ndarray, idx: _YearIndex, ind: IndicatorDef) -> np.ndarray:
    p = ind.params
    months = np.asarray(p.get("months", range(1, 13))) - 1
    thr = float(p.get("threshold", 0.0))

    if ind.kind == "total":
        v = np.where(x >= thr, x, 0.0)
        per_year = _monthly(v, idx)[:, months, :].sum(axis=1)
        out = _mean_over_years(per_year)
        return out / 12.0 if p.get("per", "year") == "month" else out
    if ind.kind == "count":
        v = (x >= thr).astype(np.float64)
        per_year = _monthly(v, idx)[:, months, :].sum(axis=1)
        return _mean_over_years(per_year)
    if ind.kind in ("mfi", "pci"):
        monthly = _monthly(x, idx)
        pm = np.stack([_mean_over_years(monthly[:, m, :]) for m in range(12)])
        total = pm.sum(axis=0)
        sq = (pm * pm).sum(axis=0)
        safe = np.where(total > 0, total, 1.0)
        if ind.kind == "mfi":
            return np.where(total > 0, sq / safe, 0.0)
        return np.where(total > 0, 100.0 * sq / (safe * safe), 0.0)
    if ind.kind == "annual_max":
        per_year = np.maximum.reduceat(x, idx.year_starts, axis=0)
        return _mean_over_years(per_year)
    if ind.kind == "wet_day_intensity":
        thr = float(p.get("threshold", 1.0))
        wet = x >= thr
        depth = np.add.reduceat(np.where(wet, x, 0.0), idx.year_starts, axis=0)
        days = np.add.reduceat(wet.astype(np.float64), idx.year_starts, axis=0)
        depth = np.sort(depth, axis=0).sum(axis=0)
        days = days.sum(axis=0)
        return np.where(days > 0, depth / np.where(days > 0, days, 1.0), 0.0)
    raise RegistryError(f"unknown kind {ind.kind!r}")  # pragma: no cover


def indicators_from_array(x, dates, registry: IndicatorRegistry, ids: Sequence[str] | None = None) -> np.ndarray:
    """Compute indicators for a (n_days, n_cells) array.

    Cells with any NaN inside the evaluation window yield NaN.
    Returns an array of shape (n_indicators, n_cells).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    idx = _year_index(dates)
    if x.shape[0] != idx.keep.size:
        raise ValidationError(f"{x.shape[0]} daily rows but {idx.keep.size} dates")
    xw = x[idx.keep]
    if np.any(xw < 0):
        raise ValidationError("daily precipitation must be >= 0")
    bad = np.isnan(xw).any(axis=0)
    xw = np.where(np.isnan(xw), 0.0, xw)
    defs = [registry.get(i) for i in (ids if ids is not None else registry.ids)]
    out = np.empty((len(defs), x.shape[1]))
    for k, d in enumerate(defs):
        out[k] = _indicator_array(xw, idx, d)
    out[:, bad] = np.nan
    return out


# ---------------------------------------------------------------------------
# raster level


@dataclass(frozen=True)
class DailyPrecipStack:
    """Per-cell daily precipitation (mm/day) on one grid.

    ``values`` has shape (n_days, nrows, ncols) with NaN marking nodata.
    """

    spec: GridSpec
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (dates.size,) + self.spec.shape:
            raise ValidationError(
                f"stack shape {values.shape} inconsistent with {dates.size} dates and grid {self.spec.shape}"
            )
        if dates.size > 1 and np.any(np.diff(dates.astype(np.int64)) <= 0):
            raise ValidationError("stack dates must be strictly increasing")
        if np.any(values[~np.isnan(values)] < 0):
            raise ValidationError("daily precipitation must be >= 0")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_rasters(cls, dates, rasters: Sequence[Raster]) -> "DailyPrecipStack":
        rasters = list(rasters)
        if not rasters:
            raise InsufficientDataError("empty daily stack")
        require_aligned(*rasters)
        return cls(rasters[0].spec, np.asarray(dates, "datetime64[D]"), np.stack([r.data for r in rasters]))

    def as_matrix(self) -> np.ndarray:
        """Days x cells view in row-major cell order."""
        return self.values.reshape(self.values.shape[0], -1)


def compute_indicator(stack: DailyPrecipStack, indicator_id: str, registry: IndicatorRegistry | None = None) -> Raster:
    """One indicator raster; nodata wherever any evaluated day is nodata."""
    registry = registry if registry is not None else default_registry()
    registry.get(indicator_id)
    arr = indicators_from_array(stack.as_matrix(), stack.dates, registry, [indicator_id])[0]
    return Raster.from_nan(stack.spec, arr.reshape(stack.spec.shape))


def compute_all(stack: DailyPrecipStack, registry: IndicatorRegistry | None = None) -> list[Raster]:
    """All indicators of ``registry`` (default: the 26-entry registry), in order."""
    registry = registry if registry is not None else default_registry()
    if len(registry) == 0:
        raise RegistryError("indicator registry is empty")
    arr = indicators_from_array(stack.as_matrix(), stack.dates, registry)
    return [Raster.from_nan(stack.spec, a.reshape(stack.spec.shape)) for a in arr]


def fingerprint(indicators: Sequence[Raster], region_mask: Raster, statistic: str = "mean") -> np.ndarray:
    """Summarise each indicator over the region (mask cells that are valid and non-zero)."""
    if statistic not in ("mean", "median"):
        raise ValidationError(f"unknown fingerprint statistic {statistic!r}")
    indicators = list(indicators)
    require_aligned(region_mask, *indicators)
    region = region_mask.valid & (np.nan_to_num(region_mask.data) != 0)
    if not region.any():
        raise EmptyRegionError("region mask selects no cell")
    out = np.empty(len(indicators))
    for k, r in enumerate(indicators):
        sel = region & r.valid
        if not sel.any():
            raise EmptyRegionError(f"indicator {k} has no valid cell inside the region")
        vals = r.data[sel]
        out[k] = vals.mean() if statistic == "mean" else np.median(vals)
    return out


class IndicatorTransformer(TransformerMixin, BaseEstimator):
    """Turn per-cell daily series into climatic indicator features.

    ``X`` has one row per cell and one column per day in ``dates``.
    ``transform`` returns one column per registry indicator; cells with a
    missing (NaN) day in the evaluation window come out as NaN rows.

    Parameters
    ----------
    dates : array_like of datetime64[D]
        Calendar day of each column of ``X``.
    registry : IndicatorRegistry, optional
        Defaults to the shipped 26-indicator registry.
    """

    def __init__(self, dates=None, registry=None):
        self.dates = dates
        self.registry = registry

    def fit(self, X, y=None):
        X = check_array(X, ensure_all_finite="allow-nan")
        if self.dates is None:
            raise ValidationError("IndicatorTransformer requires dates")
        if X.shape[1] != len(self.dates):
            raise ValidationError(f"X has {X.shape[1]} columns but {len(self.dates)} dates were given")
        self.registry_ = self.registry if self.registry is not None else default_registry()
        if len(self.registry_) == 0:
            raise RegistryError("indicator registry is empty")
        self.n_features_in_ = X.shape[1]
        self.indicator_ids_ = list(self.registry_.ids)
        return self

    def transform(self, X):
        check_is_fitted(self, "registry_")
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return indicators_from_array(X.T, self.dates, self.registry_).T

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "indicator_ids_")
        return np.asarray(self.indicator_ids_, dtype=object)
