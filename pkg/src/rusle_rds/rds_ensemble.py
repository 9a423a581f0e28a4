"""Relative-distance similarity ensemble of empirical erosivity equations.

For every cell and equation, each climatic indicator is compared with the
equation's home-region value through the relative-distance similarity
``1 - |x - r| / (|x| + |r|)``. Per-indicator similarities are aggregated,
multiplied by the guard mask of the equation and normalised into weights.
The ensemble R at a cell is the weighted median of the member estimates and
the trustability is the weight-averaged aggregated similarity.

The array functions take equations along the first axis and cells along the
last one, with NaN marking missing values. Raster wrappers and the
:class:`RDSEnsemble` estimator are built on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .erosivity_empirical import DEFAULT_GUARD_MARGIN, EquationSet, default_equations
from .exceptions import (
    ConfigError,
    DegenerateWeightsError,
    EmptyRegionError,
    EmptyStackError,
    ValidationError,
)
from .raster import GridSpec, Raster, nan_reduce, require_aligned

AGGREGATIONS = ("mean", "median", "min", "geometric_mean")
VARIANTS = ("sum", "max")

_BELOW_ONE = np.nextafter(1.0, 0.0)


# ---------------------------------------------------------------------------
# array core


def rds_values(x, ref, variant: str = "sum") -> np.ndarray:
    """Relative-distance similarity of ``x`` to ``ref`` (broadcasting).

    ``variant="sum"`` divides by ``|x| + |ref|``, ``"max"`` by
    ``max(|x|, |ref|)``. Identical values give exactly 1 (including 0/0)
    and any difference gives strictly less than 1.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown RDS variant {variant!r}")
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    diff = np.abs(x - ref)
    if variant == "sum":
        scale = np.abs(x) + np.abs(ref)
    else:
        scale = np.maximum(np.abs(x), np.abs(ref))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = 1.0 - diff / np.where(scale > 0, scale, 1.0)
    s = np.clip(s, 0.0, 1.0)
    # differences below half an ulp of 1 would otherwise round to full similarity
    s = np.where((s == 1.0) & (x != ref), _BELOW_ONE, s)
    return np.where(np.isnan(x) | np.isnan(ref), np.nan, s)


def aggregate_values(sims, mode: str = "geometric_mean", axis: int = 0) -> np.ndarray:
    """Aggregate similarities along ``axis`` skipping NaN."""
    if mode not in AGGREGATIONS:
        raise ValidationError(f"unknown aggregation mode {mode!r}; expected one of {AGGREGATIONS}")
    sims = np.asarray(sims, dtype=np.float64)
    if sims.shape[axis] == 0:
        raise EmptyStackError("cannot aggregate an empty similarity stack")
    return nan_reduce(sims, mode, axis=axis)


def normalize_values(agg, valid) -> np.ndarray:
    """Weights ``s_i m_i / sum_j s_j m_j`` over axis 0.

    Columns where the sum is zero (no valid, similar equation) are all NaN.
    """
    agg = np.asarray(agg, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    sm = np.where(valid & ~np.isnan(agg), agg, 0.0)
    total = sm.sum(axis=0)
    support = total > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = sm / np.where(support, total, 1.0)
    return np.where(support, w, np.nan)


def _check_weights(values, weights):
    v = np.asarray(values, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if v.size == 0 or v.size != w.size:
        raise ValidationError("values and weights must be non-empty and of equal length")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise ValidationError("values and weights must be finite")
    if np.any(w < 0):
        raise ValidationError("weights must be >= 0")
    if not np.any(w > 0):
        raise DegenerateWeightsError("all weights are zero")
    return v, w


def weighted_median(values, weights) -> float:
    """Weighted median minimising ``sum(w_i * |v_i - m|)``.

    Values are sorted and the first one whose cumulative weight reaches half
    the total is returned. When the cumulative weight hits exactly half the
    total, the midpoint between that value and the next one is returned.
    Cumulative sums are compared in exact rational arithmetic.
    """
    v, w = _check_weights(values, weights)
    keep = w > 0
    v, w = v[keep], w[keep]
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    fw = [Fraction(float(x)) for x in w]
    half = sum(fw, Fraction(0)) / 2
    cum = Fraction(0)
    for k, wk in enumerate(fw):
        cum += wk
        if cum >= half:
            if cum == half and k + 1 < v.size:
                return float((v[k] + v[k + 1]) / 2.0)
            return float(v[k])
    return float(v[-1])  # pragma: no cover - unreachable with positive weights


def weighted_median_columns(values, weights) -> np.ndarray:
    """Column-wise weighted median of (n_members, n_cells) arrays.

    NaN values or non-positive weights exclude a member; columns with no
    member left give NaN. Ties with the exact half are resolved with the
    same exact arithmetic as :func:`weighted_median`.
    """
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape:
        raise ValidationError("values and weights must have the same shape")
    if v.ndim == 1:
        v, w = v[:, None], w[:, None]
    use = ~np.isnan(v) & ~np.isnan(w) & (w > 0)
    w = np.where(use, w, 0.0)
    v_sorted_key = np.where(use, v, np.inf)
    order = np.argsort(v_sorted_key, axis=0, kind="stable")
    vs = np.take_along_axis(v_sorted_key, order, axis=0)
    ws = np.take_along_axis(w, order, axis=0)
    cum = np.cumsum(ws, axis=0)
    total = cum[-1]
    ok = total > 0
    k = np.argmax(2.0 * cum >= total[None, :], axis=0)
    cols = np.arange(v.shape[1])
    out = vs[k, cols].copy()
    nxt = np.minimum(k + 1, v.shape[0] - 1)
    tie = (2.0 * cum[k, cols] == total) & (k + 1 < v.shape[0]) & (ws[nxt, cols] > 0)
    out = np.where(tie, (vs[k, cols] + vs[nxt, cols]) / 2.0, out)
    # near-ties may be misjudged by rounding in the float cumulative sum
    prev = np.where(k > 0, cum[np.maximum(k - 1, 0), cols], 0.0)
    tol = 64 * np.finfo(float).eps * np.where(ok, total, 1.0)
    fuzzy = ok & ((np.abs(2.0 * cum[k, cols] - total) <= tol) | (np.abs(2.0 * prev - total) <= tol))
    for c in np.flatnonzero(fuzzy):
        sel = use[:, c]
        out[c] = weighted_median(v[sel, c], w[sel, c])
    out[~ok] = np.nan
    return out


def trustability_values(agg, weights) -> np.ndarray:
    """Weight-averaged aggregated similarity per cell (axis 0 = equations)."""
    agg = np.asarray(agg, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    support = ~np.all(np.isnan(w), axis=0)
    terms = np.where((w > 0) & ~np.isnan(agg), w * np.nan_to_num(agg), 0.0)
    t = np.zeros(terms.shape[1:])
    for row in terms:
        t = t + row
    t = np.clip(t, 0.0, 1.0)
    return np.where(support, t, np.nan)


# ---------------------------------------------------------------------------
# raster level


@dataclass(frozen=True)
class EnsembleWeights:
    """Normalised per-cell weights over equations plus the trustability map.

    ``weights`` has shape (n_equations, nrows, ncols); NaN where no equation
    is valid.
    """

    spec: GridSpec
    weights: np.ndarray
    trustability: Raster

    @property
    def support(self) -> np.ndarray:
        return ~np.all(np.isnan(self.weights), axis=0)

    def as_rasters(self) -> list[Raster]:
        return [Raster.from_nan(self.spec, w) for w in self.weights]


def rds(x: Raster, ref_value: float, variant: str = "sum") -> Raster:
    """Similarity of every cell of ``x`` to the scalar ``ref_value``."""
    if not np.isfinite(ref_value):
        raise ValidationError("reference value must be finite")
    return Raster.from_nan(x.spec, rds_values(x.data, float(ref_value), variant))


def aggregate(sims: Sequence[Raster], mode: str = "geometric_mean") -> Raster:
    """Cellwise aggregation of similarity rasters."""
    sims = list(sims)
    if not sims:
        raise EmptyStackError("cannot aggregate an empty similarity list")
    require_aligned(*sims)
    out = aggregate_values(np.stack([s.data for s in sims]), mode)
    return Raster.from_nan(sims[0].spec, out)


def _stack_masks(valid_masks: Sequence[Raster]) -> np.ndarray:
    return np.stack([m.valid & (np.nan_to_num(m.data) != 0) for m in valid_masks])


def normalize_weights(agg_sims: Sequence[Raster], valid_masks: Sequence[Raster]) -> EnsembleWeights:
    """Normalise guard-masked aggregated similarities into ensemble weights."""
    agg_sims, valid_masks = list(agg_sims), list(valid_masks)
    if len(agg_sims) != len(valid_masks):
        raise ValidationError("similarity and mask lists must be parallel")
    if not agg_sims:
        raise EmptyStackError("no equations")
    require_aligned(*agg_sims, *valid_masks)
    a = np.stack([s.data for s in agg_sims])
    w = normalize_values(a, _stack_masks(valid_masks))
    spec = agg_sims[0].spec
    trust = Raster.from_nan(spec, trustability_values(a, w))
    return EnsembleWeights(spec=spec, weights=w, trustability=trust)


def ensemble_r(per_eq_r: Sequence[Raster], weights: EnsembleWeights) -> Raster:
    """Per-cell weighted median of the member estimates."""
    per_eq_r = list(per_eq_r)
    if len(per_eq_r) != weights.weights.shape[0]:
        raise ValidationError("member list does not match the weights")
    require_aligned(*per_eq_r)
    if not per_eq_r[0].spec.same_grid(weights.spec):
        raise ValidationError("weights and members are on different grids")
    v = np.stack([r.data for r in per_eq_r]).reshape(len(per_eq_r), -1)
    w = weights.weights.reshape(len(per_eq_r), -1)
    out = weighted_median_columns(v, w)
    return Raster.from_nan(per_eq_r[0].spec, out.reshape(weights.spec.shape))


def trustability(agg_sims: Sequence[Raster], weights: EnsembleWeights) -> Raster:
    """Weight-averaged aggregated similarity; nodata where the ensemble is."""
    agg_sims = list(agg_sims)
    if len(agg_sims) != weights.weights.shape[0]:
        raise ValidationError("similarity list does not match the weights")
    a = np.stack([s.data for s in agg_sims])
    return Raster.from_nan(agg_sims[0].spec, trustability_values(a, weights.weights))


# ---------------------------------------------------------------------------
# estimator


@dataclass
class EnsembleResult:
    """Everything computed for one feature matrix.

    Arrays are indexed (equation, cell) except ``similarity`` which is
    (equation, indicator, cell); ``ensemble`` and ``trustability`` are per
    cell.
    """

    similarity: np.ndarray
    aggregated: np.ndarray
    member_r: np.ndarray
    valid: np.ndarray
    weights: np.ndarray
    ensemble: np.ndarray
    trustability: np.ndarray


class RDSEnsemble(RegressorMixin, BaseEstimator):
    """Climatic-similarity ensemble of empirical erosivity equations.

    ``X`` holds one row per cell and one column per climatic indicator, in
    the order of ``indicator_ids``; NaN marks missing values.

    Parameters
    ----------
    equations : EquationSet, optional
        Defaults to the shipped seven-equation set.
    indicator_ids : list of str, optional
        Column names of ``X``. Defaults to the shipped registry order.
    aggregation : {"mean", "median", "min", "geometric_mean"}
    variant : {"sum", "max"}
        Denominator of the relative distance.
    guard_margin : float
        Relative extension of every validity range used by the guard.
    fingerprint_statistic : {"mean", "median"}
        Region summary used when ``fit`` receives region labels.

    Attributes
    ----------
    fingerprints_ : ndarray of shape (n_equations, n_indicators)
    equations_ : EquationSet
    """

    def __init__(
        self,
        equations=None,
        indicator_ids=None,
        aggregation="geometric_mean",
        variant="sum",
        guard_margin=DEFAULT_GUARD_MARGIN,
        fingerprint_statistic="mean",
    ):
        self.equations = equations
        self.indicator_ids = indicator_ids
        self.aggregation = aggregation
        self.variant = variant
        self.guard_margin = guard_margin
        self.fingerprint_statistic = fingerprint_statistic

    def fit(self, X, y=None, regions=None):
        """Fix the equation fingerprints.

        Without ``regions`` the fingerprints shipped with each equation are
        used. With ``regions`` (one label per row of ``X``) each equation's
        fingerprint is recomputed over the rows labelled with its region.
        """
        if self.aggregation not in AGGREGATIONS:
            raise ValidationError(f"unknown aggregation {self.aggregation!r}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown RDS variant {self.variant!r}")
        if self.guard_margin < 0:
            raise ValidationError("guard_margin must be >= 0")
        eqs = self.equations if self.equations is not None else default_equations()
        if self.indicator_ids is not None:
            ids = list(self.indicator_ids)
        else:
            from .climatology import default_registry

            ids = default_registry().ids
        eqs.check_indicators(ids)
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != len(ids):
            raise ValidationError(f"X has {X.shape[1]} columns but {len(ids)} indicator ids")

        fp = np.empty((len(eqs), len(ids)))
        if regions is None:
            for i, eq in enumerate(eqs):
                missing = [k for k in ids if k not in eq.fingerprint]
                if missing:
                    raise ConfigError(f"equation {eq.id!r}: fingerprint lacks {missing[:3]}...")
                fp[i] = [eq.fingerprint[k] for k in ids]
        else:
            regions = np.asarray(regions)
            if regions.shape[0] != X.shape[0]:
                raise ValidationError("regions must have one label per row of X")
            if self.fingerprint_statistic not in ("mean", "median"):
                raise ValidationError(f"unknown fingerprint statistic {self.fingerprint_statistic!r}")
            for i, eq in enumerate(eqs):
                rows = X[regions == eq.region]
                if rows.shape[0] == 0 or np.any(np.all(np.isnan(rows), axis=0)):
                    raise EmptyRegionError(f"region {eq.region!r} has no valid cell")
                fp[i] = np.nanmean(rows, axis=0) if self.fingerprint_statistic == "mean" else np.nanmedian(rows, axis=0)
        if not np.all(np.isfinite(fp)):
            raise ConfigError("fingerprints must be finite")

        self.equations_ = eqs
        self.indicator_ids_ = ids
        self.fingerprints_ = fp
        self.n_features_in_ = len(ids)
        return self

    def _check_X(self, X):
        check_is_fitted(self, "fingerprints_")
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X

    def similarity(self, X) -> np.ndarray:
        """Per-indicator similarities, shape (n_equations, n_indicators, n_cells)."""
        X = self._check_X(X)
        return rds_values(X.T[None, :, :], self.fingerprints_[:, :, None], self.variant)

    def transform(self, X):
        """Aggregated similarity per cell and equation, shape (n_cells, n_equations)."""
        return aggregate_values(self.similarity(X), self.aggregation, axis=1).T

    def members(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Guarded member estimates (NaN where invalid) and validity, both (n_equations, n_cells)."""
        X = self._check_X(X)
        cols = {k: X[:, j] for j, k in enumerate(self.indicator_ids_)}
        r = np.empty((len(self.equations_), X.shape[0]))
        ok = np.empty_like(r, dtype=bool)
        for i, eq in enumerate(self.equations_):
            ri = eq.evaluate_values(cols, shape=(X.shape[0],))
            ok[i] = eq.guard_values(ri, cols, self.guard_margin)
            r[i] = np.where(ok[i], ri, np.nan)
        return r, ok

    def compute(self, X) -> EnsembleResult:
        X = self._check_X(X)
        sim = self.similarity(X)
        agg = aggregate_values(sim, self.aggregation, axis=1)
        r, ok = self.members(X)
        w = normalize_values(agg, ok)
        return EnsembleResult(
            similarity=sim,
            aggregated=agg,
            member_r=r,
            valid=ok,
            weights=w,
            ensemble=weighted_median_columns(r, w),
            trustability=trustability_values(agg, w),
        )

    def predict(self, X):
        """Ensemble R per cell (NaN where no equation is valid)."""
        return self.compute(X).ensemble

    def trustability(self, X):
        return self.compute(X).trustability

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "equations_")
        return np.asarray(self.equations_.ids, dtype=object)
