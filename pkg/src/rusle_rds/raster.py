"""Grid data model, alignment and cellwise combinators.

Rasters are stored north-up: row 0 is the northernmost row, matching the
on-disk ESRI ASCII order. Internally a raster keeps a float64 array with NaN
in nodata cells plus an explicit validity mask, so a computed value can never
be mistaken for the nodata sentinel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import AlignmentError, DomainError, EmptyStackError, ExtentError, ValidationError

DEFAULT_NODATA = -9999.0

REDUCERS = ("mean", "median", "min", "max", "geometric_mean", "sum")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a north-up grid with square cells."""

    ncols: int
    nrows: int
    cellsize: float
    x_ll: float = 0.0
    y_ll: float = 0.0
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        if int(self.ncols) != self.ncols or self.ncols < 1:
            raise ValidationError(f"ncols must be a positive integer, got {self.ncols!r}")
        if int(self.nrows) != self.nrows or self.nrows < 1:
            raise ValidationError(f"nrows must be a positive integer, got {self.nrows!r}")
        if not (math.isfinite(self.cellsize) and self.cellsize > 0):
            raise ValidationError(f"cellsize must be > 0, got {self.cellsize!r}")
        if not (math.isfinite(self.x_ll) and math.isfinite(self.y_ll)):
            raise ValidationError("lower-left corner must be finite")
        if not math.isfinite(self.nodata):
            raise ValidationError("nodata sentinel must be a finite number")
        object.__setattr__(self, "ncols", int(self.ncols))
        object.__setattr__(self, "nrows", int(self.nrows))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def x_ur(self) -> float:
        return self.x_ll + self.ncols * self.cellsize

    @property
    def y_ur(self) -> float:
        return self.y_ll + self.nrows * self.cellsize

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (x, y) of cell centres, shaped (ncols,) and (nrows,), north first."""
        x = self.x_ll + (np.arange(self.ncols) + 0.5) * self.cellsize
        y = self.y_ur - (np.arange(self.nrows) + 0.5) * self.cellsize
        return x, y

    def same_grid(self, other: "GridSpec") -> bool:
        """Geometry equality, ignoring the nodata sentinel."""
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.cellsize == other.cellsize
            and self.x_ll == other.x_ll
            and self.y_ll == other.y_ll
        )


class Raster:
    """Immutable georeferenced grid with explicit nodata.

    Parameters
    ----------
    spec : GridSpec
    values : array_like, shape (nrows, ncols)
        Cell values. Unless ``valid`` is given, cells equal to
        ``spec.nodata`` or NaN are nodata.
    valid : array_like of bool, optional
        Authoritative validity mask. Values under invalid cells are ignored.
    """

    __slots__ = ("spec", "_data", "_valid")

    def __init__(self, spec: GridSpec, values, valid=None):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim == 1 and arr.size == spec.ncols * spec.nrows:
            arr = arr.reshape(spec.shape)
        if arr.shape != spec.shape:
            raise ValidationError(f"values shape {arr.shape} does not match grid {spec.shape}")
        if valid is None:
            mask = ~(np.isnan(arr) | (arr == spec.nodata))
        else:
            mask = np.array(valid, dtype=bool, copy=True)
            if mask.shape != spec.shape:
                raise ValidationError("validity mask shape does not match grid")
            mask &= ~np.isnan(arr)
        if not np.all(np.isfinite(arr[mask])):
            raise ValidationError("raster contains non-finite values outside the nodata mask")
        arr[~mask] = np.nan
        arr.flags.writeable = False
        mask.flags.writeable = False
        self.spec = spec
        self._data = arr
        self._valid = mask

    @classmethod
    def from_nan(cls, spec: GridSpec, data) -> "Raster":
        """Build from an array where NaN (and only NaN) marks nodata."""
        data = np.asarray(data, dtype=np.float64)
        return cls(spec, data, valid=~np.isnan(data))

    @classmethod
    def full(cls, spec: GridSpec, value: float) -> "Raster":
        return cls(spec, np.full(spec.shape, float(value)), valid=np.ones(spec.shape, bool))

    @property
    def data(self) -> np.ndarray:
        """Read-only float array with NaN in nodata cells."""
        return self._data

    @property
    def valid(self) -> np.ndarray:
        """Read-only boolean mask, True on valid cells."""
        return self._valid

    @property
    def values(self) -> np.ndarray:
        """Copy of the cell values with the nodata sentinel in invalid cells."""
        out = self._data.copy()
        out[~self._valid] = self.spec.nodata
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    def with_mask(self, valid) -> "Raster":
        """Return a copy additionally masked by ``valid``."""
        return Raster(self.spec, self._data, valid=self._valid & np.asarray(valid, bool))

    def equals(self, other: "Raster") -> bool:
        """Bitwise equality of geometry, mask and valid values."""
        if not isinstance(other, Raster):
            return False
        if self.spec != other.spec or not np.array_equal(self._valid, other._valid):
            return False
        a = self._data[self._valid]
        b = other._data[other._valid]
        return a.tobytes() == b.tobytes()

    def __eq__(self, other):
        return self.equals(other)

    __hash__ = None

    def __repr__(self):
        n = int(self._valid.sum())
        return f"Raster({self.spec.nrows}x{self.spec.ncols}, valid={n})"


def require_aligned(*rasters: Raster) -> GridSpec:
    """Raise :class:`AlignmentError` unless all rasters share one grid."""
    if not rasters:
        raise EmptyStackError("no rasters given")
    spec = rasters[0].spec
    for r in rasters[1:]:
        if not spec.same_grid(r.spec):
            raise AlignmentError(f"grid mismatch: {spec} vs {r.spec}; align first")
    return spec


def _overlaps(a: GridSpec, b: GridSpec) -> bool:
    return (
        min(a.x_ur, b.x_ur) > max(a.x_ll, b.x_ll)
        and min(a.y_ur, b.y_ur) > max(a.y_ll, b.y_ll)
    )


def align(src: Raster, target: GridSpec, method: str = "nearest") -> Raster:
    """Resample ``src`` onto ``target``.

    Both grids must use the same planar coordinate system. Target cell
    centres outside the source extent become nodata. Bilinear interpolation
    uses the four surrounding source centres (edge-replicated at the
    border) and falls back to the containing cell if any of them is nodata.
    """
    if method not in ("nearest", "bilinear"):
        raise ValidationError(f"unknown resampling method {method!r}")
    s = src.spec
    if not _overlaps(s, target):
        raise ExtentError("source and target extents do not overlap")
    if s.same_grid(target):
        return Raster(target, src.data, valid=src.valid)

    tx, ty = target.cell_centers()
    # fractional positions in source index space, cell-edge based
    fc = (tx - s.x_ll) / s.cellsize
    fr = (s.y_ur - ty) / s.cellsize
    inside_c = (fc >= 0) & (fc < s.ncols)
    inside_r = (fr >= 0) & (fr < s.nrows)
    ci = np.clip(np.floor(fc).astype(np.int64), 0, s.ncols - 1)
    ri = np.clip(np.floor(fr).astype(np.int64), 0, s.nrows - 1)
    inside = inside_r[:, None] & inside_c[None, :]

    data = src.data
    valid = src.valid
    near = data[ri[:, None], ci[None, :]]
    near_ok = valid[ri[:, None], ci[None, :]]
    out = near.copy()
    ok = near_ok & inside

    if method == "bilinear":
        gc = fc - 0.5
        gr = fr - 0.5
        c0 = np.floor(gc).astype(np.int64)
        r0 = np.floor(gr).astype(np.int64)
        tc = gc - c0
        tr = gr - r0
        c1 = np.clip(c0 + 1, 0, s.ncols - 1)
        r1 = np.clip(r0 + 1, 0, s.nrows - 1)
        c0 = np.clip(c0, 0, s.ncols - 1)
        r0 = np.clip(r0, 0, s.nrows - 1)
        tc = np.where(c0 == c1, 0.0, tc)
        tr = np.where(r0 == r1, 0.0, tr)
        R0, C0 = r0[:, None], c0[None, :]
        R1, C1 = r1[:, None], c1[None, :]
        TR, TC = tr[:, None], tc[None, :]
        all_ok = valid[R0, C0] & valid[R0, C1] & valid[R1, C0] & valid[R1, C1]
        with np.errstate(invalid="ignore"):
            top = data[R0, C0] * (1.0 - TC) + data[R0, C1] * TC
            bot = data[R1, C0] * (1.0 - TC) + data[R1, C1] * TC
            bil = top * (1.0 - TR) + bot * TR
        use = all_ok & inside
        out = np.where(use, bil, out)

    out = np.where(ok, out, np.nan)
    return Raster(target, out, valid=ok)


def zip_map(a: Raster, b: Raster, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Raster:
    """Apply a vectorised binary ``f`` cellwise; nodata where either input is."""
    spec = require_aligned(a, b)
    ok = a.valid & b.valid
    out = np.full(spec.shape, np.nan)
    with np.errstate(all="ignore"):
        out[ok] = f(a.data[ok], b.data[ok])
    if not np.all(np.isfinite(out[ok])):
        raise DomainError("cellwise function produced non-finite values")
    return Raster(a.spec, out, valid=ok)


def map_cells(r: Raster, f: Callable[[np.ndarray], np.ndarray]) -> Raster:
    """Apply a vectorised unary ``f`` on valid cells."""
    ok = r.valid
    out = np.full(r.shape, np.nan)
    with np.errstate(all="ignore"):
        out[ok] = f(r.data[ok])
    if not np.all(np.isfinite(out[ok])):
        raise DomainError("cellwise function produced non-finite values")
    return Raster(r.spec, out, valid=ok)


def _nan_mean(stack, axis):
    # a rounded mean can fall an ulp outside the data range; pull it back
    m = np.nanmean(stack, axis=axis)
    return np.clip(m, np.nanmin(stack, axis=axis), np.nanmax(stack, axis=axis))


def nan_reduce(stack: np.ndarray, reducer: str, axis: int = 0) -> np.ndarray:
    """NaN-skipping reduction; all-NaN slices give NaN."""
    if reducer not in REDUCERS:
        raise ValidationError(f"unknown reducer {reducer!r}; expected one of {REDUCERS}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if reducer == "mean":
            return _nan_mean(stack, axis)
        if reducer == "median":
            return np.nanmedian(stack, axis=axis)
        if reducer == "min":
            return np.nanmin(stack, axis=axis)
        if reducer == "max":
            return np.nanmax(stack, axis=axis)
        if reducer == "sum":
            out = np.nansum(stack, axis=axis)
            out[np.all(np.isnan(stack), axis=axis)] = np.nan
            return out
        if np.any(stack < 0):
            raise DomainError("geometric_mean requires non-negative inputs")
        with np.errstate(divide="ignore"):
            gm = np.exp(np.nanmean(np.log(stack), axis=axis))
        # keep min <= gm <= mean despite rounding in exp/log
        lo = np.nanmin(stack, axis=axis)
        hi = _nan_mean(stack, axis)
        return np.minimum(np.maximum(gm, lo), hi)


def reduce_stack(rs: Sequence[Raster], reducer: str) -> Raster:
    """Cellwise reduction over the rasters valid at each cell."""
    rs = list(rs)
    if not rs:
        raise EmptyStackError("cannot reduce an empty raster list")
    require_aligned(*rs)
    stack = np.stack([r.data for r in rs])
    if reducer == "geometric_mean" and np.any(stack[~np.isnan(stack)] < 0):
        raise DomainError("geometric_mean requires non-negative inputs")
    out = nan_reduce(stack, reducer)
    return Raster(rs[0].spec, out, valid=~np.isnan(out))
