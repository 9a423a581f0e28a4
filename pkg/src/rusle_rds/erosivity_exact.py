"""Exact rainfall erosivity from high-frequency gauge records.

A gauge series is a gap-free run of fixed-step (10 or 15 minute) depths.
Storms are separated by 6-hour periods with less than 1.27 mm; storms below
12.7 mm are dropped unless a single record carries at least 6.35 mm. Each
storm's kinetic energy E and maximum 30-minute intensity I30 give EI30, and
the R factor is the mean over years of the annual EI30 sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import FormatError, InsufficientDataError, OrderingError, ValidationError

ALLOWED_STEPS = (10, 15)
GAP_HOURS = 6.0
GAP_DEPTH_MM = 1.27
MIN_STORM_MM = 12.7
BURST_MM = 6.35
ENERGY_EQUATIONS = ("rusle", "wischmeier")


@dataclass(frozen=True)
class RainRecord:
    """Depth (mm) fallen during the ``step`` minutes starting at ``timestamp``."""

    timestamp: datetime
    depth: float
    step: int


@dataclass(frozen=True)
class RainSeries:
    """Array form of a gap-free gauge record."""

    times: np.ndarray  # datetime64[s]
    depths: np.ndarray
    step: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype="datetime64[s]")
        depths = np.asarray(self.depths, dtype=np.float64)
        if times.shape != depths.shape or times.ndim != 1:
            raise ValidationError("times and depths must be 1-D arrays of equal length")
        if self.step not in ALLOWED_STEPS:
            raise FormatError(f"step must be one of {ALLOWED_STEPS} minutes, got {self.step}")
        if not np.all(np.isfinite(depths)) or np.any(depths < 0):
            raise ValidationError("depths must be finite and >= 0")
        if times.size > 1:
            dt = np.diff(times.astype(np.int64))
            if np.any(dt <= 0):
                k = int(np.argmax(dt <= 0)) + 1
                raise OrderingError(f"timestamps not strictly increasing at record {k}")
            if np.any(dt != self.step * 60):
                k = int(np.argmax(dt != self.step * 60)) + 1
                raise FormatError(f"irregular step at record {k}: expected {self.step} min")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "depths", depths)

    @classmethod
    def from_records(cls, records: Sequence[RainRecord]) -> "RainSeries":
        records = list(records)
        if not records:
            return cls(np.empty(0, "datetime64[s]"), np.empty(0), 15)
        steps = {r.step for r in records}
        if len(steps) > 1:
            raise FormatError(f"mixed record steps {sorted(steps)}")
        times = np.array([np.datetime64(r.timestamp, "s") for r in records])
        return cls(times, np.array([r.depth for r in records], dtype=np.float64), steps.pop())

    def to_records(self) -> list[RainRecord]:
        return [
            RainRecord(t.astype(datetime), float(d), self.step)
            for t, d in zip(self.times.astype("datetime64[s]"), self.depths)
        ]

    def __len__(self):
        return self.depths.size


@dataclass(frozen=True)
class Storm:
    """A contiguous run of records from the first to the last wet one."""

    start_index: int
    depths: np.ndarray
    start: np.datetime64
    step: int

    @property
    def end(self) -> np.datetime64:
        return self.start + np.timedelta64(self.step * len(self.depths), "m")

    @property
    def total_depth(self) -> float:
        return math.fsum(self.depths)

    @property
    def year(self) -> int:
        return int(self.start.astype("datetime64[Y]").astype(np.int64)) + 1970


@dataclass(frozen=True)
class EventErosivity:
    energy: float  # MJ ha-1
    i30: float  # mm h-1
    ei30: float  # MJ mm ha-1 h-1
    start: np.datetime64 | None = None


def _as_series(series) -> RainSeries:
    if isinstance(series, RainSeries):
        return series
    return RainSeries.from_records(series)


def _forward_window_sums(depths: np.ndarray, at: np.ndarray, n: int) -> np.ndarray:
    """Sum of the ``n`` records following each index in ``at`` (truncated at the end)."""
    padded = np.concatenate([depths, np.zeros(n)])
    out = np.zeros(at.size)
    for j in range(1, n + 1):
        out += padded[at + j]
    return out


def split_events(
    series,
    qualify: bool = True,
    gap_hours: float = GAP_HOURS,
    gap_depth: float = GAP_DEPTH_MM,
    min_depth: float = MIN_STORM_MM,
    burst_depth: float = BURST_MM,
) -> list[Storm]:
    """Split a gauge series into storms.

    A storm ends at a wet record when the following ``gap_hours`` bring less
    than ``gap_depth`` mm; the next wet record opens a new storm. With
    ``qualify`` only storms of at least ``min_depth`` mm, or with a record of
    at least ``burst_depth`` mm, are returned.
    """
    s = _as_series(series)
    d = s.depths
    wet = np.flatnonzero(d > 0)
    if wet.size == 0:
        return []
    n_gap = int(round(gap_hours * 60 / s.step))
    after = _forward_window_sums(d, wet[:-1], n_gap)
    # near the threshold, decide with a correctly rounded sum
    close = np.abs(after - gap_depth) <= 1e-9 * max(gap_depth, 1.0)
    for k in np.flatnonzero(close):
        a = wet[k]
        after[k] = math.fsum(d[a + 1 : a + 1 + n_gap])
    breaks = np.flatnonzero(after < gap_depth)
    starts = np.r_[wet[0], wet[breaks + 1]]
    ends = np.r_[wet[breaks], wet[-1]]

    storms = []
    for a, b in zip(starts, ends):
        depths = d[a : b + 1]
        if qualify and not (math.fsum(depths) >= min_depth or depths.max() >= burst_depth):
            continue
        storms.append(Storm(int(a), depths.copy(), s.times[a], s.step))
    return storms


def unit_energy(intensity, equation: str = "rusle") -> np.ndarray:
    """Kinetic energy per mm of rain (MJ ha-1 mm-1) at intensity in mm h-1."""
    i = np.asarray(intensity, dtype=np.float64)
    if equation == "rusle":
        return 0.29 * (1.0 - 0.72 * np.exp(-0.05 * i))
    if equation == "wischmeier":
        with np.errstate(divide="ignore"):
            e = 0.119 + 0.0873 * np.log10(np.minimum(i, 76.0))
        return np.maximum(e, 0.0)
    raise ValidationError(f"unknown energy equation {equation!r}; expected one of {ENERGY_EQUATIONS}")


def event_energy(storm: Storm, equation: str = "rusle") -> float:
    """Storm kinetic energy E (MJ ha-1), summed record by record."""
    d = storm.depths
    if d.size == 0:
        raise ValidationError("empty storm")
    i = d * (60.0 / storm.step)
    e = np.where(d > 0, unit_energy(i, equation), 0.0)
    return float(np.sum(e * d))


def max_30min_intensity(storm: Storm) -> float:
    """Maximum 30-minute intensity (mm h-1) over record-aligned windows.

    Storms shorter than 30 minutes use their total depth over half an hour.
    """
    d = storm.depths
    if d.size == 0:
        raise ValidationError("empty storm")
    if 30 % storm.step:
        raise FormatError(f"step {storm.step} does not divide 30 minutes")
    w = 30 // storm.step
    if d.size < w:
        return float(d.sum() * 2.0)
    m = d.size - w + 1
    sums = d[:m].copy()
    for j in range(1, w):
        sums += d[j : j + m]
    return float(sums.max() * 2.0)


def event_erosivity(storm: Storm, equation: str = "rusle") -> EventErosivity:
    e = event_energy(storm, equation)
    i30 = max_30min_intensity(storm)
    return EventErosivity(energy=e, i30=i30, ei30=e * i30, start=storm.start)


def _complete_years(s: RainSeries) -> list[int]:
    if len(s) == 0:
        return []
    first = s.times[0]
    last_end = s.times[-1] + np.timedelta64(s.step, "m")
    y0 = int(first.astype("datetime64[Y]").astype(np.int64)) + 1970
    y1 = int(s.times[-1].astype("datetime64[Y]").astype(np.int64)) + 1970
    years = []
    for y in range(y0, y1 + 1):
        if first <= np.datetime64(f"{y}-01-01T00:00:00") and last_end >= np.datetime64(f"{y + 1}-01-01T00:00:00"):
            years.append(y)
    return years


def annual_erosivity(series, equation: str = "rusle", complete_years_only: bool = True, **split_kw) -> dict[int, list[EventErosivity]]:
    """Qualifying storm erosivities grouped by the calendar year a storm starts in.

    Every covered year appears as a key, even without storms. With
    ``complete_years_only`` years not fully covered by the record are left out.
    """
    s = _as_series(series)
    if complete_years_only:
        years = _complete_years(s)
    else:
        years = sorted({int(y) + 1970 for y in s.times.astype("datetime64[Y]").astype(np.int64)})
    out: dict[int, list[EventErosivity]] = {y: [] for y in years}
    for storm in split_events(s, **split_kw):
        if storm.year in out:
            out[storm.year].append(event_erosivity(storm, equation))
    return out


def r_factor(yearly: Mapping[int, Iterable[EventErosivity]]) -> float:
    """Mean over years of the annual EI30 sums (MJ mm ha-1 h-1 yr-1)."""
    if not yearly:
        raise InsufficientDataError("no year to average over")
    total = 0.0
    for y in sorted(yearly):
        total += sum(ev.ei30 for ev in yearly[y])
    return total / len(yearly)


def gauge_r_factor(series, equation: str = "rusle", **kw) -> float:
    """R factor of a gauge series over its complete calendar years."""
    return r_factor(annual_erosivity(series, equation=equation, **kw))


def make_records(start: datetime, depths: Iterable[float], step: int = 15) -> list[RainRecord]:
    """Regular records from a start instant and a depth sequence."""
    dt = timedelta(minutes=step)
    return [RainRecord(start + k * dt, float(v), step) for k, v in enumerate(depths)]
