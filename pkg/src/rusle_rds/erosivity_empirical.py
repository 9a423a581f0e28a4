"""Regional empirical erosivity equations.

An equation maps climatic indicators to R (MJ mm ha-1 h-1 yr-1)::

    inner = intercept + sum(coef_j * x_j ** exponent_j)
    R     = outer_coef * inner ** outer_exponent

which covers affine fits (outer = 1, 1) and single-indicator power laws.
Each equation carries the climate fingerprint of its home region, the
validity range of every input indicator and a plausibility range for R.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import ConfigError, ValidationError
from .raster import Raster, require_aligned

DEFAULT_OUTPUT_BOUNDS = (0.0, 10000.0)
DEFAULT_GUARD_MARGIN = 0.25


@dataclass(frozen=True)
class Term:
    indicator: str
    coef: float
    exponent: float = 1.0


@dataclass(frozen=True)
class EmpiricalEquation:
    id: str
    region: str
    terms: tuple[Term, ...]
    intercept: float = 0.0
    outer_coef: float = 1.0
    outer_exponent: float = 1.0
    fingerprint: Mapping[str, float] = field(default_factory=dict)
    input_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    output_bounds: tuple[float, float] = DEFAULT_OUTPUT_BOUNDS
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        lo, hi = self.output_bounds
        if not (np.isfinite(lo) and np.isfinite(hi) and 0 <= lo < hi):
            raise ConfigError(f"equation {self.id!r}: output bounds must satisfy 0 <= min < max")
        for ind, (a, b) in self.input_ranges.items():
            if not (np.isfinite(a) and np.isfinite(b) and a <= b):
                raise ConfigError(f"equation {self.id!r}: invalid range for {ind!r}")
        for t in self.terms:
            if t.indicator not in self.input_ranges:
                raise ConfigError(f"equation {self.id!r}: no validity range for input {t.indicator!r}")

    @property
    def inputs(self) -> list[str]:
        """Indicator ids used by the formula, in first-use order."""
        seen = []
        for t in self.terms:
            if t.indicator not in seen:
                seen.append(t.indicator)
        return seen

    @classmethod
    def from_config(cls, d: dict) -> "EmpiricalEquation":
        outer = d.get("outer", {"coef": 1.0, "exponent": 1.0})
        return cls(
            id=d["id"],
            region=d["region"],
            terms=tuple(Term(t["indicator"], float(t["coef"]), float(t.get("exponent", 1.0))) for t in d["terms"]),
            intercept=float(d.get("intercept", 0.0)),
            outer_coef=float(outer["coef"]),
            outer_exponent=float(outer["exponent"]),
            fingerprint={k: float(v) for k, v in d["fingerprint"].items()},
            input_ranges={k: (float(v[0]), float(v[1])) for k, v in d["input_ranges"].items()},
            output_bounds=tuple(float(b) for b in d.get("output_bounds", DEFAULT_OUTPUT_BOUNDS)),
            source=d.get("source", ""),
        )

    def evaluate_values(self, columns: Mapping[str, np.ndarray], shape=None) -> np.ndarray:
        """Evaluate on plain arrays; NaN where any input is NaN or the formula is undefined.

        ``shape`` is only needed for intercept-only equations.
        """
        missing = [i for i in self.inputs if i not in columns]
        if missing:
            raise ConfigError(f"equation {self.id!r}: missing indicators {missing}")
        if self.inputs:
            shape = np.shape(columns[self.inputs[0]])
        inner = np.full(() if shape is None else shape, self.intercept, dtype=np.float64)
        with np.errstate(all="ignore"):
            for t in self.terms:
                x = np.asarray(columns[t.indicator], dtype=np.float64)
                inner = inner + t.coef * (x if t.exponent == 1.0 else np.power(x, t.exponent))
            if self.outer_exponent == 1.0:
                r = self.outer_coef * inner
            else:
                r = self.outer_coef * np.power(inner, self.outer_exponent)
        return np.where(np.isfinite(r), r, np.nan)

    def guard_values(self, r: np.ndarray, columns: Mapping[str, np.ndarray], margin: float = DEFAULT_GUARD_MARGIN) -> np.ndarray:
        """Boolean validity: inputs inside their margin-extended ranges and R inside bounds.

        Each range end is pushed outward by ``margin`` times its own magnitude,
        so with margin 0.25 an input may reach 1.25 times its validity maximum.
        """
        if margin < 0:
            raise ValidationError("guard margin must be >= 0")
        r = np.asarray(r, dtype=np.float64)
        ok = np.isfinite(r)
        lo_r, hi_r = self.output_bounds
        with np.errstate(invalid="ignore"):
            ok &= (r >= lo_r) & (r <= hi_r)
            for ind in self.inputs:
                lo, hi = self.input_ranges[ind]
                x = np.asarray(columns[ind], dtype=np.float64)
                ok &= np.isfinite(x) & (x >= lo - margin * abs(lo)) & (x <= hi + margin * abs(hi))
        return ok


class EquationSet(Sequence):
    """Ordered, uniquely named list of empirical equations."""

    def __init__(self, equations: Iterable[EmpiricalEquation]):
        self._items = list(equations)
        ids = [e.id for e in self._items]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate equation ids")

    @classmethod
    def from_config(cls, entries: Iterable[dict], indicator_ids: Iterable[str] | None = None) -> "EquationSet":
        eqs = cls(EmpiricalEquation.from_config(e) for e in entries)
        if indicator_ids is not None:
            eqs.check_indicators(indicator_ids)
        return eqs

    def check_indicators(self, indicator_ids: Iterable[str]) -> None:
        known = set(indicator_ids)
        for e in self._items:
            missing = set(e.inputs) - known
            if missing:
                raise ConfigError(f"equation {e.id!r} uses unknown indicators {sorted(missing)}")

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self._items]

    @property
    def regions(self) -> list[str]:
        return sorted({e.region for e in self._items})

    def __getitem__(self, k):
        return self._items[k]

    def __len__(self):
        return len(self._items)

    def __repr__(self):
        return f"EquationSet({self.ids})"


def default_equations() -> EquationSet:
    """The shipped seven-equation set."""
    from .config import default_config

    cfg = default_config()
    return EquationSet.from_config(cfg["equations"], [i["id"] for i in cfg["indicators"]])


def _columns(eq: EmpiricalEquation, indicators: Mapping[str, Raster]):
    missing = [i for i in eq.inputs if i not in indicators]
    if missing:
        raise ConfigError(f"equation {eq.id!r}: indicators not supplied: {missing}")
    used = [indicators[i] for i in eq.inputs]
    if used:
        require_aligned(*used)
    return {i: indicators[i].data for i in eq.inputs}, used


def evaluate(eq: EmpiricalEquation, indicators: Mapping[str, Raster]) -> Raster:
    """Per-cell R estimate; nodata where any input indicator is nodata."""
    cols, used = _columns(eq, indicators)
    if not used:
        if not indicators:
            raise ConfigError(f"equation {eq.id!r}: no indicator raster to take the grid from")
        spec = next(iter(indicators.values())).spec
        return Raster.from_nan(spec, eq.evaluate_values({}, shape=spec.shape))
    r = eq.evaluate_values(cols)
    return Raster.from_nan(used[0].spec, r)


def guard(eq: EmpiricalEquation, r: Raster, indicators: Mapping[str, Raster], margin: float = DEFAULT_GUARD_MARGIN) -> tuple[Raster, Raster]:
    """Mask out-of-domain cells.

    Returns the guarded R (failing cells set to nodata) and a 0/1 validity
    raster. Passing cells keep their value bit for bit.
    """
    cols, used = _columns(eq, indicators)
    if used:
        require_aligned(r, *used)
    ok = eq.guard_values(r.data, cols, margin) & r.valid
    mask = Raster(r.spec, ok.astype(np.float64), valid=np.ones(r.shape, bool))
    return r.with_mask(ok), mask
