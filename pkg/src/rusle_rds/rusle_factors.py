"""Non-erosivity RUSLE factors: K, L, S, C, St and P."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .exceptions import DomainError, UnmappedClassError, ValidationError
from .raster import GridSpec, Raster, map_cells, require_aligned

# representative particle diameters (mm) of the texture classes
CLAY_MM = 0.001
SILT_MM = 0.026
SAND_MM = 1.025

UNIT_PLOT_LENGTH_M = 22.13


@dataclass(frozen=True)
class SoilTexture:
    """Topsoil sand, silt and clay percentages on one grid."""

    sand_pct: Raster
    silt_pct: Raster
    clay_pct: Raster

    def validate(self, tol: float = 1.0) -> np.ndarray:
        """Return the joint valid mask; raise if fractions are out of range."""
        require_aligned(self.sand_pct, self.silt_pct, self.clay_pct)
        ok = self.sand_pct.valid & self.silt_pct.valid & self.clay_pct.valid
        parts = [r.data[ok] for r in (self.sand_pct, self.silt_pct, self.clay_pct)]
        for p in parts:
            if np.any((p < 0) | (p > 100)):
                raise ValidationError("texture percentages must lie in [0, 100]")
        total = parts[0] + parts[1] + parts[2]
        if np.any(np.abs(total - 100.0) > tol):
            raise ValidationError(f"sand + silt + clay must be 100 +/- {tol} %")
        return ok


class CoverTable(dict):
    """Land-cover class code -> C factor."""

    def __init__(self, mapping: Mapping = ()):
        super().__init__({int(k): float(v) for k, v in dict(mapping).items()})
        bad = {k: v for k, v in self.items() if not 0.0 <= v <= 1.0}
        if bad:
            raise ValidationError(f"C values must lie in [0, 1]: {bad}")


@dataclass(frozen=True)
class FactorSet:
    K: Raster
    L: Raster
    S: Raster
    C: Raster
    St: Raster
    P: Raster

    def as_dict(self) -> dict[str, Raster]:
        return {"K": self.K, "L": self.L, "S": self.S, "C": self.C, "St": self.St, "P": self.P}


def k_from_fractions(sand, silt, clay) -> np.ndarray:
    """Erodibility (t ha h ha-1 MJ-1 mm-1) from texture fractions in percent."""
    sand, silt, clay = (np.asarray(a, dtype=np.float64) / 100.0 for a in (sand, silt, clay))
    dg = np.exp(sand * np.log(SAND_MM) + silt * np.log(SILT_MM) + clay * np.log(CLAY_MM))
    z = (np.log10(dg) + 1.659) / 0.7101
    return 0.0034 + 0.0405 * np.exp(-0.5 * z * z)


def k_factor(tex: SoilTexture) -> Raster:
    """K via the geometric mean particle diameter of the texture classes."""
    ok = tex.validate()
    out = np.full(ok.shape, np.nan)
    out[ok] = k_from_fractions(tex.sand_pct.data[ok], tex.silt_pct.data[ok], tex.clay_pct.data[ok])
    return Raster(tex.sand_pct.spec, out, valid=ok)


def slope(dem: Raster) -> Raster:
    """Slope angle (radians) with Horn's 3x3 kernel.

    Grid edges are padded by linear extrapolation, which turns the kernel
    into one-sided differences there. Cells with a nodata neighbour are
    nodata.
    """
    z = dem.data
    cs = dem.spec.cellsize
    p = np.pad(z, 1, mode="edge")
    # linear extrapolation 2*z0 - z1 across each border
    if z.shape[0] > 1:
        p[0, 1:-1] = 2 * z[0] - z[1]
        p[-1, 1:-1] = 2 * z[-1] - z[-2]
    if z.shape[1] > 1:
        p[1:-1, 0] = 2 * z[:, 0] - z[:, 1]
        p[1:-1, -1] = 2 * z[:, -1] - z[:, -2]
    p[0, 0] = p[0, 1] + p[1, 0] - p[1, 1]
    p[0, -1] = p[0, -2] + p[1, -1] - p[1, -2]
    p[-1, 0] = p[-1, 1] + p[-2, 0] - p[-2, 1]
    p[-1, -1] = p[-1, -2] + p[-2, -1] - p[-2, -2]

    a, b, c = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    d, f = p[1:-1, :-2], p[1:-1, 2:]
    g, h, i = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    dzdx = ((c + 2 * f + i) - (a + 2 * d + g)) / (8 * cs)
    dzdy = ((g + 2 * h + i) - (a + 2 * b + c)) / (8 * cs)
    theta = np.arctan(np.hypot(dzdx, dzdy))

    v = np.pad(dem.valid, 1, mode="edge")
    ok = np.ones(z.shape, bool)
    for di in range(3):
        for dj in range(3):
            ok &= v[di : di + z.shape[0], dj : dj + z.shape[1]]
    return Raster(dem.spec, np.where(ok, theta, np.nan), valid=ok)


def s_from_slope(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return -1.5 + 17.0 / (1.0 + np.exp(2.3 - 6.1 * np.sin(theta)))


def s_factor(slope_rad: Raster) -> Raster:
    """Slope steepness factor from a single continuous function of slope angle."""
    th = slope_rad.data[slope_rad.valid]
    if np.any((th < 0) | (th >= np.pi / 2)):
        raise DomainError("slope angle must lie in [0, pi/2)")
    return map_cells(slope_rad, s_from_slope)


def l_from_slope(theta, slope_length_m) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    lam = np.asarray(slope_length_m, dtype=np.float64)
    st = np.sin(theta)
    beta = (st / 0.0896) / (3.0 * np.power(st, 0.8) + 0.56)
    m = beta / (1.0 + beta)
    ratio = lam / UNIT_PLOT_LENGTH_M
    # (22.13/22.13)**m and x**0 are both exactly 1
    return np.where((ratio == 1.0) | (m == 0.0), 1.0, np.power(ratio, m))


def l_factor(slope_rad: Raster, slope_length_m) -> Raster:
    """Slope length factor ``(lambda / 22.13) ** m`` with the McCool exponent.

    ``slope_length_m`` is a scalar or a raster on the same grid.
    """
    if isinstance(slope_length_m, Raster):
        require_aligned(slope_rad, slope_length_m)
        ok = slope_rad.valid & slope_length_m.valid
        lam = slope_length_m.data
        if np.any(lam[ok] <= 0):
            raise DomainError("slope length must be > 0")
    else:
        lam = float(slope_length_m)
        if not np.isfinite(lam) or lam <= 0:
            raise DomainError("slope length must be > 0")
        ok = slope_rad.valid
    out = np.full(slope_rad.shape, np.nan)
    with np.errstate(invalid="ignore"):
        full = l_from_slope(slope_rad.data, lam)
    out[ok] = full[ok]
    return Raster(slope_rad.spec, out, valid=ok)


def c_factor(landcover: Raster, table: Mapping) -> Raster:
    """Per-cell lookup of cover-management values by land-cover code."""
    table = table if isinstance(table, CoverTable) else CoverTable(table)
    ok = landcover.valid
    codes = landcover.data[ok]
    if np.any(codes != np.round(codes)):
        raise ValidationError("land-cover codes must be integers")
    codes = codes.astype(np.int64)
    uniq = np.unique(codes)
    missing = [int(c) for c in uniq if int(c) not in table]
    if missing:
        raise UnmappedClassError(missing)
    lut = {int(c): table[int(c)] for c in uniq}
    out = np.full(landcover.shape, np.nan)
    out[ok] = np.array([lut[int(c)] for c in codes]) if codes.size else []
    return Raster(landcover.spec, out, valid=ok)


def st_from_cover(rock_pct) -> np.ndarray:
    rc = np.asarray(rock_pct, dtype=np.float64)
    return np.minimum(np.exp(-0.04 * (rc - 10.0)), 1.0)


def st_factor(stoniness_pct: Raster) -> Raster:
    """Stoniness correction, clamped to 1 below 10 % rock-fragment cover."""
    rc = stoniness_pct.data[stoniness_pct.valid]
    if np.any((rc < 0) | (rc > 100)):
        raise ValidationError("stoniness must lie in [0, 100] %")
    return map_cells(stoniness_pct, st_from_cover)


def p_factor(spec: GridSpec) -> Raster:
    """Support practice factor, 1 everywhere."""
    return Raster.full(spec, 1.0)


def compute_factors(
    texture: SoilTexture,
    dem: Raster,
    landcover: Raster,
    stoniness_pct: Raster,
    cover_table: Mapping,
    slope_length_m=None,
) -> FactorSet:
    """All non-R factors on the DEM grid; slope length defaults to the cell size."""
    require_aligned(dem, texture.sand_pct, texture.silt_pct, texture.clay_pct, landcover, stoniness_pct)
    theta = slope(dem)
    lam = dem.spec.cellsize if slope_length_m is None else slope_length_m
    return FactorSet(
        K=k_factor(texture),
        L=l_factor(theta, lam),
        S=s_factor(theta),
        C=c_factor(landcover, cover_table),
        St=st_factor(stoniness_pct),
        P=p_factor(dem.spec),
    )
