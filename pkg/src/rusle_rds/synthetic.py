"""Deterministic synthetic inputs: regional climates, daily stacks, gauges, terrain.

The four regional climates are coarse monthly descriptions (wet-day
probability and mean wet-day depth) meant to mimic the rainfall regime of
each equation's home region. They feed the shipped fingerprints and the
demo dataset; they are not observations.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .climatology import DailyPrecipStack
from .erosivity_exact import RainSeries
from .raster import GridSpec, Raster

# month-by-month (wet-day probability, mean depth on wet days in mm)
REGIONAL_CLIMATES = {
    "Belgium": (
        [0.55, 0.50, 0.50, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.50, 0.55, 0.55],
        [4.0, 4.0, 4.0, 4.0, 5.0, 5.5, 6.0, 6.0, 5.5, 5.0, 4.5, 4.5],
    ),
    "Bavaria": (
        [0.45, 0.45, 0.45, 0.50, 0.55, 0.55, 0.55, 0.50, 0.45, 0.45, 0.45, 0.45],
        [3.5, 3.5, 4.0, 5.0, 6.5, 8.0, 8.5, 8.0, 6.0, 5.0, 4.0, 4.0],
    ),
    "Algarve": (
        [0.30, 0.28, 0.25, 0.22, 0.15, 0.07, 0.02, 0.03, 0.10, 0.20, 0.28, 0.30],
        [10.0, 9.0, 8.5, 7.5, 7.0, 6.0, 5.0, 6.0, 9.0, 11.0, 11.0, 11.0],
    ),
    "Sicily": (
        [0.35, 0.32, 0.30, 0.25, 0.15, 0.08, 0.04, 0.06, 0.15, 0.25, 0.30, 0.35],
        [10.0, 9.0, 8.5, 8.0, 7.0, 7.0, 8.0, 9.0, 13.0, 14.0, 13.0, 11.0],
    ),
}

GAMMA_SHAPE = 0.8


def daily_dates(first_year: int, n_years: int) -> np.ndarray:
    return np.arange(
        np.datetime64(f"{first_year}-01-01"), np.datetime64(f"{first_year + n_years}-01-01"), dtype="datetime64[D]"
    )


def daily_series(prob, mean_depth, dates, rng: np.random.Generator, n_cells: int = 1) -> np.ndarray:
    """Daily depths (n_days, n_cells) from per-cell monthly parameters.

    ``prob`` and ``mean_depth`` have shape (12,) or (12, n_cells). Depths are
    rounded to 0.1 mm.
    """
    prob = np.broadcast_to(np.asarray(prob, float).reshape(12, -1), (12, n_cells))
    mean_depth = np.broadcast_to(np.asarray(mean_depth, float).reshape(12, -1), (12, n_cells))
    months = dates.astype("datetime64[M]").astype(np.int64) % 12
    p = prob[months]
    mu = mean_depth[months]
    wet = rng.random(p.shape) < p
    amount = rng.gamma(GAMMA_SHAPE, mu / GAMMA_SHAPE)
    return np.where(wet, np.round(amount, 1), 0.0)


def regional_daily(region: str, n_years: int = 30, seed: int = 0, first_year: int = 1981):
    """Dates and a single-cell daily series for one regional climate."""
    prob, mu = REGIONAL_CLIMATES[region]
    dates = daily_dates(first_year, n_years)
    rng = np.random.default_rng(seed)
    return dates, daily_series(prob, mu, dates, rng)


def demo_climate_params(nrows: int, ncols: int):
    """Bilinear blend of the four regional climates across the grid corners.

    North-west Belgium, north-east Bavaria, south-west Algarve, south-east
    Sicily. Returns (prob, mean_depth), each (12, nrows*ncols).
    """
    u = np.linspace(0.0, 1.0, ncols)[None, :]
    v = np.linspace(0.0, 1.0, nrows)[:, None]
    wts = {
        "Belgium": (1 - u) * (1 - v),
        "Bavaria": u * (1 - v),
        "Algarve": (1 - u) * v,
        "Sicily": u * v,
    }
    prob = np.zeros((12, nrows * ncols))
    mu = np.zeros((12, nrows * ncols))
    for name, w in wts.items():
        p, m = REGIONAL_CLIMATES[name]
        prob += np.asarray(p)[:, None] * w.ravel()[None, :]
        mu += np.asarray(m)[:, None] * w.ravel()[None, :]
    return prob, mu


def demo_stack(spec: GridSpec, first_year: int = 2001, n_years: int = 3, seed: int = 7) -> DailyPrecipStack:
    prob, mu = demo_climate_params(spec.nrows, spec.ncols)
    dates = daily_dates(first_year, n_years)
    x = daily_series(prob, mu, dates, np.random.default_rng(seed), spec.nrows * spec.ncols)
    return DailyPrecipStack(spec, dates, x.reshape(len(dates), spec.nrows, spec.ncols))


def gauge_series(
    first_year: int,
    n_years: int,
    rng: np.random.Generator,
    step: int = 15,
    storms_per_year: float = 60.0,
    mean_storm_mm: float = 12.0,
) -> RainSeries:
    """Sparse high-frequency record: storms of random length and burst shape.

    Depths are rounded to 0.01 mm so that sums can land exactly on the
    storm-separation threshold, which exercises the boundary handling.
    """
    start = np.datetime64(f"{first_year}-01-01T00:00:00", "s")
    end = np.datetime64(f"{first_year + n_years}-01-01T00:00:00", "s")
    n = int((end - start) / np.timedelta64(step, "m"))
    depths = np.zeros(n)
    per_day = 24 * 60 // step
    n_storms = rng.poisson(storms_per_year * n_years)
    for _ in range(n_storms):
        at = int(rng.integers(0, n))
        length = int(rng.integers(1, 8 * 60 // step))
        total = rng.gamma(1.2, mean_storm_mm / 1.2)
        shape = rng.dirichlet(np.full(length, 0.6))
        seg = np.round(total * shape, 2)
        stop = min(n, at + length)
        depths[at:stop] += seg[: stop - at]
        if rng.random() < 0.3:  # trailing drizzle a few hours later
            lag = at + length + int(rng.integers(per_day // 8, per_day // 3))
            if lag < n:
                depths[lag] += np.round(rng.uniform(0.01, 1.5), 2)
    depths = np.round(depths, 2)
    times = start + np.arange(n) * np.timedelta64(step, "m")
    return RainSeries(times, depths, step)


def demo_terrain(spec: GridSpec, seed: int = 11) -> dict[str, Raster]:
    """DEM, texture, land cover and stoniness rasters for the demo grid."""
    rng = np.random.default_rng(seed)
    ny, nx = spec.shape
    yy, xx = np.mgrid[0:ny, 0:nx] / max(nx, ny)
    dem = (
        400.0
        + 250.0 * np.sin(2.5 * np.pi * xx) * np.cos(1.7 * np.pi * yy)
        + 180.0 * yy
        + 25.0 * rng.standard_normal((ny, nx)).cumsum(axis=1) / np.sqrt(nx)
    )
    clay = np.clip(10 + 25 * xx + 5 * rng.random((ny, nx)), 2, 60)
    silt = np.clip(20 + 40 * (1 - yy) + 5 * rng.random((ny, nx)), 5, 80)
    sand = 100.0 - clay - silt
    neg = sand < 0
    silt[neg] += sand[neg]
    sand[neg] = 0.0
    codes = np.array([211, 221, 231, 242, 311, 312, 324, 332, 333, 112])
    band = (2.0 * xx + 3.0 * yy + 0.3 * rng.random((ny, nx))) * 2.2
    lc = codes[np.floor(band).astype(int) % codes.size].astype(float)
    stones = np.clip(40 * yy * rng.random((ny, nx)) + 5 * xx, 0, 60)

    dem_r = Raster(spec, np.round(dem, 2))
    # a small nodata hole (e.g. a lake) in the DEM
    mask = np.ones(spec.shape, bool)
    mask[ny // 2 : ny // 2 + 3, nx // 3 : nx // 3 + 3] = False
    return {
        "dem": dem_r.with_mask(mask),
        "sand": Raster(spec, np.round(sand, 2)),
        "silt": Raster(spec, np.round(silt, 2)),
        "clay": Raster(spec, np.round(clay, 2)),
        "landcover": Raster(spec, lc),
        "stoniness": Raster(spec, np.round(stones, 2)),
    }


def write_demo_dataset(directory, size: int = 50, seed: int = 7) -> dict:
    """Write the demo dataset and a matching run configuration.

    Layout: ``precip/`` (one grid per day, 2001-2003), ``dem.asc``,
    ``sand.asc``, ``silt.asc``, ``clay.asc``, ``landcover.asc``,
    ``stoniness.asc``, ``gauges/gauge_{a,b}.csv`` and ``config.json``.
    Returns the configuration written.
    """
    from .config import default_config
    from .io_formats import write_ascii_grid, write_daily_stack, write_gauge_csv, write_json

    d = Path(directory)
    spec = GridSpec(size, size, 1000.0, 4_000_000.0, 2_500_000.0)
    write_daily_stack(demo_stack(spec, seed=seed), d / "precip")
    for name, r in demo_terrain(spec, seed + 4).items():
        write_ascii_grid(r, d / f"{name}.asc")
    rng = np.random.default_rng(seed + 9)
    gauges = []
    for gid, (col, row) in (("gauge_a", (10, 12)), ("gauge_b", (38, 35))):
        s = gauge_series(2001, 3, rng)
        write_gauge_csv(s, d / "gauges" / f"{gid}.csv")
        x = spec.x_ll + (col + 0.5) * spec.cellsize
        y = spec.y_ur - (row + 0.5) * spec.cellsize
        gauges.append({"id": gid, "path": f"gauges/{gid}.csv", "x": x, "y": y})
    cfg = default_config()
    cfg["io"] = {
        "precip_dir": "precip",
        "dem": "dem.asc",
        "sand": "sand.asc",
        "silt": "silt.asc",
        "clay": "clay.asc",
        "landcover": "landcover.asc",
        "stoniness": "stoniness.asc",
        "gauges": gauges,
    }
    write_json(d / "config.json", cfg)
    return cfg
