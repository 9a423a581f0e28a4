"""File formats: ESRI ASCII grids, gauge CSV series and PNG maps.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same double, so write/read round trips are bit-exact. All
writers go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .climatology import DailyPrecipStack
from .erosivity_exact import ALLOWED_STEPS, RainSeries
from .exceptions import InputIOError, ParseError, RecordError, RenderError, ValidationError
from .raster import DEFAULT_NODATA, GridSpec, Raster, require_aligned

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
NODATA_RGB = (128, 128, 128)

RAMPS = {
    "blue-red": [(0, 0, 255), (255, 255, 255), (255, 0, 0)],
    "red-blue": [(255, 0, 0), (255, 255, 255), (0, 0, 255)],
    "grey": [(0, 0, 0), (255, 255, 255)],
    "erosion": [(26, 150, 65), (166, 217, 106), (255, 255, 191), (253, 174, 97), (215, 25, 28), (90, 0, 20)],
    "rain": [(255, 255, 204), (161, 218, 180), (65, 182, 196), (34, 94, 168), (12, 44, 132)],
}


# ---------------------------------------------------------------------------
# atomic writes


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# ESRI ASCII grid


def _fmt(x: float) -> str:
    return repr(float(x))


def format_ascii_grid(r: Raster) -> str:
    spec = r.spec
    if np.any(r.data[r.valid] == spec.nodata):
        raise ValidationError("a valid cell equals the nodata sentinel; choose another sentinel")
    vals = r.values
    buf = io.StringIO()
    buf.write(f"ncols {spec.ncols}\n")
    buf.write(f"nrows {spec.nrows}\n")
    buf.write(f"xllcorner {_fmt(spec.x_ll)}\n")
    buf.write(f"yllcorner {_fmt(spec.y_ll)}\n")
    buf.write(f"cellsize {_fmt(spec.cellsize)}\n")
    buf.write(f"NODATA_value {_fmt(spec.nodata)}\n")
    for row in vals.tolist():
        buf.write(" ".join(map(repr, row)))
        buf.write("\n")
    return buf.getvalue()


def write_ascii_grid(r: Raster, path) -> None:
    """Write ``r`` as an ESRI ASCII grid, north row first."""
    atomic_write_text(path, format_ascii_grid(r))


def parse_ascii_grid(text: str, path=None) -> Raster:
    lines = text.splitlines()
    header = {}
    k = 0
    while k < len(lines):
        parts = lines[k].split()
        if not parts:
            k += 1
            continue
        key = parts[0].lower()
        if key[0].isdigit() or key[0] in "+-.":
            break
        if key not in HEADER_KEYS + ("xllcenter", "yllcenter"):
            raise ParseError(f"unknown header key {parts[0]!r}", path, k + 1)
        if len(parts) != 2:
            raise ParseError("header line must be 'key value'", path, k + 1)
        if key in header:
            raise ParseError(f"duplicate header key {parts[0]!r}", path, k + 1)
        header[key] = (parts[1], k + 1)
        k += 1

    def num(key, conv):
        if key not in header:
            raise ParseError(f"missing header key {key!r}", path)
        raw, ln = header[key]
        try:
            return conv(raw)
        except ValueError:
            raise ParseError(f"bad value {raw!r} for {key}", path, ln) from None

    ncols = num("ncols", int)
    nrows = num("nrows", int)
    cellsize = num("cellsize", float)
    if "xllcorner" in header and "yllcorner" in header:
        x_ll, y_ll = num("xllcorner", float), num("yllcorner", float)
    elif "xllcenter" in header and "yllcenter" in header:
        x_ll = num("xllcenter", float) - cellsize / 2
        y_ll = num("yllcenter", float) - cellsize / 2
    else:
        raise ParseError("missing xllcorner/yllcorner", path)
    nodata = num("nodata_value", float) if "nodata_value" in header else DEFAULT_NODATA
    try:
        spec = GridSpec(ncols, nrows, cellsize, x_ll, y_ll, nodata)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from None

    body = [(i + 1, ln) for i, ln in enumerate(lines[k:], start=k) if ln.strip()]
    if len(body) != nrows:
        line = body[nrows][0] if len(body) > nrows else (body[-1][0] if body else k + 1)
        raise ParseError(f"expected {nrows} data rows, found {len(body)}", path, line)
    values = np.empty((nrows, ncols))
    for r, (lineno, ln) in enumerate(body):
        toks = ln.split()
        if len(toks) != ncols:
            raise ParseError(f"expected {ncols} values, found {len(toks)}", path, lineno)
        try:
            values[r] = [float(t) for t in toks]
        except ValueError:
            bad = next(t for t in toks if not _is_float(t))
            raise ParseError(f"non-numeric token {bad!r}", path, lineno) from None
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite value in grid body", path)
    return Raster(spec, values)


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_ascii_grid(path) -> Raster:
    """Read an ESRI ASCII grid; the NODATA_value cells become nodata."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc}") from exc
    return parse_ascii_grid(text, path)


# ---------------------------------------------------------------------------
# daily precipitation stack: one grid per day, date in the file name

_DATE_RE = re.compile(r"(\d{4}-\d{2}-\d{2})")


def write_daily_stack(stack: DailyPrecipStack, directory, prefix: str = "precip_") -> None:
    directory = Path(directory)
    for d, day in zip(stack.dates, stack.values):
        write_ascii_grid(Raster.from_nan(stack.spec, day), directory / f"{prefix}{d}.asc")


def read_daily_stack(directory) -> DailyPrecipStack:
    """Read every ``*YYYY-MM-DD*.asc`` grid of a directory, ordered by date."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputIOError(f"daily stack directory not found: {directory}")
    entries = []
    for p in directory.glob("*.asc"):
        m = _DATE_RE.search(p.name)
        if m:
            entries.append((np.datetime64(m.group(1), "D"), p))
    if not entries:
        raise InputIOError(f"no dated .asc grids in {directory}")
    entries.sort()
    rasters = [read_ascii_grid(p) for _, p in entries]
    return DailyPrecipStack.from_rasters([d for d, _ in entries], rasters)


# ---------------------------------------------------------------------------
# gauge CSV


def read_gauge_csv(path, step: int | None = None) -> RainSeries:
    """Read a ``timestamp,depth_mm`` gauge file.

    The step is inferred from the first two rows (or taken from ``step``)
    and must be 10 or 15 minutes for every row.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["timestamp", "depth_mm"]:
        raise ParseError("header must be 'timestamp,depth_mm'", path, 1)
    times, depths = [], []
    prev = None
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError("expected 2 columns", path, lineno)
        try:
            t = datetime.fromisoformat(row[0].strip())
            d = float(row[1])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if not np.isfinite(d) or d < 0:
            raise RecordError(f"depth must be finite and >= 0, got {row[1].strip()}", path, lineno)
        if prev is not None:
            dt = (t - prev).total_seconds() / 60.0
            if dt <= 0:
                raise RecordError("timestamps not strictly increasing", path, lineno)
            if step is None:
                if dt not in ALLOWED_STEPS:
                    raise RecordError(f"step of {dt:g} min not in {ALLOWED_STEPS}", path, lineno)
                step = int(dt)
            elif dt != step:
                raise RecordError(f"irregular step: {dt:g} min instead of {step}", path, lineno)
        times.append(np.datetime64(t, "s"))
        depths.append(d)
        prev = t
    if step is None:
        step = 15
    return RainSeries(np.array(times, dtype="datetime64[s]"), np.array(depths, dtype=np.float64), step)


def write_gauge_csv(series: RainSeries, path) -> None:
    buf = io.StringIO()
    buf.write("timestamp,depth_mm\n")
    for t, d in zip(series.times.astype("datetime64[s]"), series.depths.tolist()):
        buf.write(f"{t},{d!r}\n")
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# PNG rendering


def ramp_colors(name: str, t: np.ndarray) -> np.ndarray:
    """Map positions in [0, 1] to uint8 RGB along a named ramp."""
    if name not in RAMPS:
        raise ValidationError(f"unknown ramp {name!r}; available: {sorted(RAMPS)}")
    anchors = np.asarray(RAMPS[name], dtype=np.float64)
    xs = np.linspace(0.0, 1.0, len(anchors))
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    rgb = np.stack([np.interp(t, xs, anchors[:, c]) for c in range(3)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def render_png(
    r: Raster,
    ramp: str,
    out_path,
    vmin: float | None = None,
    vmax: float | None = None,
    log: bool = False,
    title: str | None = None,
) -> None:
    """Render a raster as an 8-bit RGB PNG with a text legend next to it.

    Values map linearly (or by log10 with ``log``) from ``vmin`` to ``vmax``
    onto the ramp; nodata cells are neutral grey. The legend is written to
    ``<out_path>.legend.txt``.
    """
    if not r.valid.any():
        raise RenderError("raster has no valid cell to render")
    vals = r.data[r.valid]
    if log:
        pos = vals[vals > 0]
        lo = vmin if vmin is not None else (pos.min() if pos.size else 1.0)
        hi = vmax if vmax is not None else (pos.max() if pos.size else lo)
        if lo <= 0 or hi <= 0:
            raise RenderError("log scale needs positive vmin and vmax")
        fwd = lambda v: np.log10(np.maximum(v, lo))  # noqa: E731
    else:
        lo = vmin if vmin is not None else float(vals.min())
        hi = vmax if vmax is not None else float(vals.max())
        fwd = lambda v: v  # noqa: E731
    a, b = fwd(np.float64(lo)), fwd(np.float64(hi))
    span = b - a
    data = np.where(r.valid, r.data, lo)
    t = (fwd(data) - a) / span if span > 0 else np.zeros(r.shape)
    img = ramp_colors(ramp, t)
    img[~r.valid] = NODATA_RGB

    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(out_path, buf.getvalue())

    stops = np.linspace(0.0, 1.0, 11)
    lines = []
    if title:
        lines.append(f"title: {title}")
    lines += [
        f"ramp: {ramp}",
        f"scale: {'log10' if log else 'linear'}",
        f"vmin: {float(lo)!r}",
        f"vmax: {float(hi)!r}",
        f"nodata_rgb: {NODATA_RGB[0]},{NODATA_RGB[1]},{NODATA_RGB[2]}",
        "stops (position value r,g,b):",
    ]
    for s, c in zip(stops, ramp_colors(ramp, stops)):
        v = (10 ** (a + s * span)) if log else (a + s * span)
        lines.append(f"  {s:.1f} {float(v):.6g} {c[0]},{c[1]},{c[2]}")
    atomic_write_text(str(out_path) + ".legend.txt", "\n".join(lines) + "\n")


def read_rasters(paths: Sequence) -> list[Raster]:
    rs = [read_ascii_grid(p) for p in paths]
    if rs:
        require_aligned(*rs)
    return rs
