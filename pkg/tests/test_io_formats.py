from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from rusle_rds.climatology import DailyPrecipStack
from rusle_rds.erosivity_exact import RainSeries, make_records
from rusle_rds.exceptions import InputIOError, ParseError, RecordError, RenderError, ValidationError
from rusle_rds.io_formats import (
    NODATA_RGB,
    format_ascii_grid,
    parse_ascii_grid,
    read_ascii_grid,
    read_daily_stack,
    read_gauge_csv,
    render_png,
    write_ascii_grid,
    write_daily_stack,
    write_gauge_csv,
)
from rusle_rds.raster import GridSpec, Raster
from rusle_rds.synthetic import daily_dates

GRID = """ncols 3
nrows 2
xllcorner 10.0
yllcorner 20.0
cellsize 5.0
NODATA_value -9999
1 2 3
4 -9999 6.5
"""


def test_parse_basic_grid():
    r = parse_ascii_grid(GRID)
    assert r.spec == GridSpec(3, 2, 5.0, 10.0, 20.0, -9999.0)
    assert r.data[0].tolist() == [1.0, 2.0, 3.0]
    assert not r.valid[1, 1]
    assert r.values[1, 1] == -9999.0


def test_parse_centre_registration_and_default_nodata():
    text = GRID.replace("xllcorner 10.0", "xllcenter 12.5").replace("yllcorner 20.0", "yllcenter 22.5")
    text = text.replace("NODATA_value -9999\n", "")
    r = parse_ascii_grid(text)
    assert (r.spec.x_ll, r.spec.y_ll, r.spec.nodata) == (10.0, 20.0, -9999.0)


@pytest.mark.parametrize(
    "text, line",
    [
        (GRID + "7 8 9\n", 9),
        (GRID.replace("4 -9999 6.5", "4 -9999"), 8),
        (GRID.replace("6.5", "abc"), 8),
        (GRID.replace("cellsize 5.0", "cellsize -5"), None),
        (GRID.replace("ncols 3", "columns 3"), 1),
        (GRID.replace("ncols 3\n", ""), None),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_ascii_grid(text, "grid.asc")
    assert err.value.line == line
    assert "grid.asc" in str(err.value)


def test_read_missing_file(tmp_path):
    with pytest.raises(InputIOError):
        read_ascii_grid(tmp_path / "nope.asc")


def test_write_read_round_trip(tmp_path, rng):
    spec = GridSpec(9, 4, 1000.0 / 3.0, 4e6, 2.5e6)
    r = Raster(spec, rng.normal(size=spec.shape) * 1e5, valid=rng.random(spec.shape) > 0.3)
    write_ascii_grid(r, tmp_path / "sub" / "r.asc")
    assert read_ascii_grid(tmp_path / "sub" / "r.asc").equals(r)
    assert not list((tmp_path / "sub").glob("*.tmp"))


def test_sentinel_collision_is_refused():
    spec = GridSpec(2, 1, 1.0, nodata=0.0)
    r = Raster(spec, [[0.0, 1.0]], valid=[[True, True]])
    with pytest.raises(ValidationError):
        format_ascii_grid(r)


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-1e300, 1e300, allow_nan=False)),
    st.floats(1e-6, 1e6),
)
def test_round_trip_property(vals, cellsize):
    spec = GridSpec(vals.shape[1], vals.shape[0], cellsize)
    mask = vals != spec.nodata
    r = Raster(spec, vals, valid=mask)
    assert parse_ascii_grid(format_ascii_grid(r)).equals(r)


def test_daily_stack_round_trip(tmp_path, rng):
    spec = GridSpec(2, 2, 1.0)
    dates = daily_dates(2001, 1)[:40]
    vals = np.round(rng.gamma(0.5, 4.0, (40, 2, 2)), 1)
    write_daily_stack(DailyPrecipStack(spec, dates, vals), tmp_path)
    back = read_daily_stack(tmp_path)
    assert np.array_equal(back.dates, dates) and np.array_equal(back.values, vals)
    with pytest.raises(InputIOError):
        read_daily_stack(tmp_path / "missing")


def gauge_text(rows):
    return "timestamp,depth_mm\n" + "".join(f"{t},{d}\n" for t, d in rows)


def test_gauge_csv_infers_step(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text(gauge_text([("2001-01-01T00:00:00", 0), ("2001-01-01T00:15:00", 1.5), ("2001-01-01T00:30:00", 0.2)]))
    s = read_gauge_csv(p)
    assert s.step == 15 and s.depths.tolist() == [0.0, 1.5, 0.2]


def test_gauge_csv_gap_is_a_validation_error(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text(gauge_text([("2001-01-01T00:00:00", 0), ("2001-01-01T00:15:00", 1), ("2001-01-01T00:35:00", 1)]))
    with pytest.raises(RecordError) as err:
        read_gauge_csv(p)
    assert err.value.line == 4
    assert isinstance(err.value, ValidationError)


@pytest.mark.parametrize(
    "rows, line",
    [
        ([("2001-01-01T00:00:00", -1)], 2),
        ([("2001-01-01T00:15:00", 0), ("2001-01-01T00:00:00", 0)], 3),
    ],
)
def test_gauge_csv_bad_rows(tmp_path, rows, line):
    p = tmp_path / "g.csv"
    p.write_text(gauge_text(rows))
    with pytest.raises(RecordError) as err:
        read_gauge_csv(p)
    assert err.value.line == line


def test_gauge_csv_header_and_empty_body(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("time,mm\n")
    with pytest.raises(ParseError):
        read_gauge_csv(p)
    p.write_text("timestamp,depth_mm\n")
    assert len(read_gauge_csv(p)) == 0


def test_gauge_csv_round_trip(tmp_path):
    s = RainSeries.from_records(make_records(datetime(2001, 3, 1), [0.0, 0.1, 0.3, 12.25], 10))
    write_gauge_csv(s, tmp_path / "g.csv")
    back = read_gauge_csv(tmp_path / "g.csv")
    assert back.step == 10 and np.array_equal(back.depths, s.depths) and np.array_equal(back.times, s.times)


def test_render_constant_raster_is_single_colour(tmp_path):
    render_png(Raster.full(GridSpec(4, 3, 1.0), 5.0), "rain", tmp_path / "c.png")
    img = np.asarray(Image.open(tmp_path / "c.png"))
    assert img.shape == (3, 4, 3)
    assert len({tuple(px) for px in img.reshape(-1, 3)}) == 1
    assert (tmp_path / "c.png.legend.txt").exists()


def test_render_similarity_colour_convention(tmp_path):
    r = Raster(GridSpec(3, 1, 1.0), [[0.0, 1.0, -9999.0]])
    render_png(r, "blue-red", tmp_path / "s.png", vmin=0.0, vmax=1.0)
    img = np.asarray(Image.open(tmp_path / "s.png"))
    assert tuple(img[0, 0]) == (0, 0, 255)
    assert tuple(img[0, 1]) == (255, 0, 0)
    assert tuple(img[0, 2]) == NODATA_RGB


def test_render_log_scale(tmp_path):
    r = Raster(GridSpec(3, 1, 1.0), [[0.1, 1.0, 10.0]])
    render_png(r, "grey", tmp_path / "e.png", log=True)
    img = np.asarray(Image.open(tmp_path / "e.png"))
    # the middle value sits half way on a log axis
    assert img[0, 1, 0] in (127, 128)
    assert "scale: log10" in (tmp_path / "e.png.legend.txt").read_text()


def test_render_errors(tmp_path):
    spec = GridSpec(2, 1, 1.0)
    with pytest.raises(RenderError):
        render_png(Raster(spec, [[-9999.0, -9999.0]]), "grey", tmp_path / "x.png")
    with pytest.raises(ValidationError):
        render_png(Raster.full(spec, 1.0), "rainbow", tmp_path / "x.png")
    with pytest.raises(RenderError):
        render_png(Raster.full(spec, 1.0), "grey", tmp_path / "x.png", log=True, vmin=-1.0)
