import numpy as np
import pytest

from rusle_rds.config import default_config
from rusle_rds.erosivity_empirical import EmpiricalEquation, EquationSet, Term, default_equations, evaluate, guard
from rusle_rds.exceptions import ConfigError
from rusle_rds.raster import GridSpec, Raster

SPEC = GridSpec(3, 2, 1.0)


def eq(terms, ranges, **kw):
    return EmpiricalEquation("e", "somewhere", tuple(terms), input_ranges=ranges, **kw)


def test_linear_equation_on_uniform_input():
    e = eq([Term("x", 2.0)], {"x": (0.0, 1000.0)})
    out = evaluate(e, {"x": Raster.full(SPEC, 100.0)})
    assert np.all(out.data == 200.0)


def test_intercept_only_equation_is_constant():
    e = eq([], {}, intercept=321.5)
    out = evaluate(e, {"x": Raster.full(SPEC, 1.0)})
    assert np.all(out.data == 321.5) and out.valid.all()


def test_power_form_at_zero():
    e = eq([Term("x", 3.0, 1.7)], {"x": (0.0, 10.0)})
    assert np.all(evaluate(e, {"x": Raster.full(SPEC, 0.0)}).data == 0.0)


def test_outer_power_and_nodata_propagation():
    e = eq([Term("x", 1.0)], {"x": (0.0, 1e4)}, intercept=-100.0, outer_coef=2.0, outer_exponent=0.5)
    x = Raster(SPEC, [[100.0, 200.0, 500.0], [-9999.0, 50.0, 1100.0]])
    out = evaluate(e, {"x": x})
    assert out.data[0, 0] == 0.0
    assert out.data[1, 2] == 2.0 * 1000.0**0.5
    assert not out.valid[1, 0]
    assert not out.valid[1, 1]  # negative base under a fractional power


def test_guard_pass_through_is_bit_exact():
    e = eq([Term("x", 1.0)], {"x": (0.0, 1e4)})
    x = Raster(SPEC, np.linspace(1, 50, 6).reshape(SPEC.shape))
    r = evaluate(e, {"x": x})
    g, m = guard(e, r, {"x": x})
    assert g.equals(r) and np.all(m.data == 1.0)


def test_guard_output_bound():
    e = eq([Term("x", 1.0)], {"x": (0.0, 1e5)}, output_bounds=(0.0, 5000.0))
    x = Raster(SPEC, [[100.0, 12000.0, 5000.0], [1.0, 2.0, 3.0]])
    g, m = guard(e, evaluate(e, {"x": x}), {"x": x})
    assert not g.valid[0, 1] and m.data[0, 1] == 0.0
    assert g.valid[0, 2]


@pytest.mark.parametrize("factor, inside", [(1.40, False), (1.25, True), (1.20, True), (1.26, False)])
def test_guard_margin_on_input_range(factor, inside):
    e = eq([Term("x", 1.0)], {"x": (10.0, 100.0)})
    x = Raster.full(SPEC, 100.0 * factor)
    g, _ = guard(e, evaluate(e, {"x": x}), {"x": x}, margin=0.25)
    assert bool(g.valid.all()) is inside


def test_guard_margin_lower_bound():
    e = eq([Term("x", 1.0)], {"x": (100.0, 200.0)})
    ok = e.guard_values(np.array([1.0, 1.0]), {"x": np.array([76.0, 74.0])}, 0.25)
    assert ok.tolist() == [True, False]


def test_equation_validation():
    with pytest.raises(ConfigError):
        eq([Term("x", 1.0)], {})
    with pytest.raises(ConfigError):
        eq([], {}, output_bounds=(10.0, 5.0))
    with pytest.raises(ConfigError):
        EquationSet([eq([], {}), eq([], {})])
    with pytest.raises(ConfigError):
        evaluate(eq([Term("y", 1.0)], {"y": (0, 1)}), {"x": Raster.full(SPEC, 1.0)})


def test_default_equations_are_consistent():
    eqs = default_equations()
    ids = [i["id"] for i in default_config()["indicators"]]
    assert len(eqs) == 7
    assert len(eqs.regions) == 4
    eqs.check_indicators(ids)
    for e in eqs:
        # the home-region climate must be inside each equation's own domain
        cols = {k: np.array([e.fingerprint[k]]) for k in e.inputs}
        r = e.evaluate_values(cols)
        assert e.guard_values(r, cols, 0.0).all(), e.id
        assert 100.0 < r[0] < 3000.0
    with pytest.raises(ConfigError):
        eqs.check_indicators(["annual_precip"])
