import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from src import density_core
from src.density_core import (BoundaryPolicy, Convexity, Domain, Region1D, ShapeClass, build_measure_table,
                              classify_convexity, classify_shape, parse_domain, weighted_perimeter_1d,
                              weighted_volume)
from src.errors import InputError

EXP = density_core.from_expression("x")
LAPLACE = density_core.from_expression("-abs(x)")
GAUSS = density_core.from_expression("-pi*x^2")
EXP_SQUARE = density_core.from_expression("x^2")
FLAT = density_core.from_expression("0")


def test_region_merges_touching_intervals():
    region = Region1D.of((2.0, 3.0), (0.0, 1.0), (1.0, 1.5), (5.0, 5.0))
    assert region.intervals == ((0.0, 1.5), (2.0, 3.0))
    assert region.complement(Domain(0.0, 4.0)).intervals == ((1.5, 2.0), (3.0, 4.0))


def test_parse_domain():
    assert parse_domain("R").kind == "line"
    assert parse_domain("[0,inf)") == Domain(0.0, math.inf)
    assert parse_domain("[-1, 1]") == Domain(-1.0, 1.0)
    with pytest.raises(InputError):
        parse_domain("[1,0]")


def test_weighted_volume_examples():
    assert weighted_volume(EXP, Region1D.of((-math.inf, 0.0))) == pytest.approx(1.0, rel=1e-10)
    assert weighted_volume(FLAT, Region1D.of((0.0, 2.0))) == pytest.approx(2.0, rel=1e-12)
    assert weighted_volume(LAPLACE, Region1D.of((-math.inf, math.inf))) == pytest.approx(2.0, rel=1e-10)


def test_weighted_volume_infinite_end():
    assert weighted_volume(EXP, Region1D.of((0.0, math.inf))) == math.inf


def test_weighted_perimeter_examples():
    assert weighted_perimeter_1d(EXP, Region1D.of((-math.inf, math.log(3.0)))) == pytest.approx(3.0, rel=1e-12)
    assert weighted_perimeter_1d(LAPLACE, Region1D.of((-math.log(2.0), math.log(2.0)))) == pytest.approx(1.0)
    half = EXP.with_domain(Domain(0.0, math.inf))
    region = Region1D.of((0.0, 1.0))
    assert weighted_perimeter_1d(half, region, BoundaryPolicy.FREE) == pytest.approx(math.e)
    assert weighted_perimeter_1d(half, region, BoundaryPolicy.COUNT_ALL) == pytest.approx(1.0 + math.e)


def test_measure_table_end_finiteness():
    gauss = build_measure_table(GAUSS)
    assert gauss.total_measure == pytest.approx(1.0, rel=1e-10)
    assert gauss.left_finite and gauss.right_finite
    square = build_measure_table(EXP_SQUARE)
    assert not square.left_finite and not square.right_finite
    flat = build_measure_table(FLAT)
    assert not flat.left_finite and not flat.right_finite


def test_measure_table_inverse():
    table = build_measure_table(LAPLACE)
    rng = np.random.default_rng(3)
    for v in rng.uniform(-0.999, 0.999, size=50):
        x = table.inverse(float(v))
        assert table.cumulative_at(x) == pytest.approx(float(v), abs=1e-10)


def test_volume_additive_and_complement():
    rng = np.random.default_rng(5)
    total = build_measure_table(GAUSS).total_measure
    for _ in range(20):
        a, m, b = np.sort(rng.uniform(-2.0, 2.0, size=3))
        whole = weighted_volume(GAUSS, Region1D.of((a, b)))
        split = weighted_volume(GAUSS, Region1D.of((a, m))) + weighted_volume(GAUSS, Region1D.of((m, b)))
        assert whole == pytest.approx(split, abs=1e-11)
        region = Region1D.of((a, b))
        rest = weighted_volume(GAUSS, region.complement(GAUSS.domain))
        assert whole + rest == pytest.approx(total, abs=1e-9)


def test_classify_shape_examples():
    laplace = classify_shape(LAPLACE)
    assert laplace.shape == ShapeClass.INCREASING_DECREASING
    assert laplace.change_point == pytest.approx(0.0, abs=1e-12)
    square = classify_shape(EXP_SQUARE)
    assert square.shape == ShapeClass.DECREASING_INCREASING
    assert square.change_point == pytest.approx(0.0, abs=1e-9)
    assert classify_shape(EXP).shape == ShapeClass.MONOTONE_INCREASING
    assert classify_shape(FLAT).shape == ShapeClass.CONSTANT


def test_declared_class_short_circuits():
    model = density_core.from_expression("sin(x)", declared_class=ShapeClass.MONOTONE_INCREASING)
    report = classify_shape(model)
    assert report.declared and report.shape == ShapeClass.MONOTONE_INCREASING


def test_wiggly_density_is_unresolved():
    assert classify_shape(density_core.from_expression("sin(x)")).shape == ShapeClass.UNRESOLVED


def test_convexity_classes():
    assert classify_convexity(GAUSS) == Convexity.STRICTLY_LOG_CONCAVE
    assert classify_convexity(EXP_SQUARE) == Convexity.STRICTLY_LOG_CONVEX
    assert classify_convexity(LAPLACE) == Convexity.LOG_CONCAVE


def test_f_expression_converts_to_log_density():
    model = density_core.from_expression("exp(x^2)", log_density=False)
    assert model.psi(30.0) == pytest.approx(900.0)
    assert model.dpsi(1.0) == pytest.approx(2.0)


def test_tabulated_density_interpolates_psi():
    t = np.linspace(-3.0, 3.0, 61)
    model = density_core.from_samples(t, -t * t)
    assert model.psi(0.05) == pytest.approx(-0.0025, abs=1e-3)
    assert model.f(1.0) == pytest.approx(math.exp(-1.0), rel=1e-6)
    with pytest.raises(InputError):
        density_core.from_samples([0.0, 0.0, 1.0], [0.0, 1.0, 2.0])


def test_piecewise_breakpoints_are_kinks():
    model = density_core.piecewise([(0.0, "x"), (math.inf, "-x")])
    assert model.kinks == (0.0,)
    assert model.dpsi_side(0.0, -1) == pytest.approx(1.0)
    assert model.dpsi_side(0.0, +1) == pytest.approx(-1.0)
