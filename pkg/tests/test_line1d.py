import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from src import density_core
from src.density_core import Domain, Region1D, weighted_perimeter_1d, weighted_volume
from src.errors import InputError
from src.line1d import (MinimizerDescriptor, MinimizerKind, brute_force_profile, complement_kind, profile_sweep,
                        solve_any, solve_profile, solve_profile_compact,
                        solve_profile_halfline, stationarity_check, sweep_rows)

EXP = density_core.from_expression("x")
LAPLACE = density_core.from_expression("-abs(x)")
GAUSS = density_core.from_expression("-pi*x^2")
EXP_SQUARE = density_core.from_expression("x^2")
FLAT = density_core.from_expression("0")


def _check_minimizers(density, result):
    for m in result.minimizers:
        region = m.region(density.domain)
        assert weighted_volume(density, region) == pytest.approx(result.volume, abs=1e-9)
        assert m.perimeter == pytest.approx(result.infimum_perimeter, abs=1e-9)


def test_exponential_density_half_line():
    result = solve_profile(EXP, 3.0)
    assert result.attained
    assert result.infimum_perimeter == pytest.approx(3.0, rel=1e-10)
    assert len(result.minimizers) == 1
    m = result.minimizers[0]
    assert m.kind == MinimizerKind.HALF_LINE_LEFT
    assert m.b == pytest.approx(math.log(3.0), abs=1e-10)


def test_laplace_ties_half_lines_and_intervals():
    result = solve_profile(LAPLACE, 1.0)
    assert result.attained
    assert result.infimum_perimeter == pytest.approx(1.0, abs=1e-9)
    kinds = set(result.kinds)
    assert {"half-line-left", "half-line-right", "bounded-interval"} <= kinds
    intervals = [m for m in result.minimizers if m.kind == MinimizerKind.BOUNDED_INTERVAL]
    assert any(m.family is not None for m in intervals)
    _check_minimizers(LAPLACE, result)


def test_log_convex_symmetric_interval():
    result = solve_profile(EXP_SQUARE, 2.0)
    assert result.attained
    assert len(result.minimizers) == 1
    m = result.minimizers[0]
    assert m.kind == MinimizerKind.BOUNDED_INTERVAL
    assert m.a == pytest.approx(-m.b, abs=1e-6)
    assert m.perimeter == pytest.approx(2.0 * math.exp(m.b ** 2), rel=1e-8)
    _check_minimizers(EXP_SQUARE, result)


def test_gaussian_half_lines_only():
    result = solve_profile(GAUSS, 0.5)
    assert result.infimum_perimeter == pytest.approx(1.0, abs=1e-9)
    assert sorted(result.kinds) == ["half-line-left", "half-line-right"]
    for m in result.minimizers:
        assert (m.a if math.isinf(m.b) else m.b) == pytest.approx(0.0, abs=1e-9)


def test_complement_duality():
    for v in (0.1, 0.3, 0.45):
        assert solve_profile(GAUSS, v).infimum_perimeter == pytest.approx(
            solve_profile(GAUSS, 1.0 - v).infimum_perimeter, abs=1e-9)


def test_volume_at_total_measure_rejected():
    with pytest.raises(InputError):
        solve_profile(GAUSS, 1.0)
    with pytest.raises(InputError):
        solve_profile(GAUSS, -1.0)


def test_unresolved_shape_refused():
    with pytest.raises(InputError, match="oracle"):
        solve_profile(density_core.from_expression("sin(x)"), 1.0)


def test_bounded_monotone_density_is_not_attained():
    density = density_core.from_expression("x/sqrt(1+x^2)")
    result = solve_profile(density, 1.0)
    assert not result.attained
    assert result.minimizers == ()
    assert result.fleeing_end == "-inf"
    assert result.infimum_perimeter == pytest.approx(2.0 * math.exp(-1.0), rel=1e-9)


def test_halfline_free_boundary():
    half = EXP.with_domain(Domain(0.0, math.inf))
    result = solve_profile_halfline(half, math.e - 1.0, free_boundary=True)
    assert result.infimum_perimeter == pytest.approx(math.e, rel=1e-9)
    m = result.minimizers[0]
    assert m.kind == MinimizerKind.BOUNDARY_ANCHORED_INTERVAL
    assert (m.a, m.b) == (0.0, pytest.approx(1.0, abs=1e-9))


def test_halfline_flat_density_prefers_anchored_interval():
    half = FLAT.with_domain(Domain(0.0, math.inf))
    result = solve_profile_halfline(half, 1.0, free_boundary=True)
    assert result.infimum_perimeter == pytest.approx(1.0)
    assert result.kinds == ("boundary-anchored-interval",)


def test_halfline_needs_halfline_domain():
    with pytest.raises(InputError):
        solve_profile_halfline(EXP, 1.0)


def test_compact_flat_free_boundary_two_minimizers():
    unit = FLAT.with_domain(Domain(0.0, 1.0))
    result = solve_profile_compact(unit, 0.5, free_boundary=True)
    assert result.infimum_perimeter == pytest.approx(1.0)
    ends = sorted((round(m.a, 9), round(m.b, 9)) for m in result.minimizers)
    assert ends == [(0.0, 0.5), (0.5, 1.0)]


def test_compact_exponential_counts_endpoints():
    unit = EXP.with_domain(Domain(0.0, 1.0))
    volume = (math.e - 1.0) / 2.0
    result = solve_profile_compact(unit, volume, free_boundary=False)
    m = result.minimizers[0]
    assert (m.a, m.b) == (0.0, pytest.approx(math.log((math.e + 1.0) / 2.0), abs=1e-9))
    assert result.infimum_perimeter == pytest.approx(1.0 + (math.e + 1.0) / 2.0, rel=1e-9)
    region = Region1D.of((m.a, m.b))
    assert weighted_perimeter_1d(unit, region) == pytest.approx(result.infimum_perimeter, rel=1e-9)


def test_stationarity_examples():
    square = density_core.from_expression("x^2")
    assert stationarity_check(square, (-1.0, 1.0)).stationary
    off = stationarity_check(square, (0.0, 1.0))
    assert not off.stationary and off.residual == pytest.approx(2.0)
    assert stationarity_check(EXP, (-0.3, 2.0)).residual == pytest.approx(2.0)


def test_stationarity_at_kink_reports_one_sided():
    result = stationarity_check(LAPLACE, (0.0, 1.0))
    assert result.one_sided["a"] == (pytest.approx(1.0), pytest.approx(-1.0))
    assert result.residual_range == (pytest.approx(0.0), pytest.approx(2.0))


def test_oracle_agrees_with_solver():
    oracle = brute_force_profile(EXP, 3.0, max_components=2)
    assert oracle.perimeter == pytest.approx(3.0, abs=0.05)
    assert oracle.kind == "half-line-left"
    flat = brute_force_profile(FLAT, 5.0)
    assert flat.perimeter == pytest.approx(2.0, abs=1e-12)
    assert flat.kind == "bounded-interval"
    exact = solve_profile(EXP_SQUARE, 2.0).infimum_perimeter
    assert brute_force_profile(EXP_SQUARE, 2.0).perimeter == pytest.approx(exact, abs=0.1)


def test_oracle_on_random_unimodal_densities():
    rng = np.random.default_rng(19)
    for trial in range(50):
        if trial % 2 == 0:
            a, b = rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)
            density = density_core.from_expression(f"-{a}*x^2 + {b}*x")
            total = math.sqrt(math.pi / a) * math.exp(b * b / (4.0 * a))
            free = False
        else:
            a, b = rng.uniform(0.5, 1.5), rng.uniform(-0.3, 0.3)
            density = density_core.from_expression(f"{a}*x^2 + {b}*x").with_domain(Domain(-1.0, 1.0))
            total = weighted_volume(density, Region1D.of((-1.0, 1.0)))
            free = trial % 4 == 1
        volume = float(rng.uniform(0.2, 0.8)) * total
        exact = solve_any(density, volume, free_boundary=free).infimum_perimeter
        oracle = brute_force_profile(density, volume, points=801, free_boundary=free).perimeter
        assert oracle == pytest.approx(exact, abs=0.1)


def test_complement_labels_follow_the_domain():
    assert complement_kind(Domain()) == MinimizerKind.TWO_HALF_LINES
    assert complement_kind(Domain(0.0, math.inf)) == MinimizerKind.COMPLEMENT_OF_INTERVAL
    tails = MinimizerDescriptor(complement_kind(GAUSS.domain), -0.5, 0.5, 2.0).region(GAUSS.domain)
    assert tails.intervals == ((-math.inf, -0.5), (0.5, math.inf))

    unit = EXP_SQUARE.with_domain(Domain(-1.0, 1.0))
    total = weighted_volume(unit, Region1D.of((-1.0, 1.0)))
    result = solve_profile_compact(unit, 0.95 * total, free_boundary=True)
    assert result.kinds == ("complement-of-interval",)
    m = result.minimizers[0]
    assert m.a == pytest.approx(-m.b, abs=1e-6)
    assert result.infimum_perimeter == pytest.approx(2.0 * math.exp(m.b ** 2), rel=1e-8)
    _check_minimizers(unit, result)


def test_sweep_rows():
    results = profile_sweep(EXP, [1.0, 2.0, 3.0], workers=2)
    rows = sweep_rows(results)
    assert [r["volume"] for r in rows] == [1.0, 2.0, 3.0]
    for r in rows:
        assert r["infimum"] == pytest.approx(r["volume"], rel=1e-10)
        assert r["attained"] and r["kind"] == "half-line-left"
