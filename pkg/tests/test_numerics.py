import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import pytest

from src.errors import ConvergenceError
from src.numerics import adaptive_simpson, bisect, golden_section, tail_integral


def test_simpson_polynomial_and_gaussian():
    assert adaptive_simpson(lambda t: t ** 3, 0.0, 2.0) == pytest.approx(4.0, rel=1e-13)
    value = adaptive_simpson(lambda t: math.exp(-t * t), -1.0, 1.0)
    assert value == pytest.approx(math.sqrt(math.pi) * math.erf(1.0), rel=1e-12)


def test_simpson_empty_interval_and_infinite_samples():
    assert adaptive_simpson(math.exp, 1.0, 1.0) == 0.0
    assert adaptive_simpson(lambda t: math.inf if t > 0.5 else 1.0, 0.0, 1.0) == math.inf


def test_tail_integral_exponential():
    # int_0^inf e^-t dt and int_-inf^0 e^t dt
    assert tail_integral(lambda t: -t, 0.0, +1) == pytest.approx(1.0, rel=1e-10)
    assert tail_integral(lambda t: t, 0.0, -1) == pytest.approx(1.0, rel=1e-10)
    assert tail_integral(lambda t: -t * t, 0.0, +1) == pytest.approx(math.sqrt(math.pi) / 2.0, rel=1e-10)


def test_tail_integral_divergent_is_infinite():
    assert tail_integral(lambda t: 0.1 * t, 0.0, +1) == math.inf


def test_bisect_root_and_missing_bracket():
    assert bisect(lambda t: t * t - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    with pytest.raises(ConvergenceError):
        bisect(lambda t: t * t + 1.0, -1.0, 1.0)


def test_golden_section_minimum():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2 + 1.0, -2.0, 2.0)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx == pytest.approx(1.0, abs=1e-12)
