import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import pandas as pd
import pytest

from src.data_engine import BUILTINS, DensityEngine
from src.data_quality import detect_sample_issues, generate_quality_report, is_valid_header_row, parse_mask
from src.density_core import ShapeClass, classify_shape
from src.errors import InputError


@pytest.fixture
def engine():
    return DensityEngine()


def test_builtins_are_registered(engine):
    assert set(BUILTINS) == {"gauss", "exp-square", "laplace", "houseroof-flat", "houseroof-decay"}
    gauss = engine.builtin("gauss")
    assert gauss.f(0.0) == 1.0
    assert gauss.f(1.0) == pytest.approx(math.exp(-math.pi))


def test_houseroof_flat_shape(engine):
    model = engine.builtin("houseroof-flat")
    assert model.f(math.log(6.0) + 5.0) == pytest.approx(1.0 / 6.0)
    assert model.f(-1.0) == pytest.approx(math.exp(-1.0))
    assert classify_shape(model).shape == ShapeClass.INCREASING_DECREASING


def test_unknown_builtin(engine):
    with pytest.raises(InputError, match="Unknown density"):
        engine.builtin("cauchy")


def test_load_dispatch(engine):
    assert engine.load("exp(x)", "f").psi(2.0) == pytest.approx(2.0)
    assert engine.load("x", "psi", domain="[0,inf)").domain.lo == 0.0
    radial = engine.load("-sqrt(r^2+1)", "delta", dimension=2)
    assert radial.radial and radial.dimension == 2
    with pytest.raises(InputError):
        engine.load("r^2", "delta")
    with pytest.raises(InputError):
        engine.load("x", "wavelet")


def test_load_csv_with_header(engine, tmp_path):
    path = tmp_path / "density.csv"
    path.write_text("t,psi\n0,0\n1,-1\n2,-4\n3,-9\n")
    model = engine.load(str(path), "csv")
    assert model.domain.lo == 0.0 and model.domain.hi == 3.0
    assert model.psi(1.0) == pytest.approx(-1.0)


def test_load_csv_rejects_bad_tables(engine, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,0\n1,1\n1,2\n")
    with pytest.raises(InputError, match="Malformed CSV"):
        engine.load_csv(str(path))
    with pytest.raises(InputError):
        engine.load_csv(str(tmp_path / "missing.csv"))
    with pytest.raises(InputError):
        engine.load_csv(str(tmp_path / "density.xlsx"))


def test_quality_report():
    assert is_valid_header_row(["t", "psi"])
    assert not is_valid_header_row(["0", "psi"])
    raw = pd.DataFrame([["t", "psi"], ["0", "1"], ["1", "x"], ["0.5", "2"]])
    report, _ = generate_quality_report(raw)
    assert report["header"]
    assert not report["usable"]
    assert report["issues_found"]["missing_values"] == {"psi": 1}
    assert detect_sample_issues(pd.DataFrame([[0.0, 1.0, 2.0]])) == {"column_count": 3}


def test_parse_mask():
    payload = {"h": 0.5, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": ["100", "011"]}
    h, window, cells = parse_mask(payload)
    assert h == 0.5
    assert window == ((0.0, 1.5), (0.0, 1.0))
    assert cells.tolist() == [[True, False, False], [False, True, True]]


@pytest.mark.parametrize("payload", [
    {"h": 0.5, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": ["100"]},
    {"h": 0.5, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": ["10", "01"]},
    {"h": 0.5, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": ["102", "011"]},
    {"h": -1.0, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": []},
    {"window": [[0.0, 1.5], [0.0, 1.0]], "rows": []},
])
def test_parse_mask_rejects(payload):
    with pytest.raises(ValueError):
        parse_mask(payload)
