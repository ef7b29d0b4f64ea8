import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json
import math

import pytest

from app import _attach_expressions, main
from src.symmetrize import LOG_COLUMNS


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_profile_exponential_density(capsys):
    code, out = run_cli(capsys, "profile", "--density", "exp(x)", "--volume", "3")
    assert code == 0
    body = json.loads(out)
    assert body["infimum_perimeter"] == pytest.approx(3.0, rel=1e-10)
    assert body["attained"] is True
    (minimizer,) = body["minimizers"]
    assert minimizer["kind"] == "half-line-left"
    assert minimizer["a"] == "-inf"
    assert minimizer["b"] == pytest.approx(math.log(3.0), abs=1e-10)


def test_profile_sweep_as_csv(capsys):
    code, out = run_cli(capsys, "--format", "csv", "profile", "--psi", "x", "--volume", "1", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "volume,infimum,attained,kind"
    assert len(lines) == 3


def test_stability_of_hyperbolic_profile(capsys):
    code, out = run_cli(capsys, "stability", "--delta", "-sqrt(r^2+1)", "--r", "1", "--n", "1")
    assert code == 0
    body = json.loads(out)
    assert body["stable"] is False
    assert body["delta_second"] == pytest.approx(-(2.0 ** -1.5))


def test_existence_table_and_verdict(capsys):
    code, out = run_cli(capsys, "existence", "--density", "exp(r^2)", "--n", "1", "--m-max", "20")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "m,log_zeta"
    assert len(lines) == 23
    assert lines[-1] == "# verdict: diverges (diagnostic)"


def test_meancurv_sphere(capsys):
    code, out = run_cli(capsys, "meancurv", "--delta", "r^2", "--n", "2", "--r", "1")
    assert code == 0
    assert json.loads(out)["H"] == pytest.approx(4.0)


def test_eigen_on_interval(capsys):
    code, out = run_cli(capsys, "eigen", "--interval", "0", str(math.pi), "--h", str(math.pi / 256), "--c", "0")
    assert code == 0
    body = json.loads(out)
    assert body["lambda1"] == pytest.approx(1.0, abs=1e-4)
    assert body["converged"] is True


def test_eigen_reports_non_convergence(capsys, tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("spectral:\n  tol: 1.0e-30\n  max_iter: 1\n")
    code, out = run_cli(capsys, "--config", str(config), "eigen", "--interval", "0", "1", "--h", "0.05", "--c", "0")
    assert code == 2
    assert json.loads(out)["converged"] is False


def test_symmetrize_random_writes_log(capsys, tmp_path):
    final = tmp_path / "final.json"
    code, out = run_cli(capsys, "--seed", "3", "symmetrize", "--random", "--h", "0.03125", "--max-steps", "3",
                        "--final", str(final))
    assert code == 0
    assert out.splitlines()[0] == ",".join(LOG_COLUMNS)
    saved = json.loads(final.read_text())
    assert saved["schema"] == "isodense/1"
    assert saved["h"] == 0.03125


def test_output_flag_writes_file(capsys, tmp_path):
    target = tmp_path / "result.json"
    code, out = run_cli(capsys, "--output", str(target), "classify", "--psi", "-abs(x)")
    assert code == 0
    assert out == ""
    body = json.loads(target.read_text())
    assert body["shape"] == "increasing-decreasing"
    assert body["convexity"] == "log-concave"


def test_bad_expression_is_input_error(capsys):
    code, out = run_cli(capsys, "profile", "--density", "exp(", "--volume", "1")
    assert code == 1
    body = json.loads(out)
    assert body["success"] is False
    assert body["exit_code"] == 1
    assert body["error_type"] == "ExprSyntaxError"


def test_conflicting_density_flags(capsys):
    code, out = run_cli(capsys, "profile", "--density", "x", "--psi", "x", "--volume", "1")
    assert code == 1
    assert json.loads(out)["success"] is False


def test_missing_density(capsys):
    code, out = run_cli(capsys, "profile", "--volume", "1")
    assert code == 1
    assert "No density given" in json.loads(out)["error"]


def test_help_lists_expression_grammar(capsys):
    code, out = run_cli(capsys, "help")
    assert code == 0
    assert "sqrt" in out


def test_attach_expressions():
    assert _attach_expressions(["--delta", "-r^2", "--n", "1"]) == ["--delta=-r^2", "--n", "1"]
    assert _attach_expressions(["--density", "x", "--r", "-1"]) == ["--density", "x", "--r", "-1"]
