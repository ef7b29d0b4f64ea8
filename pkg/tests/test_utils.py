import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import json

import numpy as np
import pandas as pd
import pytest

from src.existence import Verdict
from src.utils import (DEFAULT_CONFIG, SCHEMA, RunConfig, dump_csv, dump_json, load_config, max_workers,
                       write_output)


def test_missing_config_falls_back_to_defaults(tmp_path):
    config = load_config(str(tmp_path / "absent.yaml"))
    assert config == DEFAULT_CONFIG
    config["spectral"]["tol"] = 1.0
    assert DEFAULT_CONFIG["spectral"]["tol"] == 1e-8


def test_config_merges_over_defaults(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("spectral:\n  max_iter: 7\nexistence:\n  horizon: 4\n")
    config = load_config(str(path))
    assert config["spectral"]["max_iter"] == 7
    assert config["spectral"]["tol"] == 1e-8
    assert config["existence"]["horizon"] == 4
    assert config["symmetrize"]["h"] == 1.0 / 128.0


def test_environment_references(tmp_path, monkeypatch):
    path = tmp_path / "config.yaml"
    path.write_text("execution:\n  max_workers: ${ISODENSE_TEST_WORKERS}\n")
    monkeypatch.delenv("ISODENSE_THREADS", raising=False)
    monkeypatch.delenv("ISODENSE_TEST_WORKERS", raising=False)
    assert load_config(str(path))["execution"]["max_workers"] == 4
    monkeypatch.setenv("ISODENSE_TEST_WORKERS", "6")
    config = load_config(str(path))
    assert max_workers(config) == 6


def test_thread_override(monkeypatch):
    monkeypatch.setenv("ISODENSE_THREADS", "2")
    assert max_workers(DEFAULT_CONFIG) == 2
    monkeypatch.setenv("ISODENSE_THREADS", "many")
    assert max_workers({"execution": {"max_workers": 3}}) == 3


def test_run_config_round_trip():
    run_config = RunConfig(subcommand="profile", density="exp(x)", knobs={"volume": [3.0]}, seed=4)
    assert RunConfig.from_dict(run_config.to_dict()) == run_config
    with pytest.raises(ValueError, match="Unknown RunConfig keys"):
        RunConfig.from_dict({"subcommand": "profile", "colour": "blue"})


def test_dump_json_is_deterministic():
    payload = {"b": np.float64(1.5), "a": [np.int64(2), (3, 4)], "verdict": Verdict.BOUNDED,
               "flag": np.bool_(True)}
    text = dump_json(payload)
    assert text == dump_json(dict(reversed(list(payload.items()))))
    body = json.loads(text)
    assert body == {"schema": SCHEMA, "a": [2, [3, 4]], "b": 1.5, "verdict": "bounded", "flag": True}


def test_dump_json_non_finite_values():
    body = json.loads(dump_json({"lo": float("-inf"), "hi": float("inf"), "x": float("nan")}))
    assert (body["lo"], body["hi"], body["x"]) == ("-inf", "inf", "nan")


def test_dump_csv_footer():
    text = dump_csv(pd.DataFrame({"m": [0, 1], "log_zeta": [0.5, 1.0]}), footer="verdict: bounded (diagnostic)")
    lines = text.splitlines()
    assert lines[0] == "m,log_zeta"
    assert lines[1] == "0,0.5"
    assert lines[-1] == "# verdict: bounded (diagnostic)"


def test_write_output(tmp_path, capsys):
    target = tmp_path / "out.json"
    write_output("{}", str(target))
    assert target.read_text() == "{}\n"
    write_output("hello")
    assert capsys.readouterr().out == "hello\n"
