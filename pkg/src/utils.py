import copy
import dataclasses
import enum
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
import yaml
from dotenv import load_dotenv

# Load environment variables (ISODENSE_THREADS may live in .env)
load_dotenv()

logger = logging.getLogger(__name__)

SCHEMA = "isodense/1"

DEFAULT_CONFIG: Dict[str, Any] = {
    "quadrature": {"abs_tol": 1e-12, "rel_tol": 1e-13},
    "profile": {"tie_tol": 1e-9, "scan_samples": 512, "golden_tol": 1e-12,
                "classify_window": [-50.0, 50.0], "classify_samples": 2001},
    "oracle": {"window": [-8.0, 8.0], "points": 1601, "max_components": 2},
    "variational": {"modes": 8, "sphere_polar": 64, "sphere_azimuth": 128, "fd_step": 1e-3},
    "symmetrize": {"h": 1.0 / 128.0, "margin_cells": 4, "max_steps": 64},
    "existence": {"m_max": 100, "horizon": 10, "annulus_samples": 257},
    "spectral": {"tol": 1e-8, "max_iter": 500, "sign_convention": "drift-minus"},
    "execution": {"max_workers": 4},
}

_ENV_REF = re.compile(r"\$\{(\w+)\}")


def _expand(value):
    if isinstance(value, str):
        return _ENV_REF.sub(lambda m: os.environ.get(m.group(1), ""), value)
    if isinstance(value, dict):
        return {k: _expand(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_expand(v) for v in value]
    return value


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        elif value not in ("", None):
            merged[key] = value
    return merged


def load_config(path: str = "config.yaml") -> Dict[str, Any]:
    """
    Load config.yaml merged over the built-in defaults.

    A missing file or key falls back to DEFAULT_CONFIG; ${VAR} references are expanded
    from the environment and dropped when the variable is unset.
    """
    if not os.path.exists(path):
        logger.info(f"No config file at {path}, using defaults")
        return copy.deepcopy(DEFAULT_CONFIG)
    with open(path, "r") as f:
        loaded = yaml.safe_load(f) or {}
    return _merge(DEFAULT_CONFIG, _expand(loaded))


def max_workers(config: Optional[Dict[str, Any]] = None) -> int:
    """Worker cap: ISODENSE_THREADS wins over execution.max_workers."""
    env = os.environ.get("ISODENSE_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer ISODENSE_THREADS={env!r}")
    configured = (config or DEFAULT_CONFIG).get("execution", {}).get("max_workers", 4)
    try:
        return max(1, int(configured))
    except (TypeError, ValueError):
        return 4


@dataclass
class RunConfig:
    """One CLI invocation: subcommand, density source, domain, numeric knobs and output."""
    subcommand: str
    density: Optional[str] = None
    density_kind: str = "f"  # f | psi | delta | csv | builtin
    parameters: Dict[str, float] = field(default_factory=dict)
    domain: str = "R"
    knobs: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    fmt: str = "json"
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"Unknown RunConfig keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(data))


def to_jsonable(obj: Any) -> Any:
    """Dataclasses, enums, numpy scalars and tuples to plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dump_json(payload: Dict[str, Any]) -> str:
    """Deterministic JSON with the schema tag; non-finite floats are written as strings."""
    body = {"schema": SCHEMA}
    body.update(to_jsonable(payload))
    return json.dumps(_finite(body), sort_keys=True, indent=2)


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def dump_csv(frame: pd.DataFrame, footer: Optional[str] = None) -> str:
    text = frame.to_csv(index=False, float_format="%.17g")
    if footer:
        text += f"# {footer}\n"
    return text


def write_output(text: str, path: Optional[str] = None) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text if text.endswith("\n") else text + "\n")
        logger.info(f"Wrote {path}")
    else:
        print(text)
