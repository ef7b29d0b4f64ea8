import logging
import math
import os
from typing import Callable, Dict, Optional

import pandas as pd

from src import density_core
from src.data_quality import generate_quality_report
from src.density_core import DensityModel, Domain, ShapeClass, parse_domain
from src.errors import InputError

logger = logging.getLogger(__name__)

LOG6 = math.log(6.0)


def _gauss() -> DensityModel:
    return density_core.from_expression("-pi*x^2", name="gauss")


def _exp_square() -> DensityModel:
    return density_core.from_expression("x^2", name="exp-square")


def _laplace() -> DensityModel:
    return density_core.from_expression("-abs(x)", name="laplace")


def _houseroof_flat() -> DensityModel:
    return density_core.piecewise([(LOG6, "-abs(x)"), (math.inf, "-log(6)")], name="houseroof-flat",
                                  declared_class=ShapeClass.INCREASING_DECREASING,
                                  declared_change_point=0.0)


def _houseroof_decay() -> DensityModel:
    return density_core.piecewise([(LOG6, "-abs(x)"), (math.inf, "log(1/9 + 1/(x - log(6) + 18))")],
                                  name="houseroof-decay",
                                  declared_class=ShapeClass.INCREASING_DECREASING,
                                  declared_change_point=0.0)


BUILTINS: Dict[str, Callable[[], DensityModel]] = {
    "gauss": _gauss,
    "exp-square": _exp_square,
    "laplace": _laplace,
    "houseroof-flat": _houseroof_flat,
    "houseroof-decay": _houseroof_decay,
}


class DensityEngine:
    """Turns CLI/config density specifications into DensityModel instances."""

    def builtin(self, name: str, domain: Optional[Domain] = None) -> DensityModel:
        if name not in BUILTINS:
            raise InputError(f"Unknown density '{name}'. Built-ins: {', '.join(sorted(BUILTINS))}")
        model = BUILTINS[name]()
        return model.with_domain(domain) if domain else model

    def expression(self, text: str, parameters: Optional[Dict[str, float]] = None,
                   log_density: bool = False, domain: Optional[Domain] = None) -> DensityModel:
        return density_core.from_expression(text, parameters, log_density=log_density, domain=domain)

    def radial(self, text: str, dimension: int, parameters: Optional[Dict[str, float]] = None,
               log_density: bool = True) -> DensityModel:
        return density_core.radial(text, dimension, parameters, log_density=log_density)

    def load_csv(self, file_path: str, domain: Optional[Domain] = None,
                 radial_dimension: Optional[int] = None) -> DensityModel:
        """
        Loads a tabulated density (t, psi) from CSV.
        Header row is optional; t must be strictly increasing.
        """
        file_ext = os.path.splitext(file_path)[1].lower()
        if file_ext != ".csv":
            raise InputError("Unsupported file format")
        if not os.path.exists(file_path):
            raise InputError(f"Density file not found: {file_path}")

        try:
            raw = pd.read_csv(file_path, header=None, comment="#", skipinitialspace=True)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputError(f"Malformed CSV {file_path}: {e}") from e

        report, samples = generate_quality_report(raw)
        if not report["usable"]:
            raise InputError(f"Malformed CSV {file_path}: {report['issues_found']}")
        logger.info(f"Loaded {report['total_rows']} samples from {file_path}")
        return density_core.from_samples(samples["t"].to_numpy(), samples["psi"].to_numpy(),
                                         name=os.path.basename(file_path), domain=domain,
                                         radial_dimension=radial_dimension)

    def load(self, source: str, kind: str = "f", parameters: Optional[Dict[str, float]] = None,
             domain: str = "R", dimension: Optional[int] = None) -> DensityModel:
        """
        Dispatch on kind: 'builtin', 'csv', 'f' (density expression), 'psi' (log-density
        expression) or 'delta' (radial profile; requires dimension).
        """
        dom = parse_domain(domain) if domain not in (None, "R") else None
        if kind == "builtin":
            return self.builtin(source, dom)
        if kind == "csv":
            return self.load_csv(source, dom, radial_dimension=dimension if dimension else None)
        if kind in ("f", "psi"):
            if dimension and dimension > 1:
                return self.radial(source, dimension, parameters, log_density=(kind == "psi"))
            return self.expression(source, parameters, log_density=(kind == "psi"), domain=dom)
        if kind == "delta":
            if not dimension:
                raise InputError("A radial profile needs the ambient dimension")
            return self.radial(source, dimension, parameters, log_density=True)
        raise InputError(f"Unknown density kind '{kind}'")
