"""
Existence diagnostics for radial densities: the zeta(m) sequence and its growth-bound
counterpart, the planar annulus isoperimetric inequality and the planar existence verdict.

Every verdict here is diagnostic: a finite sample never proves an asymptotic statement.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src import density_core
from src.density_core import DensityModel
from src.errors import InputError
from src.symmetrize import ColumnarSet, weighted_perimeter_columnar, weighted_volume_columnar

logger = logging.getLogger(__name__)

# psi equals r^2 at integer radii and dips to r^2/20 halfway between them
BUMPY_PROFILE = "r^2*(1 - 0.95*sin(pi*r)^2)"
DIVERGENCE_THRESHOLD = 50.0


class ZetaMode(str, Enum):
    RADIAL = "radial-formula"
    ANNULUS = "annulus-min-max"


class Verdict(str, Enum):
    DIVERGES = "diverges"
    BOUNDED = "bounded"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ZetaSequence:
    """log zeta(m) for m = 0..m_max (zeta itself is exp of these)."""
    log_values: Tuple[float, ...]
    mode: ZetaMode
    n: int

    @property
    def values(self) -> Tuple[Tuple[int, float], ...]:
        return tuple((m, math.exp(v) if v < 709.0 else math.inf) for m, v in enumerate(self.log_values))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"m": np.arange(len(self.log_values)), "log_zeta": list(self.log_values)})


def _psi(density: DensityModel):
    if density.domain.lo > 0.0:
        raise InputError("zeta needs a density defined on [0, inf)")
    return density.psi


def is_nondecreasing(density: DensityModel, r_max: float, samples: int = 2001, tol: float = 1e-12) -> bool:
    values = np.array([density.psi(float(r)) for r in np.linspace(0.0, r_max, samples)])
    return bool(np.all(np.diff(values) >= -tol * np.maximum(1.0, np.abs(values[1:]))))


def zeta_sequence(density: DensityModel, n: int, m_max: int = 100, mode: ZetaMode = ZetaMode.RADIAL,
                  samples: int = 257) -> ZetaSequence:
    """
    log zeta(m) = psi(m) - n/(n+1) psi(m+2) (radial formula), or
    min psi - n/(n+1) max psi over m <= r <= m+2 (annulus mode, `samples` points per annulus).
    """
    mode = ZetaMode(mode)
    if n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    if m_max < 0:
        raise InputError(f"m_max must be nonnegative, got {m_max}")
    psi = _psi(density)
    ratio = n / (n + 1.0)
    if not is_nondecreasing(density, m_max + 2.0):
        logger.warning(f"{density.name} is not nondecreasing in r; the radial zeta formula may mislead")

    values = []
    for m in range(m_max + 1):
        if mode == ZetaMode.RADIAL:
            values.append(psi(float(m)) - ratio * psi(m + 2.0))
        else:
            ring = np.array([psi(float(r)) for r in np.linspace(m, m + 2.0, samples)])
            values.append(float(ring.min() - ratio * ring.max()))
    if not all(math.isfinite(v) for v in values):
        raise InputError(f"log zeta is not finite for {density.name}")
    return ZetaSequence(tuple(values), mode, n)


def divergence_verdict(seq: ZetaSequence, horizon: int = 10,
                       threshold: float = DIVERGENCE_THRESHOLD) -> Verdict:
    """
    diverges: log zeta(m_max) > threshold and positive second differences over the last
    `horizon` samples. bounded: non-increasing tail. inconclusive otherwise.
    """
    if horizon < 3 or horizon > len(seq.log_values):
        raise InputError(f"horizon must lie in [3, {len(seq.log_values)}], got {horizon}")
    tail = np.asarray(seq.log_values[-horizon:])
    steps = np.diff(tail)
    scale = 1e-12 * max(1.0, float(np.max(np.abs(tail))))
    if tail[-1] > threshold and np.all(np.diff(steps) > 0.0):
        return Verdict.DIVERGES
    if np.all(steps <= scale):
        return Verdict.BOUNDED
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class GrowthBoundResult:
    holds: bool
    first_violation: Optional[float]

    def to_dict(self) -> dict:
        return {"holds": self.holds, "first_violation": self.first_violation}


def growth_bound_check(density: DensityModel, n: int, C: float, eps: float,
                       r_window: Tuple[float, float], samples: int = 1001) -> GrowthBoundResult:
    """psi(r) <= C ((n+1)/n - eps)^(r/2) at every sample of the window."""
    r0, r1 = r_window
    if not (C > 0.0 and 0.0 < eps < 1.0 and 0.0 <= r0 < r1):
        raise InputError("Growth bound needs C > 0, 0 < eps < 1 and 0 <= r0 < r1")
    base = (n + 1.0) / n - eps
    for r in np.linspace(r0, r1, samples):
        r = float(r)
        value = density.psi(r)
        # compare in log space where both sides are positive
        bound_log = math.log(C) + 0.5 * r * math.log(base)
        if value > 0.0 and math.log(value) > bound_log:
            return GrowthBoundResult(False, r)
    return GrowthBoundResult(True, None)


@dataclass(frozen=True)
class AnnulusCheck:
    perimeter: float
    volume: float
    in_scope: bool
    holds: Optional[bool]
    slack: Optional[float]

    def to_dict(self) -> dict:
        return {"P": self.perimeter, "vol": self.volume, "in_scope": self.in_scope,
                "holds": self.holds, "slack": self.slack}


def _min_radius(cset: ColumnarSet) -> float:
    closest = math.inf
    for key, region in cset.columns.items():
        p = float(cset.base_point(key)[0])
        for a, b in region.intervals:
            t = 0.0 if a <= 0.0 <= b else min(abs(a), abs(b))
            closest = min(closest, math.hypot(p, t))
    return closest


def planar_annulus_inequality_check(cset: ColumnarSet, r0: float) -> AnnulusCheck:
    """
    P^2 >= 2 f(r0) vol for sets in {|x| >= r0} under exp(c|x|^2), c >= 0. Sets with
    P >= 2 pi r0 f(r0) fall outside the inequality's hypothesis and are reported out of scope.
    """
    if cset.dimension != 2:
        raise InputError("The annulus inequality is planar")
    if cset.c < 0.0:
        raise InputError("The annulus inequality needs a nondecreasing density (c >= 0)")
    if cset.is_empty():
        raise InputError("Empty set")
    if _min_radius(cset) < r0:
        raise InputError(f"Set is not contained in |x| >= {r0}")
    perimeter = weighted_perimeter_columnar(cset)
    volume = weighted_volume_columnar(cset)
    f_r0 = math.exp(cset.c * r0 * r0)
    if perimeter >= 2.0 * math.pi * r0 * f_r0:
        logger.info(f"P = {perimeter:.6g} >= 2 pi r0 f(r0); annulus inequality not applicable")
        return AnnulusCheck(perimeter, volume, False, None, None)
    slack = perimeter * perimeter - 2.0 * f_r0 * volume
    return AnnulusCheck(perimeter, volume, True, slack >= 0.0, slack)


@dataclass(frozen=True)
class PlanarExistence:
    radial: bool
    nondecreasing: bool
    unbounded: bool
    minimizers_exist: bool

    def to_dict(self) -> dict:
        return {"radial": self.radial, "nondecreasing": self.nondecreasing, "unbounded": self.unbounded,
                "minimizers_exist": self.minimizers_exist}


def planar_existence_verdict(density: DensityModel, r_max: float = 100.0,
                             samples: int = 2001) -> PlanarExistence:
    """
    Planar, radial, nondecreasing densities with f -> inf have minimizers of every volume.
    Recorded as metadata from sampled psi; f -> inf is read as psi(r_max) being large and still
    increasing.
    """
    radial = density.radial and density.dimension == 2
    nondecreasing = radial and is_nondecreasing(density, r_max, samples)
    unbounded = False
    if nondecreasing:
        top = density.psi(r_max)
        unbounded = top > DIVERGENCE_THRESHOLD or (top > density.psi(0.5 * r_max) + 1.0 and density.dpsi(r_max) > 0.0)
    return PlanarExistence(radial, nondecreasing, unbounded, radial and nondecreasing and unbounded)


def bumpy_density(n: int = 1) -> DensityModel:
    """exp(r^2) with deep dips between the integers: monotone only along integer radii."""
    return density_core.radial(BUMPY_PROFILE, n + 1, name="bumpy")
