"""
Generalized mean curvature, first variation, index-form modes and stability verdicts for
spheres and hyperplanes under radial densities psi(x) = delta(|x|) on R^{n+1}.

Curvatures are taken with respect to the inner normal: H_psi = nH - <grad psi, N>.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from src import density_core
from src.density_core import Convexity, DensityModel, classify_convexity
from src.errors import ExprDomainError, InputError
from src.numerics import TAIL_EPS, adaptive_simpson, tail_integral

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadialDensity:
    """Radial density on R^{n+1}; the evaluators of `model` are delta, delta', delta''."""
    model: DensityModel

    def __post_init__(self):
        if not self.model.radial:
            raise InputError(f"{self.model.name} is not a radial density")

    @classmethod
    def from_expression(cls, text: str, n: int, parameters: Optional[Dict[str, float]] = None,
                        log_density: bool = True) -> "RadialDensity":
        return cls(density_core.radial(text, n + 1, parameters, log_density=log_density))

    @property
    def n(self) -> int:
        return self.model.dimension - 1

    def delta(self, r: float) -> float:
        return self.model.psi(r)

    def ddelta(self, r: float) -> float:
        return self.model.dpsi(r)

    def d2delta(self, r: float) -> float:
        return self.model.d2psi(r)

    def f(self, r: float) -> float:
        return self.model.f(r)


def sphere_area(n: int) -> float:
    """|S^n|, the area of the unit n-sphere."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def mean_curvature_sphere(density: RadialDensity, r: float) -> float:
    if not r > 0.0:
        raise InputError(f"Sphere radius must be positive, got {r!r}")
    return density.n / r + density.ddelta(r)


def mean_curvature_hyperplane(density: RadialDensity, c: float, p: Sequence[float],
                              normal: Optional[Sequence[float]] = None) -> float:
    """-c delta'(r)/r at p on {<x, normal> = c}, normal defaulting to e_1."""
    point = np.asarray(p, dtype=float)
    unit = np.zeros_like(point) if normal is None else np.asarray(normal, dtype=float)
    if normal is None:
        unit[0] = 1.0
    if point.size != density.n + 1 or unit.size != point.size:
        raise InputError(f"Point and normal must live in R^{density.n + 1}")
    unit = unit / np.linalg.norm(unit)
    if abs(float(point @ unit) - c) > 1e-9 * (1.0 + abs(c)):
        raise InputError(f"Point {point.tolist()} is not on the hyperplane <x,u> = {c}")
    if c == 0.0:
        return 0.0
    r = float(np.linalg.norm(point))
    if r == 0.0:
        if density.ddelta(0.0) != 0.0:
            raise ExprDomainError("delta'(r)/r has no finite limit at r = 0")
        return -c * density.d2delta(0.0)
    return -c * density.ddelta(r) / r


@dataclass(frozen=True)
class RigidityReport:
    constant: bool
    ratio: float
    spread: float
    a: float
    b: float

    def to_dict(self) -> dict:
        return {"constant": self.constant, "ratio": self.ratio, "spread": self.spread,
                "a": self.a, "b": self.b}


def hyperplane_cmc_rigidity(density: RadialDensity, r_window: Tuple[float, float] = (0.5, 5.0),
                            tol: float = 1e-9, samples: int = 257) -> RigidityReport:
    """
    Off-origin hyperplanes have constant H_psi only where delta'(r)/r is constant, i.e.
    psi = a|x|^2 + b on the window. Reports the mean ratio, a = ratio/2 and b.
    """
    r0, r1 = r_window
    if not 0.0 < r0 < r1:
        raise InputError(f"Rigidity window must satisfy 0 < r0 < r1, got {r_window}")
    rs = np.linspace(r0, r1, samples)
    ratios = np.array([density.ddelta(float(r)) / float(r) for r in rs])
    spread = float(ratios.max() - ratios.min())
    ratio = float(ratios.mean())
    a = ratio / 2.0
    return RigidityReport(spread <= tol * max(1.0, abs(ratio)), ratio, spread, a,
                          density.delta(r0) - a * r0 * r0)


@dataclass(frozen=True)
class StabilityReport:
    radius: float
    delta_second: float
    stable: bool
    mode_values: Tuple[Tuple[int, float], ...]

    def to_dict(self) -> dict:
        return {"radius": self.radius, "delta_second": self.delta_second, "stable": self.stable,
                "mode_values": [{"l": l, "value": v} for l, v in self.mode_values]}


def ball_stability(density: RadialDensity, r: float, modes: int = 8) -> StabilityReport:
    """
    Centered ball of radius r is stable iff delta''(r) >= 0. Mode values are the index form
    per unit L2 norm on degree-l spherical harmonics: f(r) [(l(l+n-1) - n)/r^2 + delta''(r)].
    """
    if not r > 0.0:
        raise InputError(f"Ball radius must be positive, got {r!r}")
    n = density.n
    d2 = density.d2delta(r)
    fr = density.f(r)
    values = tuple((l, fr * ((l * (l + n - 1) - n) / (r * r) + d2)) for l in range(1, modes + 1))
    return StabilityReport(r, d2, d2 >= 0.0, values)


# ---------------------------------------------------------------------------
# First variation
# ---------------------------------------------------------------------------

class Surface(str, Enum):
    SPHERE = "sphere"
    HYPERPLANE = "hyperplane"


class Flow(str, Enum):
    CONSTANT = "constant"
    HARMONIC = "harmonic"


@dataclass(frozen=True)
class FirstVariationResult:
    dP_fd: float
    dP_analytic: float
    dV_fd: float
    dV_analytic: float
    h: float

    @property
    def residual_P(self) -> float:
        return abs(self.dP_fd - self.dP_analytic)

    @property
    def residual_V(self) -> float:
        return abs(self.dV_fd - self.dV_analytic)

    def to_dict(self) -> dict:
        return {"dP_fd": self.dP_fd, "dP_analytic": self.dP_analytic, "dV_fd": self.dV_fd,
                "dV_analytic": self.dV_analytic, "residual_P": self.residual_P,
                "residual_V": self.residual_V, "h": self.h}


class _SphereQuadrature:
    """
    Nodes on S^n (n = 1: uniform angle; n = 2: Gauss-Legendre in cos(theta) with the azimuth
    integrated exactly) and a Gauss-Legendre rule for the radial direction. Flows depend on
    the polar angle only.
    """

    def __init__(self, n: int, polar: int = 64, azimuth: int = 128, radial: int = 64):
        if n == 1:
            self.theta = 2.0 * math.pi * np.arange(azimuth) / azimuth
            self.weights = np.full(azimuth, 2.0 * math.pi / azimuth)
        elif n == 2:
            x, w = np.polynomial.legendre.leggauss(polar)
            self.theta = np.arccos(x)
            self.weights = 2.0 * math.pi * w
        else:
            raise InputError(f"First-variation quadrature supports n = 1, 2; got n = {n}")
        self.n = n
        self.radial_nodes, self.radial_weights = np.polynomial.legendre.leggauss(radial)


def _flow_shape(flow: Flow, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """u(theta) and du/dtheta."""
    if flow == Flow.CONSTANT:
        return np.ones_like(theta), np.zeros_like(theta)
    return np.cos(theta), -np.sin(theta)


def _sphere_functionals(density: RadialDensity, quad: _SphereQuadrature, r: float,
                        flow: Flow, t: float) -> Tuple[float, float]:
    """(P, V) of the radial graph rho = r - t u(theta)."""
    n = quad.n
    u, du = _flow_shape(flow, quad.theta)
    rho = r - t * u
    rho_theta = -t * du
    if np.any(rho <= 0.0):
        raise InputError("Deformation step collapses the sphere")
    f_rho = np.array([density.f(float(p)) for p in rho])
    area = f_rho * rho ** (n - 1) * np.sqrt(rho * rho + rho_theta * rho_theta)
    perimeter = float(np.sum(quad.weights * area))

    # radial integral of f(s) s^n over [0, rho] per angle node
    s_nodes = 0.5 * (quad.radial_nodes + 1.0)
    volume_density = np.empty_like(rho)
    for i, p in enumerate(rho):
        s = p * s_nodes
        vals = np.array([density.f(float(x)) for x in s]) * s ** n
        volume_density[i] = 0.5 * p * float(np.sum(quad.radial_weights * vals))
    volume = float(np.sum(quad.weights * volume_density))
    return perimeter, volume


def _half_line_integral(g: Callable[[float], float]) -> float:
    """Signed integral of g over [0, inf) via s = 1/u - 1."""
    def integrand(u: float) -> float:
        u = max(u, TAIL_EPS)
        value = g(1.0 / u - 1.0)
        return value / (u * u) if value != 0.0 else 0.0

    return adaptive_simpson(integrand, 0.0, 1.0)


def _hyperplane_perimeter(density: RadialDensity, c: float) -> float:
    """Weighted area of {x_1 = c}: |S^{n-1}| int_0^inf f(sqrt(c^2 + s^2)) s^{n-1} ds."""
    n = density.n

    def log_integrand(s: float) -> float:
        if s <= 0.0:
            return density.delta(abs(c)) if n == 1 else -math.inf
        return density.delta(math.hypot(c, s)) + (n - 1) * math.log(s)

    return sphere_area(n - 1) * tail_integral(log_integrand, 0.0, +1)


def _hyperplane_curvature_integral(density: RadialDensity, c: float) -> float:
    """int over {x_1 = c} of H_psi f da with H_psi = -c delta'(rho)/rho."""
    n = density.n

    def integrand(s: float) -> float:
        rho = math.hypot(c, s)
        if rho == 0.0:
            return 0.0
        return -c * density.ddelta(rho) / rho * density.f(rho) * s ** (n - 1)

    return sphere_area(n - 1) * _half_line_integral(integrand)


def first_variation_check(density: RadialDensity, surface: Surface = Surface.SPHERE, size: float = 1.0,
                          flow: Flow = Flow.CONSTANT, h: float = 1e-3,
                          polar: int = 64, azimuth: int = 128) -> FirstVariationResult:
    """
    Central differences of P and V along the normal flow with speed u against
    V'(0) = -int f u da and P'(0) = -int H_psi f u da.

    size is the sphere radius or the hyperplane offset c (hyperplane {x_1 = c}, Omega = {x_1 > c},
    inner normal e_1, u constant). For hyperplanes V(c - h) - V(c + h) is the slab volume
    between the two planes.
    """
    surface, flow = Surface(surface), Flow(flow)
    if not h > 0.0:
        raise InputError("Finite-difference step must be positive")
    n = density.n
    if surface == Surface.SPHERE:
        r = size
        quad = _SphereQuadrature(n, polar, azimuth)
        p_plus, v_plus = _sphere_functionals(density, quad, r, flow, h)
        p_minus, v_minus = _sphere_functionals(density, quad, r, flow, -h)
        u, _ = _flow_shape(flow, quad.theta)
        u_integral = float(np.sum(quad.weights * u))
        fr = density.f(r)
        dV = -fr * r ** n * u_integral
        dP = -mean_curvature_sphere(density, r) * fr * r ** n * u_integral
        dP_fd = (p_plus - p_minus) / (2.0 * h)
        dV_fd = (v_plus - v_minus) / (2.0 * h)
    else:
        if flow != Flow.CONSTANT:
            raise InputError("Hyperplane flows are translations (constant u)")
        c = size
        perimeter = _hyperplane_perimeter(density, c)
        if not math.isfinite(perimeter):
            raise InputError("Hyperplane first variation needs a finite weighted area on the plane")
        slab = adaptive_simpson(lambda x: _hyperplane_perimeter(density, x), c - h, c + h)
        dV = -perimeter
        dP = -_hyperplane_curvature_integral(density, c)
        dP_fd = (_hyperplane_perimeter(density, c + h) - _hyperplane_perimeter(density, c - h)) / (2.0 * h)
        dV_fd = -slab / (2.0 * h)
    result = FirstVariationResult(dP_fd, dP, dV_fd, dV, h)
    logger.info(f"First variation ({surface.value}, {flow.value}, h={h}): "
                f"residual P {result.residual_P:.3e}, residual V {result.residual_V:.3e}")
    return result



# ---------------------------------------------------------------------------
# Connectedness and the counterexample
# ---------------------------------------------------------------------------

class Connectedness(str, Enum):
    CONNECTED = "connected"
    VIOLATES_STABILITY = "violates-stability"
    TOTALLY_GEODESIC_ALLOWED = "allowed-if-totally-geodesic"
    NO_CONCLUSION = "no-conclusion"


def radial_convexity(density: RadialDensity, window: Tuple[float, float] = (0.0, 20.0),
                     samples: int = 401, zero_tol: float = 1e-12) -> Optional[Convexity]:
    """Hessian of delta(|x|) has eigenvalues delta'' (radial) and delta'/r (tangential)."""
    rs = np.linspace(window[0], window[1], samples)
    eigen = []
    for r in rs:
        r = float(r)
        eigen.append(density.d2delta(r))
        if r > 0.0:
            eigen.append(density.ddelta(r) / r)
    if all(v < -zero_tol for v in eigen):
        return Convexity.STRICTLY_LOG_CONCAVE
    if all(v <= zero_tol for v in eigen):
        return Convexity.LOG_CONCAVE
    if all(v > zero_tol for v in eigen):
        return Convexity.STRICTLY_LOG_CONVEX
    if all(v >= -zero_tol for v in eigen):
        return Convexity.LOG_CONVEX
    return None


def connectedness_criterion(density: Optional[DensityModel], boundary_components: int,
                            strictly_log_concave: Optional[bool] = None,
                            convexity: Optional[Convexity] = None) -> Connectedness:
    """
    Stable regions of log-concave densities have connected or totally geodesic boundary;
    connected when the density is strictly log-concave.
    """
    if boundary_components < 1:
        raise InputError("A region boundary has at least one component")
    if convexity is None and density is not None:
        if density.radial:
            convexity = radial_convexity(RadialDensity(density))
        else:
            convexity = classify_convexity(density)
    if strictly_log_concave is True:
        convexity = Convexity.STRICTLY_LOG_CONCAVE
    if boundary_components == 1:
        return Connectedness.CONNECTED
    if convexity == Convexity.STRICTLY_LOG_CONCAVE:
        return Connectedness.VIOLATES_STABILITY
    if convexity == Convexity.LOG_CONCAVE:
        return Connectedness.TOTALLY_GEODESIC_ALLOWED
    return Connectedness.NO_CONCLUSION


@dataclass(frozen=True)
class CounterexampleReport:
    strictly_log_concave: bool
    finite_volume: bool
    total_volume: float
    balls_unstable: bool
    offcenter_hyperplanes_cmc: bool
    neither_balls_nor_halfspaces: bool

    def to_dict(self) -> dict:
        return {"strictly_log_concave": self.strictly_log_concave, "finite_volume": self.finite_volume,
                "total_volume": self.total_volume, "balls_unstable": self.balls_unstable,
                "offcenter_hyperplanes_cmc": self.offcenter_hyperplanes_cmc,
                "neither_balls_nor_halfspaces": self.neither_balls_nor_halfspaces}


def counterexample_analysis(density: RadialDensity, window: Tuple[float, float] = (0.0, 20.0),
                            samples: int = 401) -> CounterexampleReport:
    """
    For volumes other than half the total, minimizers can be neither centered balls nor
    half-spaces when: the density is strictly log-concave with finite volume (minimizers
    exist), every centered ball is unstable and only hyperplanes through the origin have
    constant H_psi.
    """
    n = density.n
    convexity = radial_convexity(density, window, samples)
    strict = convexity == Convexity.STRICTLY_LOG_CONCAVE

    def log_shell(r: float) -> float:
        if r <= 0.0:
            return -math.inf
        return density.delta(r) + n * math.log(r)

    total = sphere_area(n) * tail_integral(log_shell, 0.0, +1)
    finite = math.isfinite(total)
    rs = np.linspace(max(window[0], 1e-3), window[1], samples)
    unstable = all(not ball_stability(density, float(r), modes=1).stable for r in rs)
    rigidity = hyperplane_cmc_rigidity(density, (max(window[0], 1e-3), window[1]), samples=samples)
    offcenter = rigidity.constant and rigidity.ratio != 0.0
    verdict = strict and finite and unstable and not offcenter
    return CounterexampleReport(strict, finite, total, unstable, offcenter, verdict)
