"""
Densities f = e^psi on the line, a half-line, a compact interval or (radially) on R^{n+1},
together with 1D regions, the cumulative measure table and shape classification.
"""
import bisect as _bisect
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from src import expr
from src.errors import ConvergenceError, ExprDomainError, InputError
from src.numerics import adaptive_simpson, bisect, tail_integral

logger = logging.getLogger(__name__)

INF = math.inf
KINK_EPS = 1e-10
PSI_CEILING = 700.0
PSI_FLOOR = -745.0


class ShapeClass(str, Enum):
    MONOTONE_INCREASING = "monotone-increasing"
    MONOTONE_DECREASING = "monotone-decreasing"
    INCREASING_DECREASING = "increasing-decreasing"
    DECREASING_INCREASING = "decreasing-increasing"
    CONSTANT = "constant"
    UNRESOLVED = "unresolved"


class Convexity(str, Enum):
    LOG_CONCAVE = "log-concave"
    STRICTLY_LOG_CONCAVE = "strictly-log-concave"
    LOG_CONVEX = "log-convex"
    STRICTLY_LOG_CONVEX = "strictly-log-convex"


class BoundaryPolicy(str, Enum):
    COUNT_ALL = "count-all"
    FREE = "free"


@dataclass(frozen=True)
class Domain:
    lo: float = -INF
    hi: float = INF

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError(f"Empty domain [{self.lo}, {self.hi}]")

    @property
    def kind(self) -> str:
        if math.isinf(self.lo) and math.isinf(self.hi):
            return "line"
        if math.isinf(self.lo) or math.isinf(self.hi):
            return "halfline"
        return "compact"

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def endpoints(self) -> Tuple[float, ...]:
        return tuple(e for e in (self.lo, self.hi) if math.isfinite(e))

    def describe(self) -> str:
        lo = "-inf" if math.isinf(self.lo) else repr(self.lo)
        hi = "inf" if math.isinf(self.hi) else repr(self.hi)
        return f"[{lo},{hi}]"


def parse_domain(text: str) -> Domain:
    """Accepts 'R', '[0,inf)', '[a,b]' (brackets optional, 'inf'/'-inf' allowed)."""
    cleaned = text.strip()
    if cleaned.upper() in ("R", "LINE", ""):
        return Domain()
    body = cleaned.strip("[]()")
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != 2:
        raise InputError(f"Cannot parse domain '{text}'")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError as e:
        raise InputError(f"Cannot parse domain '{text}': {e}") from e
    return Domain(lo, hi)


@dataclass(frozen=True)
class DensityModel:
    """
    A density f = e^psi. Evaluators take the line coordinate x (or the radius r when radial).

    For radial models psi(x) = delta(|x|) on R^dimension and the evaluators are delta, delta', delta''.
    """
    name: str
    psi: Callable[[float], float]
    dpsi: Callable[[float], float]
    d2psi: Callable[[float], float]
    dimension: int = 1
    radial: bool = False
    domain: Domain = field(default_factory=Domain)
    kinks: Tuple[float, ...] = ()
    declared_class: Optional[ShapeClass] = None
    declared_change_point: Optional[float] = None
    declared_convexity: Optional[Convexity] = None
    declared_ends: Tuple[Optional[bool], Optional[bool]] = (None, None)
    source: str = ""

    def f(self, x: float) -> float:
        p = self.psi(x)
        return math.exp(p) if p < 709.0 else INF

    def is_kink(self, x: float) -> bool:
        return any(abs(x - k) <= 1e-12 * (1.0 + abs(k)) for k in self.kinks)

    def dpsi_side(self, x: float, side: int) -> float:
        """One-sided psi' (side=+1 right, -1 left); equals psi' away from kinks."""
        if not self.is_kink(x):
            return self.dpsi(x)
        return self.dpsi(x + side * KINK_EPS * (1.0 + abs(x)))

    def with_domain(self, domain: Domain) -> "DensityModel":
        kinks = tuple(k for k in self.kinks if domain.lo < k < domain.hi)
        return DensityModel(self.name, self.psi, self.dpsi, self.d2psi, self.dimension, self.radial,
                            domain, kinks, self.declared_class, self.declared_change_point,
                            self.declared_convexity, self.declared_ends, self.source)


def _find_kinks(arguments: Sequence[Callable[[float], float]], domain: Domain,
                span: float = 64.0, samples: int = 4097) -> Tuple[float, ...]:
    if not arguments:
        return ()
    lo = max(domain.lo, -span)
    hi = min(domain.hi, span)
    grid = np.linspace(lo, hi, samples)
    found = set()
    for g in arguments:
        values = []
        for t in grid:
            try:
                values.append(g(float(t)))
            except ExprDomainError:
                values.append(math.nan)
        for i, v in enumerate(values):
            if v == 0.0:
                found.add(float(grid[i]))
            if i == 0 or not (math.isfinite(v) and math.isfinite(values[i - 1])):
                continue
            if values[i - 1] != 0.0 and v != 0.0 and (v > 0) != (values[i - 1] > 0):
                found.add(bisect(g, float(grid[i - 1]), float(grid[i]), tol=1e-15))
    kinks = tuple(sorted(k for k in found if domain.lo < k < domain.hi))
    if kinks:
        logger.info(f"Detected kinks at {kinks}")
    return kinks


def from_expression(text: str, parameters: Optional[Dict[str, float]] = None, *,
                    log_density: bool = True, domain: Optional[Domain] = None,
                    name: Optional[str] = None, kinks: Iterable[float] = (),
                    **declared) -> DensityModel:
    """
    Build a 1D density from an expression in x.

    Args:
        text: psi(x) when log_density is True, otherwise f(x) (converted with expr.log_of)
        parameters: late-bound parameter values
        domain: defaults to the whole line
        kinks: extra declared kink points, merged with those detected from abs nodes
        declared: declared_class / declared_change_point / declared_convexity / declared_ends
    """
    params = dict(parameters or {})
    ast = expr.parse(text, params.keys())
    if not log_density:
        ast = expr.log_of(ast)
    var = next(iter(expr.variables(ast)), "x")
    d1 = expr.differentiate(ast, var)
    d2 = expr.differentiate(d1, var)
    domain = domain or Domain()
    kink_args = [expr.compile_expr(a, params) for a in expr.kink_arguments(ast)]
    all_kinks = tuple(sorted(set(_find_kinks(kink_args, domain)) | set(kinks)))
    return DensityModel(
        name=name or text,
        psi=expr.compile_expr(ast, params),
        dpsi=expr.compile_expr(d1, params),
        d2psi=expr.compile_expr(d2, params),
        domain=domain,
        kinks=all_kinks,
        source=expr.render(ast),
        **declared,
    )


def radial(text: str, dimension: int, parameters: Optional[Dict[str, float]] = None, *,
           log_density: bool = True, name: Optional[str] = None, **declared) -> DensityModel:
    """Radial density psi(x) = delta(|x|) on R^dimension, delta given as an expression in r."""
    if dimension < 1:
        raise InputError(f"Dimension must be >= 1, got {dimension}")
    model = from_expression(text, parameters, log_density=log_density, domain=Domain(0.0, INF),
                            name=name, **declared)
    return DensityModel(model.name, model.psi, model.dpsi, model.d2psi, dimension, True,
                        model.domain, model.kinks, model.declared_class, model.declared_change_point,
                        model.declared_convexity, model.declared_ends, model.source)


def from_samples(t: Sequence[float], psi_values: Sequence[float], *, name: str = "tabulated",
                 domain: Optional[Domain] = None, radial_dimension: Optional[int] = None) -> DensityModel:
    """Tabulated density: monotone cubic (PCHIP) interpolation of psi, never of f."""
    t_arr = np.asarray(t, dtype=float)
    p_arr = np.asarray(psi_values, dtype=float)
    if t_arr.ndim != 1 or t_arr.size < 2 or t_arr.size != p_arr.size:
        raise InputError("Tabulated density needs two equal-length columns with at least 2 rows")
    if not np.all(np.isfinite(t_arr)) or not np.all(np.isfinite(p_arr)):
        raise InputError("Tabulated density contains non-finite values")
    if np.any(np.diff(t_arr) <= 0):
        raise InputError("Tabulated t values must be strictly increasing")
    interp = PchipInterpolator(t_arr, p_arr, extrapolate=False)
    first, second = interp.derivative(1), interp.derivative(2)
    domain = domain or Domain(float(t_arr[0]), float(t_arr[-1]))
    if domain.lo < t_arr[0] or domain.hi > t_arr[-1]:
        raise InputError(f"Domain {domain.describe()} exceeds the tabulated range")

    def wrap(fn):
        def call(x: float) -> float:
            if not t_arr[0] <= x <= t_arr[-1]:
                raise ExprDomainError(f"{x!r} outside tabulated range [{t_arr[0]}, {t_arr[-1]}]")
            return float(fn(x))
        return call

    return DensityModel(name=name, psi=wrap(interp), dpsi=wrap(first), d2psi=wrap(second),
                        dimension=radial_dimension or 1, radial=radial_dimension is not None,
                        domain=domain, kinks=tuple(float(v) for v in t_arr[1:-1]),
                        source=f"pchip({t_arr.size} samples)")


def piecewise(pieces: Sequence[Tuple[float, str]], parameters: Optional[Dict[str, float]] = None, *,
              name: str = "piecewise", domain: Optional[Domain] = None, **declared) -> DensityModel:
    """
    Piecewise psi: pieces[i] = (upper_i, text_i) applies for x <= upper_i; the last upper must be inf.
    Breakpoints become kinks; derivatives at a breakpoint use the right piece.
    """
    if not pieces or not math.isinf(pieces[-1][0]):
        raise InputError("The last piece of a piecewise density must extend to +inf")
    uppers = [float(u) for u, _ in pieces]
    if any(b <= a for a, b in zip(uppers, uppers[1:])):
        raise InputError("Piecewise breakpoints must be strictly increasing")
    params = dict(parameters or {})
    asts = [expr.parse(text, params.keys()) for _, text in pieces]
    psis = [expr.compile_expr(a, params) for a in asts]
    d1s = [expr.differentiate(a, "x") for a in asts]
    dpsis = [expr.compile_expr(d, params) for d in d1s]
    d2psis = [expr.compile_expr(expr.differentiate(d, "x"), params) for d in d1s]
    breaks = uppers[:-1]

    def value_piece(fns):
        return lambda x: fns[_bisect.bisect_left(breaks, x)](x)

    def derivative_piece(fns):
        return lambda x: fns[_bisect.bisect_right(breaks, x)](x)

    domain = domain or Domain()
    inner = []
    for a in asts:
        inner.extend(expr.compile_expr(k, params) for k in expr.kink_arguments(a))
    kinks = set(_find_kinks(inner, domain)) | {b for b in breaks if domain.lo < b < domain.hi}
    source = "; ".join(f"x<={u!r}: {expr.render(a)}" for u, a in zip(uppers, asts))
    return DensityModel(name=name, psi=value_piece(psis), dpsi=derivative_piece(dpsis),
                        d2psi=derivative_piece(d2psis), domain=domain, kinks=tuple(sorted(kinks)),
                        source=source, **declared)


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region1D:
    intervals: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def of(cls, *pairs: Tuple[float, float]) -> "Region1D":
        """Sort, drop empty pieces and merge overlapping or touching intervals."""
        items = sorted((float(a), float(b)) for a, b in pairs if a < b)
        merged: List[List[float]] = []
        for a, b in items:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged))

    def is_empty(self) -> bool:
        return not self.intervals

    def boundary_points(self) -> Tuple[float, ...]:
        return tuple(p for a, b in self.intervals for p in (a, b) if math.isfinite(p))

    def complement(self, domain: Domain) -> "Region1D":
        pieces = []
        cursor = domain.lo
        for a, b in self.intervals:
            if a > cursor:
                pieces.append((cursor, min(a, domain.hi)))
            cursor = max(cursor, b)
        if cursor < domain.hi:
            pieces.append((cursor, domain.hi))
        return Region1D.of(*pieces)


# ---------------------------------------------------------------------------
# Measure table
# ---------------------------------------------------------------------------

def _right_offsets() -> List[float]:
    offsets = [0.25 * k for k in range(1, 65)]
    width = 16.0
    while width < 2 ** 20:
        offsets.extend(width + width * j / 16.0 for j in range(1, 17))
        width *= 2.0
    return offsets


_OFFSETS = _right_offsets()


@dataclass(frozen=True)
class MeasureTable:
    """
    Cumulative map V(x) = integral of f from the anchor to x, signed, at a node grid.

    left_mass / right_mass are the measures of the domain on either side of the anchor
    (inf when that end has infinite measure).
    """
    density: DensityModel
    anchor: float
    nodes: Tuple[float, ...]
    cumulative: Tuple[float, ...]
    left_mass: float
    right_mass: float
    left_ceiling: bool
    right_ceiling: bool
    abs_tol: float = 1e-12

    @property
    def total_measure(self) -> float:
        return self.left_mass + self.right_mass

    @property
    def left_finite(self) -> bool:
        return math.isfinite(self.left_mass)

    @property
    def right_finite(self) -> bool:
        return math.isfinite(self.right_mass)

    def _segment(self, a: float, b: float) -> float:
        return adaptive_simpson(self.density.f, a, b, abs_tol=self.abs_tol)

    def cumulative_at(self, x: float) -> float:
        if x >= self.density.domain.hi:
            return self.right_mass
        if x <= self.density.domain.lo:
            return -self.left_mass
        if x > self.nodes[-1]:
            if self.right_finite:
                return self.right_mass - tail_integral(self.density.psi, x, +1, abs_tol=self.abs_tol)
            if self.right_ceiling:
                return INF
            return self.cumulative[-1] + self._segment(self.nodes[-1], x)
        if x < self.nodes[0]:
            if self.left_finite:
                return -self.left_mass + tail_integral(self.density.psi, x, -1, abs_tol=self.abs_tol)
            if self.left_ceiling:
                return -INF
            return self.cumulative[0] - self._segment(x, self.nodes[0])
        return self._inside(x)

    def _inside(self, x: float) -> float:
        i = _bisect.bisect_right(self.nodes, x) - 1
        i = min(max(i, 0), len(self.nodes) - 1)
        if self.nodes[i] == x:
            return self.cumulative[i]
        return self.cumulative[i] + self._segment(self.nodes[i], x)

    def mass_left_of(self, x: float) -> float:
        """Measure of (domain.lo, x)."""
        return self.cumulative_at(x) + self.left_mass

    def mass_right_of(self, x: float) -> float:
        """Measure of (x, domain.hi)."""
        return self.right_mass - self.cumulative_at(x)

    def volume(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        if math.isinf(a) and a < 0 and not self.left_finite:
            return INF
        if math.isinf(b) and b > 0 and not self.right_finite:
            return INF
        if math.isfinite(a) and math.isfinite(b) and b - a < 64.0:
            lo, hi = max(a, self.density.domain.lo), min(b, self.density.domain.hi)
            # direct quadrature, splitting at kinks
            cuts = [lo] + [k for k in self.density.kinks if lo < k < hi] + [hi]
            return sum(self._segment(p, q) for p, q in zip(cuts, cuts[1:]))
        return self.cumulative_at(b) - self.cumulative_at(a)

    def inverse(self, v: float) -> float:
        """Point x with V(x) = v (V signed from the anchor)."""
        lo_v = -self.left_mass
        hi_v = self.right_mass
        if not lo_v <= v <= hi_v:
            raise InputError(f"Cumulative value {v!r} outside ({lo_v!r}, {hi_v!r})")
        if v == lo_v:
            return self.density.domain.lo
        if v == hi_v:
            return self.density.domain.hi
        k = _bisect.bisect_left(self.cumulative, v)
        if k < len(self.nodes) and self.cumulative[k] == v:
            return self.nodes[k]
        if 0 < k < len(self.nodes):
            lo, hi = self.nodes[k - 1], self.nodes[k]
        elif k == 0:
            hi = self.nodes[0]
            step = 1.0
            lo = hi - step
            while self.cumulative_at(lo) > v:
                step *= 2.0
                lo = hi - step
                if step > 1e15:
                    raise ConvergenceError(f"Could not bracket cumulative value {v!r}")
        else:
            lo = self.nodes[-1]
            step = 1.0
            hi = lo + step
            while self.cumulative_at(hi) < v:
                step *= 2.0
                hi = lo + step
                if step > 1e15:
                    raise ConvergenceError(f"Could not bracket cumulative value {v!r}")
        return self._solve(v, lo, hi)

    def _solve(self, v: float, lo: float, hi: float) -> float:
        # safeguarded Newton on V(x) - v, V(lo) <= v <= V(hi)
        base = self.cumulative_at(lo)
        x = 0.5 * (lo + hi)
        target = max(self.abs_tol, 1e-14 * abs(v))
        for _ in range(200):
            vx = base + self._segment(lo, x)
            g = vx - v
            if abs(g) <= target:
                return x
            if g > 0:
                hi = x
            else:
                lo, base = x, vx
            fx = self.density.f(x)
            step = x - g / fx if 0.0 < fx < INF else math.nan
            x = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * (1.0 + abs(lo)):
                return 0.5 * (lo + hi)
        raise ConvergenceError(f"Cumulative inverse for {v!r} did not converge", achieved=abs(g))


def _scan_side(density: DensityModel, anchor: float, direction: int, abs_tol: float):
    """Walk nodes away from the anchor. Returns (nodes, cumulative, mass, ceiling)."""
    end = density.domain.hi if direction > 0 else density.domain.lo
    kinks = [k for k in density.kinks if (k - anchor) * direction > 0]
    candidates = sorted({anchor + direction * o for o in _OFFSETS if (anchor + direction * o - end) * direction < 0}
                        | set(kinks) | ({end} if math.isfinite(end) else set()),
                        key=lambda p: (p - anchor) * direction)
    nodes, cum = [], []
    total = 0.0
    prev = anchor
    windows = []
    window_sum = 0.0
    window_edge = anchor + direction * 32.0
    for p in candidates:
        psi_p = density.psi(p)
        if psi_p > PSI_CEILING:
            # sharpen the last node to where psi reaches the ceiling
            def over_ceiling(t: float) -> float:
                return density.psi(t) - PSI_CEILING

            edge = prev
            if density.psi(prev) < PSI_CEILING:
                edge = bisect(over_ceiling, min(prev, p), max(prev, p), tol=1e-9 * (1.0 + abs(p)))
            if edge != prev:
                total += adaptive_simpson(density.f, min(prev, edge), max(prev, edge), abs_tol=abs_tol)
                nodes.append(edge)
                cum.append(direction * total)
            logger.info(f"Measure table: end {'+' if direction > 0 else '-'}inf infinite (psi ceiling)")
            return nodes, cum, INF, True
        piece = adaptive_simpson(density.f, min(prev, p), max(prev, p), abs_tol=abs_tol)
        total += piece
        window_sum += piece
        nodes.append(p)
        cum.append(direction * total)
        prev = p
        if (p - window_edge) * direction >= 0:
            windows.append(window_sum)
            window_sum = 0.0
            window_edge = anchor + direction * 2.0 * abs(window_edge - anchor)
        if psi_p < PSI_FLOOR and density.dpsi(p) * direction < 0 and not math.isfinite(end):
            total += tail_integral(density.psi, p, direction, abs_tol=abs_tol)
            return nodes, cum, total, False
    if math.isfinite(end):
        return nodes, cum, total, False

    declared = density.declared_ends[1 if direction > 0 else 0]
    if declared is not None:
        finite = declared
    elif total > 1e12:
        finite = False
    else:
        tail = windows[-4:]
        cauchy = bool(tail) and tail[-1] < 1e-10 * total
        geometric = len(tail) >= 4 and all(b <= 0.9 * a for a, b in zip(tail, tail[1:]))
        finite = cauchy or geometric
    if finite:
        total += tail_integral(density.psi, prev, direction, abs_tol=abs_tol)
        return nodes, cum, total, False
    return nodes, cum, INF, False


@lru_cache(maxsize=256)
def build_measure_table(density: DensityModel, abs_tol: float = 1e-12) -> MeasureTable:
    """Tabulate V(x) around the anchor (0, or the finite domain end) and decide end finiteness."""
    if density.radial:
        raise InputError("Measure tables are built for 1D densities; use the radial tools instead")
    dom = density.domain
    if math.isfinite(dom.lo):
        anchor = dom.lo
    elif math.isfinite(dom.hi):
        anchor = dom.hi
    else:
        anchor = 0.0
    r_nodes, r_cum, r_mass, r_ceiling = _scan_side(density, anchor, +1, abs_tol) if anchor < dom.hi else ([], [], 0.0, False)
    l_nodes, l_cum, l_mass, l_ceiling = _scan_side(density, anchor, -1, abs_tol) if anchor > dom.lo else ([], [], 0.0, False)
    nodes = tuple(reversed(l_nodes)) + (anchor,) + tuple(r_nodes)
    cum = tuple(reversed(l_cum)) + (0.0,) + tuple(r_cum)
    table = MeasureTable(density, anchor, nodes, cum, l_mass, r_mass, l_ceiling, r_ceiling, abs_tol)
    logger.info(f"Built measure table for {density.name}: {len(nodes)} nodes, "
                f"left mass {l_mass:.6g}, right mass {r_mass:.6g}")
    return table


def weighted_volume(density: DensityModel, region: Region1D) -> float:
    table = build_measure_table(density)
    total = 0.0
    for a, b in region.intervals:
        if a < density.domain.lo or b > density.domain.hi:
            raise InputError(f"Interval ({a}, {b}) leaves the domain {density.domain.describe()}")
        total += table.volume(a, b)
    return total


def weighted_perimeter_1d(density: DensityModel, region: Region1D,
                          boundary_policy: BoundaryPolicy = BoundaryPolicy.COUNT_ALL) -> float:
    """Sum of f over finite boundary points; FREE skips the domain's own endpoints."""
    free = BoundaryPolicy(boundary_policy) == BoundaryPolicy.FREE
    ends = density.domain.endpoints()
    total = 0.0
    for p in region.boundary_points():
        if free and p in ends:
            continue
        total += density.f(p)
    return total


# ---------------------------------------------------------------------------
# Shape classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShapeReport:
    shape: ShapeClass
    change_point: Optional[float] = None
    declared: bool = False

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "change_point": self.change_point, "declared": self.declared}


def _derivative_signs(density: DensityModel, xs: np.ndarray, zero_tol: float):
    points, signs = [], []
    for x in xs:
        x = float(x)
        sides = (-1, +1) if density.is_kink(x) else (0,)
        for side in sides:
            d = density.dpsi_side(x, side) if side else density.dpsi(x)
            points.append(x)
            signs.append(0 if abs(d) <= zero_tol else (1 if d > 0 else -1))
    return points, signs


def classify_shape(density: DensityModel, window: Tuple[float, float] = (-50.0, 50.0),
                   samples: int = 2001, zero_tol: float = 1e-12) -> ShapeReport:
    """Sign pattern of psi' on a grid (one-sided at kinks); declared_class short-circuits."""
    if density.declared_class is not None:
        return ShapeReport(density.declared_class, density.declared_change_point, declared=True)
    lo = max(window[0], density.domain.lo)
    hi = min(window[1], density.domain.hi)
    if not lo < hi:
        raise InputError(f"Classification window {window} misses the domain {density.domain.describe()}")
    xs = np.union1d(np.linspace(lo, hi, samples), [k for k in density.kinks if lo <= k <= hi])
    points, signs = _derivative_signs(density, xs, zero_tol)

    runs = []  # (sign, first index, last index)
    for i, s in enumerate(signs):
        if s == 0:
            continue
        if runs and runs[-1][0] == s:
            runs[-1][2] = i
        else:
            runs.append([s, i, i])
    if not runs:
        return ShapeReport(ShapeClass.CONSTANT)
    if len(runs) == 1:
        shape = ShapeClass.MONOTONE_INCREASING if runs[0][0] > 0 else ShapeClass.MONOTONE_DECREASING
        return ShapeReport(shape)
    if len(runs) > 2:
        logger.warning(f"psi' of {density.name} changes sign {len(runs) - 1} times on {window}")
        return ShapeReport(ShapeClass.UNRESOLVED)

    shape = ShapeClass.INCREASING_DECREASING if runs[0][0] > 0 else ShapeClass.DECREASING_INCREASING
    a, b = points[runs[0][2]], points[runs[1][1]]
    kinks_between = [k for k in density.kinks if a <= k <= b]
    if kinks_between:
        x0 = kinks_between[0]
    elif a == b:
        x0 = a
    else:
        try:
            x0 = bisect(density.dpsi, a, b, tol=1e-13)
        except ConvergenceError:
            x0 = 0.5 * (a + b)
    return ShapeReport(shape, float(x0))


def classify_convexity(density: DensityModel, window: Tuple[float, float] = (-50.0, 50.0),
                       samples: int = 2001, zero_tol: float = 1e-12) -> Optional[Convexity]:
    """Log-concavity class from sampled psi''; kinks count through the jump of psi'."""
    if density.declared_convexity is not None:
        return density.declared_convexity
    lo = max(window[0], density.domain.lo)
    hi = min(window[1], density.domain.hi)
    values = [density.d2psi(float(x)) for x in np.linspace(lo, hi, samples) if not density.is_kink(float(x))]
    jumps = [density.dpsi_side(k, +1) - density.dpsi_side(k, -1) for k in density.kinks if lo < k < hi]
    values.extend(math.copysign(INF, j) for j in jumps if abs(j) > zero_tol)
    if all(v < -zero_tol for v in values):
        return Convexity.STRICTLY_LOG_CONCAVE
    if all(v <= zero_tol for v in values):
        return Convexity.LOG_CONCAVE
    if all(v > zero_tol for v in values):
        return Convexity.STRICTLY_LOG_CONVEX
    if all(v >= -zero_tol for v in values):
        return Convexity.LOG_CONVEX
    return None
