"""
One-dimensional isoperimetric profiles for unimodal densities on the line, a half-line or a
compact interval, with or without a free boundary, plus a brute-force grid oracle.

Candidate families compared for a volume V:
  anchored   (lo, x) and (x, hi); half-lines when the anchoring end is infinite
  mode       intervals whose closure contains the change point x0 of psi'
  complement complements of mode intervals of volume M - V when the total M is finite
  fleeing    intervals sliding off to an infinite-measure end, perimeter -> 2 f(E)
"""
import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.density_core import (BoundaryPolicy, DensityModel, Domain, MeasureTable, Region1D,
                              ShapeClass, ShapeReport, build_measure_table, classify_shape)
from src.errors import InputError
from src.numerics import adaptive_simpson, bisect, golden_section

logger = logging.getLogger(__name__)

INF = math.inf
# a constant stretch is certified only where psi' vanishes exactly
FLAT_TOL = 0.0


class MinimizerKind(str, Enum):
    HALF_LINE_LEFT = "half-line-left"
    HALF_LINE_RIGHT = "half-line-right"
    BOUNDED_INTERVAL = "bounded-interval"
    COMPLEMENT_OF_INTERVAL = "complement-of-interval"
    TWO_HALF_LINES = "two-half-lines"
    BOUNDARY_ANCHORED_INTERVAL = "boundary-anchored-interval"


@dataclass(frozen=True)
class MinimizerDescriptor:
    """
    kind + endpoints. For complement kinds Omega = domain minus [a, b]; otherwise Omega = (a, b).

    family, when set, is the open range of the left endpoint a over a continuum of minimizers
    of equal perimeter; (a, b) is then one representative.
    """
    kind: MinimizerKind
    a: float
    b: float
    perimeter: float
    family: Optional[Tuple[float, float]] = None

    def region(self, domain: Domain) -> Region1D:
        if self.kind in (MinimizerKind.COMPLEMENT_OF_INTERVAL, MinimizerKind.TWO_HALF_LINES):
            return Region1D.of((self.a, self.b)).complement(domain)
        return Region1D.of((self.a, self.b))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "a": self.a, "b": self.b, "perimeter": self.perimeter}
        if self.family is not None:
            out["family"] = list(self.family)
        return out


@dataclass(frozen=True)
class ProfileResult:
    volume: float
    infimum_perimeter: float
    attained: bool
    minimizers: Tuple[MinimizerDescriptor, ...] = ()
    fleeing_end: Optional[str] = None
    shape: Optional[ShapeReport] = None
    policy: BoundaryPolicy = BoundaryPolicy.COUNT_ALL

    @property
    def kinds(self) -> Tuple[str, ...]:
        return tuple(m.kind.value for m in self.minimizers)

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "infimum_perimeter": self.infimum_perimeter,
            "attained": self.attained,
            "minimizers": [m.to_dict() for m in self.minimizers],
            "fleeing_end": self.fleeing_end,
            "shape": self.shape.to_dict() if self.shape else None,
            "policy": self.policy.value,
        }


@dataclass
class _Candidate:
    descriptor: Optional[MinimizerDescriptor]
    perimeter: float
    attained: bool = True
    fleeing_end: Optional[str] = None


@dataclass
class SolverSettings:
    tie_tol: float = 1e-9
    scan_samples: int = 512
    golden_tol: float = 1e-12
    classify_window: Tuple[float, float] = (-50.0, 50.0)
    classify_samples: int = 2001

    @classmethod
    def from_config(cls, config: Optional[dict]) -> "SolverSettings":
        section = (config or {}).get("profile", {})
        return cls(tie_tol=float(section.get("tie_tol", 1e-9)),
                   scan_samples=int(section.get("scan_samples", 512)),
                   golden_tol=float(section.get("golden_tol", 1e-12)),
                   classify_window=tuple(section.get("classify_window", (-50.0, 50.0))),
                   classify_samples=int(section.get("classify_samples", 2001)))


class _Problem:
    """Shared state of one profile solve: density, table, boundary costs."""

    def __init__(self, density: DensityModel, policy: BoundaryPolicy, settings: SolverSettings):
        self.density = density
        self.domain = density.domain
        self.table: MeasureTable = build_measure_table(density)
        self.policy = BoundaryPolicy(policy)
        self.settings = settings

    def f(self, x: float) -> float:
        return 0.0 if math.isinf(x) else self.density.f(x)

    def end_cost(self, x: float) -> float:
        """Cost of a boundary point of Omega lying on the domain boundary."""
        if math.isinf(x) or self.policy == BoundaryPolicy.FREE:
            return 0.0
        return self.density.f(x)

    def point_cost(self, x: float) -> float:
        if x == self.domain.lo or x == self.domain.hi:
            return self.end_cost(x)
        return self.f(x)

    def perimeter(self, a: float, b: float) -> float:
        return self.point_cost(a) + self.point_cost(b)


# ---------------------------------------------------------------------------
# Candidate families
# ---------------------------------------------------------------------------

def _anchored(problem: _Problem, volume: float) -> List[_Candidate]:
    out = []
    table, dom = problem.table, problem.domain
    if table.left_finite:
        x = table.inverse(volume - table.left_mass)
        kind = MinimizerKind.HALF_LINE_LEFT if math.isinf(dom.lo) else MinimizerKind.BOUNDARY_ANCHORED_INTERVAL
        p = problem.perimeter(dom.lo, x)
        out.append(_Candidate(MinimizerDescriptor(kind, dom.lo, x, p), p))
    if table.right_finite:
        x = table.inverse(table.right_mass - volume)
        kind = MinimizerKind.HALF_LINE_RIGHT if math.isinf(dom.hi) else MinimizerKind.BOUNDARY_ANCHORED_INTERVAL
        p = problem.perimeter(x, dom.hi)
        out.append(_Candidate(MinimizerDescriptor(kind, x, dom.hi, p), p))
    return out


def _mode_intervals(problem: _Problem, volume: float, x0: float) -> List[MinimizerDescriptor]:
    """
    Best interior intervals (a, b) with a <= x0 <= b and volume `volume`, scanned in the
    cumulative coordinate u = V(a) and refined by golden-section search.
    """
    table, settings = problem.table, problem.settings
    v0 = table.cumulative_at(x0)
    u_lo = max(v0 - volume, -table.left_mass)
    u_hi = min(v0, table.right_mass - volume)
    if not (math.isfinite(u_lo) and math.isfinite(u_hi)) or u_hi <= u_lo:
        return []
    lo_is_limit = u_lo == -table.left_mass
    hi_is_limit = u_hi == table.right_mass - volume
    span = u_hi - u_lo

    def endpoints(u: float) -> Tuple[float, float]:
        return table.inverse(u), table.inverse(u + volume)

    def cost(u: float) -> float:
        a, b = endpoints(u)
        return problem.perimeter(a, b)

    n = settings.scan_samples
    us = [u_lo + span * (k + 0.5) / n for k in range(n)]
    values = [cost(u) for u in us]
    k_best = int(np.argmin(values))
    bracket_lo = us[k_best - 1] if k_best > 0 else u_lo + 1e-15 * span
    bracket_hi = us[k_best + 1] if k_best < n - 1 else u_hi - 1e-15 * span
    u_star, p_star = golden_section(cost, bracket_lo, bracket_hi, tol=settings.golden_tol * (1.0 + span))
    best = min(p_star, values[k_best])
    tol = settings.tie_tol * max(1.0, best)

    def near_limit(u: float) -> bool:
        return (lo_is_limit and u - u_lo <= 1e-6 * span) or (hi_is_limit and u_hi - u <= 1e-6 * span)

    found: List[MinimizerDescriptor] = []
    ties = [k for k, p in enumerate(values) if p <= best + tol]
    runs: List[List[int]] = []
    for k in ties:
        if runs and k == runs[-1][-1] + 1:
            runs[-1].append(k)
        else:
            runs.append([k])

    for run in runs:
        if len(run) >= 3:
            first = u_lo if run[0] == 0 else us[run[0]]
            last = u_hi if run[-1] == n - 1 else us[run[-1]]
            mid = us[run[len(run) // 2]]
            a, b = endpoints(mid)
            family = (table.inverse(first), table.inverse(last))
            found.append(MinimizerDescriptor(MinimizerKind.BOUNDED_INTERVAL, a, b, problem.perimeter(a, b), family))
            continue
        lo = us[run[0] - 1] if run[0] > 0 else u_lo + 1e-15 * span
        hi = us[run[-1] + 1] if run[-1] < n - 1 else u_hi - 1e-15 * span
        u, p = golden_section(cost, lo, hi, tol=settings.golden_tol * (1.0 + span))
        if p <= best + tol and not near_limit(u):
            a, b = endpoints(u)
            found.append(MinimizerDescriptor(MinimizerKind.BOUNDED_INTERVAL, a, b, p))

    if not runs and not near_limit(u_star):
        a, b = endpoints(u_star)
        found.append(MinimizerDescriptor(MinimizerKind.BOUNDED_INTERVAL, a, b, p_star))
    return found


def _complement(problem: _Problem, inner: MinimizerDescriptor) -> MinimizerDescriptor:
    dom = problem.domain
    boundary = sum(problem.end_cost(e) for e in dom.endpoints())
    p = problem.f(inner.a) + problem.f(inner.b) + boundary
    kind = complement_kind(dom)
    return MinimizerDescriptor(kind, inner.a, inner.b, p, inner.family)


def complement_kind(domain: Domain) -> MinimizerKind:
    """On the whole line the complement of an interval is two half-lines."""
    if math.isinf(domain.lo) and math.isinf(domain.hi):
        return MinimizerKind.TWO_HALF_LINES
    return MinimizerKind.COMPLEMENT_OF_INTERVAL


def end_limit(density: DensityModel, direction: int, k_max: int = 60) -> Tuple[float, Optional[float]]:
    """
    Limit of f at the infinite end in `direction`, by sampling psi at +-2^k.

    Returns (f_limit, flat_from): flat_from is the start of a certified constant stretch
    (|psi'| <= FLAT_TOL from there on at every sample) or None.
    """
    xs = [direction * 2.0 ** k for k in range(k_max + 1)]
    psis = [density.psi(x) for x in xs]
    last = psis[-1]
    f_limit = math.exp(last) if last < 709.0 else INF

    flat_index = None
    for k in range(len(xs) - 1, -1, -1):
        if abs(density.dpsi(xs[k])) <= FLAT_TOL and abs(psis[k] - last) <= FLAT_TOL * (1.0 + abs(last)):
            flat_index = k
        else:
            break
    if flat_index is None:
        return f_limit, None
    start = xs[flat_index]
    if flat_index > 0:
        inner = xs[flat_index - 1]

        def steep(x: float) -> float:
            return 1.0 if abs(density.dpsi(x)) > FLAT_TOL else -1.0

        start = bisect(steep, min(inner, start), max(inner, start), tol=1e-12 * (1.0 + abs(start)))
    return f_limit, start


def _fleeing(problem: _Problem, volume: float) -> List[_Candidate]:
    out = []
    table, dom, density = problem.table, problem.domain, problem.density
    for direction, end, finite_mass, label in ((-1, dom.lo, table.left_finite, "-inf"),
                                               (+1, dom.hi, table.right_finite, "+inf")):
        if not math.isinf(end) or finite_mass:
            continue
        f_limit, flat_from = end_limit(density, direction)
        if not math.isfinite(f_limit):
            continue
        p = 2.0 * f_limit
        descriptor = None
        if flat_from is not None and f_limit > 0.0:
            length = volume / f_limit
            a, b = (flat_from, flat_from + length) if direction > 0 else (flat_from - length, flat_from)
            grid = np.linspace(a, b, 257)
            if all(abs(density.dpsi(float(x))) <= FLAT_TOL for x in grid):
                family = (flat_from, INF) if direction > 0 else (-INF, flat_from - length)
                descriptor = MinimizerDescriptor(MinimizerKind.BOUNDED_INTERVAL, a, b, p, family)
        out.append(_Candidate(descriptor, p, attained=descriptor is not None, fleeing_end=label))
    return out


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def _solve(density: DensityModel, volume: float, policy: BoundaryPolicy,
           settings: Optional[SolverSettings] = None) -> ProfileResult:
    settings = settings or SolverSettings()
    if density.radial:
        raise InputError("Profiles are solved for 1D densities")
    if not volume > 0.0 or not math.isfinite(volume):
        raise InputError(f"Volume must be a positive real, got {volume!r}")
    shape = classify_shape(density, settings.classify_window, settings.classify_samples)
    if shape.shape == ShapeClass.UNRESOLVED:
        raise InputError(f"Shape of {density.name} is unresolved; use the brute-force oracle")
    problem = _Problem(density, policy, settings)
    total = problem.table.total_measure
    if math.isfinite(total) and volume >= total:
        raise InputError(f"Volume {volume!r} must be below the total measure {total!r}")
    logger.info(f"Solving profile for {density.name} at V={volume} ({shape.shape.value}, {problem.policy.value})")

    candidates = _anchored(problem, volume)
    if shape.shape in (ShapeClass.INCREASING_DECREASING, ShapeClass.DECREASING_INCREASING):
        x0 = shape.change_point
        for d in _mode_intervals(problem, volume, x0):
            candidates.append(_Candidate(d, d.perimeter))
        if math.isfinite(total):
            for inner in _mode_intervals(problem, total - volume, x0):
                c = _complement(problem, inner)
                candidates.append(_Candidate(c, c.perimeter))
    candidates.extend(_fleeing(problem, volume))
    if not candidates:
        raise InputError(f"No admissible candidate for V={volume!r} on {problem.domain.describe()}")

    infimum = min(c.perimeter for c in candidates)
    tol = settings.tie_tol * max(1.0, infimum)
    tied = [c for c in candidates if c.perimeter <= infimum + tol]
    attained = [c for c in tied if c.attained and c.descriptor is not None]
    if attained:
        minimizers = tuple(c.descriptor for c in attained)
        return ProfileResult(volume, infimum, True, minimizers, None, shape, problem.policy)
    fleeing = next(c.fleeing_end for c in tied if c.fleeing_end)
    logger.info(f"Profile at V={volume} not attained; minimizing sequences flee to {fleeing}")
    return ProfileResult(volume, infimum, False, (), fleeing, shape, problem.policy)


def solve_profile(density: DensityModel, volume: float,
                  settings: Optional[SolverSettings] = None) -> ProfileResult:
    """I_f(V) with every minimizer within the tie tolerance; domain endpoints counted."""
    return _solve(density, volume, BoundaryPolicy.COUNT_ALL, settings)


def solve_profile_halfline(density: DensityModel, volume: float, free_boundary: bool = False,
                           settings: Optional[SolverSettings] = None) -> ProfileResult:
    if density.domain.kind != "halfline" or math.isinf(density.domain.lo):
        raise InputError(f"Expected a density on [a, inf), got {density.domain.describe()}")
    policy = BoundaryPolicy.FREE if free_boundary else BoundaryPolicy.COUNT_ALL
    return _solve(density, volume, policy, settings)


def solve_profile_compact(density: DensityModel, volume: float, free_boundary: bool = False,
                          settings: Optional[SolverSettings] = None) -> ProfileResult:
    if density.domain.kind != "compact":
        raise InputError(f"Expected a density on a compact interval, got {density.domain.describe()}")
    policy = BoundaryPolicy.FREE if free_boundary else BoundaryPolicy.COUNT_ALL
    return _solve(density, volume, policy, settings)


def solve_any(density: DensityModel, volume: float, free_boundary: bool = False,
              settings: Optional[SolverSettings] = None) -> ProfileResult:
    """Dispatch on the density's domain."""
    if density.domain.kind == "compact":
        return solve_profile_compact(density, volume, free_boundary, settings)
    if density.domain.kind == "halfline" and math.isfinite(density.domain.lo):
        return solve_profile_halfline(density, volume, free_boundary, settings)
    if free_boundary and density.domain.kind != "line":
        return _solve(density, volume, BoundaryPolicy.FREE, settings)
    return solve_profile(density, volume, settings)


def profile_sweep(density: DensityModel, volumes: Sequence[float], free_boundary: bool = False,
                  settings: Optional[SolverSettings] = None, workers: int = 4) -> List[ProfileResult]:
    """Independent solves for many volumes; results keep the order of `volumes`."""
    build_measure_table(density)  # one table, shared by every worker
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [executor.submit(solve_any, density, v, free_boundary, settings) for v in volumes]
        return [f.result() for f in futures]


def sweep_rows(results: Sequence[ProfileResult]) -> List[Dict[str, object]]:
    """Rows for the volume,infimum,attained,kind CSV."""
    return [{"volume": r.volume, "infimum": r.infimum_perimeter, "attained": r.attained,
             "kind": "|".join(dict.fromkeys(r.kinds)) if r.minimizers else "none"} for r in results]


# ---------------------------------------------------------------------------
# Stationarity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationarityResult:
    stationary: bool
    residual: float
    one_sided: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    residual_range: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {"stationary": self.stationary, "residual": self.residual,
                "one_sided": {k: list(v) for k, v in self.one_sided.items()},
                "residual_range": list(self.residual_range) if self.residual_range else None}


def stationarity_check(density: DensityModel, interval: Tuple[float, float], tol: float = 1e-9) -> StationarityResult:
    """(a, b) is stationary iff psi'(a) = -psi'(b); kinks report left/right derivatives."""
    a, b = interval
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InputError(f"Stationarity needs a bounded interval, got {interval}")
    residual = abs(density.dpsi(a) + density.dpsi(b))
    if not (density.is_kink(a) or density.is_kink(b)):
        return StationarityResult(residual <= tol, residual)
    sides = {}
    for label, x in (("a", a), ("b", b)):
        sides[label] = (density.dpsi_side(x, -1), density.dpsi_side(x, +1))
    combos = [abs(da + db) for da in sides["a"] for db in sides["b"]]
    return StationarityResult(residual <= tol, residual, sides, (min(combos), max(combos)))


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    perimeter: float
    region: Region1D
    kind: str
    volume_found: float
    h: float

    def to_dict(self) -> dict:
        return {"perimeter": self.perimeter, "region": [list(p) for p in self.region.intervals],
                "kind": self.kind, "volume_found": self.volume_found, "h": self.h}


def _geometry_kind(region: Region1D, domain: Domain) -> str:
    pieces = region.intervals
    if len(pieces) == 1:
        a, b = pieces[0]
        if math.isinf(a):
            return MinimizerKind.HALF_LINE_LEFT.value
        if math.isinf(b):
            return MinimizerKind.HALF_LINE_RIGHT.value
        if a == domain.lo or b == domain.hi:
            return MinimizerKind.BOUNDARY_ANCHORED_INTERVAL.value
        return MinimizerKind.BOUNDED_INTERVAL.value
    if len(pieces) == 2:
        (a, _), (_, d) = pieces
        if a == domain.lo and d == domain.hi:
            return complement_kind(domain).value
    return "union"


def _nearest(vc: np.ndarray, target: np.ndarray, floor: np.ndarray) -> np.ndarray:
    """Index j > floor with vc[j] closest to target (or -1)."""
    n = vc.size
    with np.errstate(invalid="ignore"):
        j = np.searchsorted(vc, target)
    best = np.full(target.shape, -1, dtype=int)
    best_err = np.full(target.shape, INF)
    for cand in (j - 1, j):
        ok = (cand > floor) & (cand < n)
        c = np.where(ok, cand, 0)
        with np.errstate(invalid="ignore"):
            err = np.abs(vc[c] - target)
        better = ok & np.isfinite(err) & (err < best_err)
        best = np.where(better, c, best)
        best_err = np.where(better, err, best_err)
    return best


def brute_force_profile(density: DensityModel, volume: float, window: Tuple[float, float] = (-8.0, 8.0),
                        points: int = 1601, max_components: int = 2, free_boundary: bool = False,
                        coarse_points: int = 121) -> OracleResult:
    """
    Exhaustive search over unions of at most max_components grid-aligned intervals (half-lines
    use virtual points at +-inf). The last endpoint snaps to the grid point whose volume is
    closest to the constraint. Two-component unions are searched on a coarsened grid.
    """
    if max_components < 1:
        raise InputError("max_components must be at least 1")
    dom = density.domain
    lo, hi = max(window[0], dom.lo), min(window[1], dom.hi)
    if not lo < hi:
        raise InputError(f"Oracle window {window} misses the domain {dom.describe()}")
    table = build_measure_table(density)
    grid = np.linspace(lo, hi, points)
    h = float(grid[1] - grid[0])

    vc_grid = [table.cumulative_at(float(grid[0]))]
    for p, q in zip(grid[:-1], grid[1:]):
        cuts = [float(p)] + [k for k in density.kinks if p < k < q] + [float(q)]
        vc_grid.append(vc_grid[-1] + sum(adaptive_simpson(density.f, s, t) for s, t in zip(cuts, cuts[1:])))
    xs = list(grid.astype(float))
    vc = list(vc_grid)
    cost = [density.f(x) for x in xs]
    free = free_boundary
    for idx in (0, len(xs) - 1):
        if xs[idx] in dom.endpoints() and free:
            cost[idx] = 0.0
    if math.isinf(dom.lo):
        xs.insert(0, -INF)
        vc.insert(0, -table.left_mass)
        cost.insert(0, 0.0)
    if math.isinf(dom.hi):
        xs.append(INF)
        vc.append(table.right_mass)
        cost.append(0.0)
    xs_a, vc_a, cost_a = np.array(xs), np.array(vc), np.array(cost)

    # one component: every left endpoint, right endpoint snapped
    idx = np.arange(xs_a.size)
    finite_left = np.isfinite(vc_a)
    target = np.where(finite_left, vc_a + volume, INF)
    j = _nearest(vc_a, target, idx)
    ok = j >= 0
    per = np.where(ok, cost_a + cost_a[np.maximum(j, 0)], INF)
    i_best = int(np.argmin(per))
    best_p = float(per[i_best])
    best_region = Region1D.of((xs_a[i_best], xs_a[j[i_best]])) if ok[i_best] else Region1D()
    best_vol = float(vc_a[j[i_best]] - vc_a[i_best]) if ok[i_best] else math.nan

    if max_components >= 2:
        stride = max(1, (xs_a.size - 1) // (coarse_points - 1))
        keep = sorted(set(range(0, xs_a.size, stride)) | {0, xs_a.size - 1})
        cx, cv, cc = xs_a[keep], vc_a[keep], cost_a[keep]
        m = cx.size
        I, J, K = np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij")
        mask = (I < J) & (J + 1 < K)
        I, J, K = I[mask], J[mask], K[mask]
        with np.errstate(invalid="ignore"):
            t2 = volume - (cv[J] - cv[I]) + cv[K]
        valid = np.isfinite(t2) & np.isfinite(cv[I]) & (cv[J] - cv[I] < volume)
        L = _nearest(cv, np.where(valid, t2, INF), K)
        good = valid & (L >= 0)
        if np.any(good):
            per2 = np.where(good, cc[I] + cc[J] + cc[K] + cc[np.maximum(L, 0)], INF)
            k_best = int(np.argmin(per2))
            if per2[k_best] < best_p:
                i, jj, k, l = I[k_best], J[k_best], K[k_best], L[k_best]
                best_p = float(per2[k_best])
                best_region = Region1D.of((cx[i], cx[jj]), (cx[k], cx[l]))
                best_vol = float(cv[jj] - cv[i] + cv[l] - cv[k])

    kind = _geometry_kind(best_region, dom) if not best_region.is_empty() else "none"
    logger.info(f"Oracle for {density.name} at V={volume}: perimeter {best_p:.6g} ({kind})")
    return OracleResult(best_p, best_region, kind, best_vol, h)
