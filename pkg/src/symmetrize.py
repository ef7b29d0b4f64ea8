"""
Columnar regions under the density exp(c|x|^2): weighted volume and perimeter, Steiner
symmetrization, Hsiang reflection and the convergence-to-ball experiment.

A ColumnarSet stores, for every lattice point p = (k + 1/2) h of a line (plane) through the
origin, the Region1D cut out of the set by the line through p orthogonal to it. Since
|x|^2 = |p|^2 + t^2 the density restricted to a column is exp(c|p|^2) exp(c t^2), and every
weighted length below is a closed-form erfi/erf difference.

Planar sets carry the angle of their column direction n = (cos a, sin a); the base direction is
e = (sin a, -cos a) so that x = p e + t n. Spatial sets carry the coordinate axis of their columns.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator
from scipy.special import erf, erfi

from src.data_quality import parse_mask
from src.density_core import Region1D
from src.errors import InputError
from src.numerics import adaptive_simpson, bisect

logger = logging.getLogger(__name__)

Key = Tuple[int, ...]
Segment = Tuple[float, float, float, float]

# step j of a planar run turns by pi * frac(j * WEYL)
WEYL = (math.sqrt(5.0) - 1.0) / 2.0
VERTICAL = math.pi / 2.0
HORIZONTAL = 0.0
# gaps this small (relative to h) between clipped pieces are rounding, not holes
MERGE_GAP = 1e-9
# sub-trapezoids per column gap when re-slicing; gaps next to an empty column get TIP_SPLITS
BODY_SPLITS = 4
TIP_SPLITS = 16
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def line_primitive(t, c: float):
    """G(t) = int_0^t exp(c s^2) ds (vectorised)."""
    t = np.asarray(t, dtype=float)
    if c == 0.0:
        return t
    k = math.sqrt(abs(c))
    scale = math.sqrt(math.pi) / (2.0 * k)
    return scale * (erfi(k * t) if c > 0.0 else erf(k * t))


def column_length(region: Region1D, c: float) -> float:
    """Weighted length of a column under exp(c t^2), i.e. without the exp(c|p|^2) factor."""
    if region.is_empty():
        return 0.0
    arr = np.asarray(region.intervals, dtype=float)
    return float(np.sum(line_primitive(arr[:, 1], c) - line_primitive(arr[:, 0], c)))


def _normalize_angle(angle: float) -> float:
    angle = math.fmod(angle, math.pi)
    return angle + math.pi if angle < 0.0 else angle


def _merge_close(pieces: Iterable[Tuple[float, float]], gap: float) -> Region1D:
    items = sorted((a, b) for a, b in pieces if b - a > gap)
    merged: List[List[float]] = []
    for a, b in items:
        if merged and a <= merged[-1][1] + gap:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return Region1D(tuple((a, b) for a, b in merged))


@dataclass(frozen=True)
class ColumnarSet:
    h: float
    c: float
    columns: Dict[Key, Region1D]
    dimension: int = 2
    angle: float = VERTICAL
    axis: int = 2

    def __post_init__(self):
        if not self.h > 0.0:
            raise InputError(f"Grid spacing must be positive, got {self.h}")
        if self.dimension not in (2, 3):
            raise InputError(f"Columnar sets live in the plane or in space, got dimension {self.dimension}")
        if self.dimension == 3 and self.axis not in (0, 1, 2):
            raise InputError(f"Column axis must be 0, 1 or 2, got {self.axis}")
        object.__setattr__(self, "angle", _normalize_angle(self.angle))

    # frame -------------------------------------------------------------------

    @property
    def frame(self) -> dict:
        return {"angle": self.angle} if self.dimension == 2 else {"axis": self.axis}

    def base_axes(self) -> Tuple[int, ...]:
        return tuple(ax for ax in range(3) if ax != self.axis)

    def frame_vectors(self) -> Tuple[np.ndarray, np.ndarray]:
        """(e, n): base and column directions of a planar frame."""
        return (np.array([math.sin(self.angle), -math.cos(self.angle)]),
                np.array([math.cos(self.angle), math.sin(self.angle)]))

    def base_point(self, key: Key) -> np.ndarray:
        return (np.asarray(key, dtype=float) + 0.5) * self.h

    def column_weight(self, key: Key) -> float:
        """h^(d-1) exp(c|p|^2)."""
        p = self.base_point(key)
        return self.h ** (self.dimension - 1) * math.exp(self.c * float(p @ p))

    # geometry ----------------------------------------------------------------

    def is_empty(self) -> bool:
        return not self.columns

    def with_columns(self, columns: Dict[Key, Region1D]) -> "ColumnarSet":
        return replace(self, columns={k: v for k, v in columns.items() if not v.is_empty()})

    def extent(self) -> float:
        """max |x| over the column endpoints (cell corners included)."""
        if self.is_empty():
            return 0.0
        reach = 0.0
        half = 0.5 * self.h * math.sqrt(self.dimension - 1)
        for key, region in self.columns.items():
            p = float(np.linalg.norm(self.base_point(key))) + half
            t = max(abs(v) for pair in region.intervals for v in pair)
            reach = max(reach, math.hypot(p, t))
        return reach

    def window(self, margin_cells: int = 4) -> List[List[float]]:
        """Bounding box in frame coordinates (base axes, then the column axis) plus margin."""
        if self.is_empty():
            return []
        margin = margin_cells * self.h
        keys = np.array(list(self.columns), dtype=float)
        lows = (keys.min(axis=0)) * self.h - margin
        highs = (keys.max(axis=0) + 1.0) * self.h + margin
        ends = [v for region in self.columns.values() for pair in region.intervals for v in pair]
        box = [[float(lo), float(hi)] for lo, hi in zip(lows, highs)]
        box.append([min(ends) - margin, max(ends) + margin])
        return box

    def to_dict(self, margin_cells: int = 4) -> dict:
        payload = {"h": self.h, "c": self.c, "dimension": self.dimension,
                   "window": self.window(margin_cells),
                   "columns": [{"p": self.base_point(key).tolist(),
                                "intervals": [list(pair) for pair in self.columns[key].intervals]}
                               for key in sorted(self.columns)]}
        payload.update(self.frame)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "ColumnarSet":
        try:
            h = float(payload["h"])
            c = float(payload.get("c", 0.0))
            dimension = int(payload.get("dimension", 2))
            entries = payload["columns"]
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Columnar set JSON needs h, c and columns: {e}") from e
        columns: Dict[Key, Region1D] = {}
        for entry in entries:
            p = np.atleast_1d(np.asarray(entry["p"], dtype=float))
            if p.size != dimension - 1:
                raise InputError(f"Column base point {p.tolist()} has the wrong dimension")
            idx = p / h - 0.5
            key = tuple(int(round(v)) for v in idx)
            if np.max(np.abs(idx - np.round(idx))) > 1e-6:
                raise InputError(f"Column base point {p.tolist()} is off the lattice (k + 1/2) h")
            pairs = [(float(a), float(b)) for a, b in entry["intervals"]]
            for (a, b), nxt in zip(pairs, pairs[1:] + [None]):
                if not a < b or (nxt is not None and not b < nxt[0]):
                    raise InputError(f"Column at {p.tolist()} must hold sorted disjoint intervals")
            if key in columns:
                raise InputError(f"Duplicate column at {p.tolist()}")
            columns[key] = Region1D(tuple(pairs))
        frame = {"angle": float(payload.get("angle", VERTICAL))} if dimension == 2 else \
            {"axis": int(payload.get("axis", 2))}
        return cls(h, c, {k: v for k, v in columns.items() if not v.is_empty()}, dimension, **frame)


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _frame_coordinates(point: Sequence[float], dimension: int, angle: float, axis: int) -> Tuple[np.ndarray, float]:
    """World point to (base coordinates, column coordinate)."""
    x = np.asarray(point, dtype=float)
    if x.size != dimension:
        raise InputError(f"Point {x.tolist()} must have {dimension} coordinates")
    if dimension == 2:
        angle = _normalize_angle(angle)
        e = np.array([math.sin(angle), -math.cos(angle)])
        n = np.array([math.cos(angle), math.sin(angle)])
        return np.array([x @ e]), float(x @ n)
    base = [ax for ax in range(3) if ax != axis]
    return x[base], float(x[axis])


def ball(center: Sequence[float], radius: float, h: float, c: float = 0.0, dimension: int = 2,
         angle: float = VERTICAL, axis: int = 2) -> ColumnarSet:
    """Exact columns of the ball |x - center| < radius."""
    if not radius > 0.0:
        raise InputError(f"Ball radius must be positive, got {radius}")
    pc, tc = _frame_coordinates(center, dimension, angle, axis)
    lo = np.floor((pc - radius) / h - 0.5).astype(int)
    hi = np.ceil((pc + radius) / h - 0.5).astype(int)
    columns: Dict[Key, Region1D] = {}
    for key in np.ndindex(*(hi - lo + 1)):
        k = tuple(int(v) for v in np.asarray(key) + lo)
        offset = (np.asarray(k, dtype=float) + 0.5) * h - pc
        s2 = radius * radius - float(offset @ offset)
        if s2 > 0.0:
            s = math.sqrt(s2)
            columns[k] = Region1D(((tc - s, tc + s),))
    return ColumnarSet(h, c, columns, dimension, angle=angle, axis=axis)


def box(lo: Sequence[float], hi: Sequence[float], h: float, c: float = 0.0) -> ColumnarSet:
    """Axis-aligned box with columns along the last coordinate."""
    lo_arr, hi_arr = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    dimension = lo_arr.size
    if dimension not in (2, 3) or hi_arr.size != dimension or np.any(hi_arr <= lo_arr):
        raise InputError("Box corners must be increasing points of the plane or space")
    kmin = np.ceil(lo_arr[:-1] / h - 0.5).astype(int)
    kmax = np.ceil(hi_arr[:-1] / h - 0.5).astype(int) - 1
    columns = {}
    for key in np.ndindex(*(kmax - kmin + 1)):
        k = tuple(int(v) for v in np.asarray(key) + kmin)
        columns[k] = Region1D(((float(lo_arr[-1]), float(hi_arr[-1])),))
    return ColumnarSet(h, c, columns, dimension, angle=VERTICAL, axis=2)


def annular_sector(r_in: float, r_out: float, theta0: float, theta1: float, h: float,
                   c: float = 0.0) -> ColumnarSet:
    """{r_in < |x| < r_out, theta0 < arg x < theta1} inside the right half-plane, vertical columns."""
    if not (0.0 <= r_in < r_out and -math.pi / 2 < theta0 < theta1 < math.pi / 2):
        raise InputError("Sector needs 0 <= r_in < r_out and -pi/2 < theta0 < theta1 < pi/2")
    columns: Dict[Key, Region1D] = {}
    for i in range(0, math.ceil(r_out / h)):
        p = (i + 0.5) * h
        if p >= r_out:
            break
        outer = math.sqrt(r_out * r_out - p * p)
        wedge = (p * math.tan(theta0), p * math.tan(theta1))
        if p >= r_in:
            rings = [(-outer, outer)]
        else:
            inner = math.sqrt(r_in * r_in - p * p)
            rings = [(-outer, -inner), (inner, outer)]
        pieces = [(max(a, wedge[0]), min(b, wedge[1])) for a, b in rings]
        region = Region1D.of(*pieces)
        if not region.is_empty():
            columns[(i,)] = region
    return ColumnarSet(h, c, columns, 2, angle=VERTICAL)


def union(*sets: ColumnarSet) -> ColumnarSet:
    if not sets:
        raise InputError("Union of no sets")
    first = sets[0]
    columns: Dict[Key, List[Tuple[float, float]]] = {}
    for other in sets:
        if (other.h, other.c, other.dimension) != (first.h, first.c, first.dimension):
            raise InputError("Union needs sets on the same grid and density")
        other = rebase(other, **first.frame)
        for key, region in other.columns.items():
            columns.setdefault(key, []).extend(region.intervals)
    return first.with_columns({k: Region1D.of(*v) for k, v in columns.items()})


def random_blobs(seed: int, count: int = 3, h: float = 1.0 / 128.0, c: float = 1.0,
                 spread: float = 1.0, radii: Tuple[float, float] = (0.3, 0.6)) -> ColumnarSet:
    """Union of `count` disks with uniform random centers in [-spread, spread]^2."""
    rng = np.random.default_rng(seed)
    disks = [ball(rng.uniform(-spread, spread, size=2), float(rng.uniform(*radii)), h, c)
             for _ in range(count)]
    return union(*disks)


def from_mask(payload: dict, c: float = 0.0) -> ColumnarSet:
    """Planar set from a binary mask; the mask's pixel columns become vertical columns."""
    try:
        h, ((x0, _), (y0, _)), cells = parse_mask(payload)
    except ValueError as e:
        raise InputError(f"Malformed mask: {e}") from e
    offset = x0 / h
    if abs(offset - round(offset)) > 1e-9:
        raise InputError(f"Mask window must start on a multiple of h = {h}")
    columns: Dict[Key, Region1D] = {}
    for col in range(cells.shape[1]):
        filled = np.flatnonzero(cells[:, col])
        if filled.size == 0:
            continue
        breaks = np.flatnonzero(np.diff(filled) > 1)
        starts = np.concatenate(([filled[0]], filled[breaks + 1]))
        stops = np.concatenate((filled[breaks], [filled[-1]])) + 1
        columns[(int(round(offset)) + col,)] = Region1D(
            tuple((y0 + int(a) * h, y0 + int(b) * h) for a, b in zip(starts, stops)))
    return ColumnarSet(h, c, columns, 2, angle=VERTICAL)


# ---------------------------------------------------------------------------
# Re-slicing along another direction
# ---------------------------------------------------------------------------

def _matched_runs(cols: Dict[int, Tuple]) -> List[List[int]]:
    """Maximal runs of consecutive column indices whose interval counts agree."""
    runs: List[List[int]] = []
    for i in sorted(cols):
        if runs and i == runs[-1][-1] + 1 and len(cols[i]) == len(cols[runs[-1][-1]]):
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


def _tip_reach(g_out: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
    """
    Where the squared half-width, continued outward past an end column, reaches zero: quadratic
    through the last three columns, linear through two. Returns (u, coefficients) with u in
    units of h inside (0, 1], or None when it does not close before the next lattice line.
    """
    if g_out.size >= 3:
        d1, d2 = g_out[0] - g_out[1], g_out[0] - 2.0 * g_out[1] + g_out[2]
        coeffs = np.array([0.5 * d2, d1 + 0.5 * d2, g_out[0]])
    elif g_out.size == 2:
        coeffs = np.array([0.0, g_out[0] - g_out[1], g_out[0]])
    else:
        return None
    roots = np.roots(coeffs)
    closing = roots.real[(np.abs(roots.imag) <= 1e-12) & (roots.real > 0.0) & (roots.real <= 1.0)]
    if closing.size == 0:
        return None
    return float(closing.min()), coeffs


def _cap(m_out: np.ndarray, g_out: np.ndarray, open_end: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Outward samples (u, midline, squared half-width) past an end column, ordered from the
    column outward: a closing tip next to an empty column, a half-cell wall otherwise.
    """
    reach = _tip_reach(g_out) if open_end else None
    if reach is None:
        return np.array([0.0, 0.5]), np.full(2, m_out[0]), np.full(2, g_out[0])
    u_tip, coeffs = reach
    u = u_tip * (1.0 - (1.0 - np.linspace(0.0, 1.0, TIP_SPLITS + 1)) ** 2)
    slope = m_out[0] - m_out[1] if m_out.size >= 2 else 0.0
    g = np.maximum(np.polyval(coeffs, u), 0.0)
    g[-1] = 0.0
    return u, m_out[0] + slope * u, g


def _gap_fractions(dense_start: bool, dense_end: bool) -> np.ndarray:
    if dense_start and dense_end:
        return 0.5 - 0.5 * np.cos(np.pi * np.linspace(0.0, 1.0, TIP_SPLITS + 1))
    if dense_start:
        return np.linspace(0.0, 1.0, TIP_SPLITS + 1) ** 2
    if dense_end:
        return 1.0 - (1.0 - np.linspace(0.0, 1.0, TIP_SPLITS + 1)) ** 2
    return np.linspace(0.0, 1.0, BODY_SPLITS + 1)


def _chain_quads(p: np.ndarray, lo: np.ndarray, hi: np.ndarray, h: float,
                 open_left: bool, open_right: bool) -> np.ndarray:
    """
    Thin trapezoids covering one chain of matched intervals. Between columns the midline is
    linear and the squared half-width is a Pchip interpolant, so round boundaries are followed
    up to their tips instead of being cut off by half-cell walls.
    """
    mid = 0.5 * (lo + hi)
    g = (0.5 * (hi - lo)) ** 2
    n = p.size
    u_l, m_l, g_l = _cap(mid[:3], g[:3], open_left)
    u_r, m_r, g_r = _cap(mid[::-1][:3], g[::-1][:3], open_right)

    body = [p[i] + h * _gap_fractions(open_left and i == 0, open_right and i == n - 2)[:-1]
            for i in range(n - 1)]
    q_body = np.concatenate(body + [p[-1:]])
    g_body = PchipInterpolator(p, g)(q_body) if n >= 2 else g.copy()
    m_body = np.interp(q_body, p, mid)

    q = np.concatenate([p[0] - h * u_l[:0:-1], q_body, p[-1] + h * u_r[1:]])
    m = np.concatenate([m_l[:0:-1], m_body, m_r[1:]])
    w = np.sqrt(np.maximum(np.concatenate([g_l[:0:-1], g_body, g_r[1:]]), 0.0))
    lower, upper = m - w, m + w
    return np.stack([np.stack([q[:-1], lower[:-1]], axis=1),
                     np.stack([q[1:], lower[1:]], axis=1),
                     np.stack([q[1:], upper[1:]], axis=1),
                     np.stack([q[:-1], upper[:-1]], axis=1)], axis=1)


def _planar_pieces(cset: ColumnarSet) -> np.ndarray:
    """
    Convex quadrilaterals (counter-clockwise, frame coordinates) covering the set. Runs of
    neighbouring columns with equal interval counts are matched interval by interval; where
    the counts change the pieces stop at half-cell walls.
    """
    h = cset.h
    cols = {key[0]: region.intervals for key, region in cset.columns.items() if not region.is_empty()}
    pieces = []
    for run in _matched_runs(cols):
        p = (np.asarray(run, dtype=float) + 0.5) * h
        ends = np.asarray([cols[i] for i in run], dtype=float)
        open_left, open_right = run[0] - 1 not in cols, run[-1] + 1 not in cols
        for j in range(ends.shape[1]):
            pieces.append(_chain_quads(p, ends[:, j, 0], ends[:, j, 1], h, open_left, open_right))
    return np.concatenate(pieces) if pieces else np.zeros((0, 4, 2))


def _rebase_planar(cset: ColumnarSet, angle: float) -> ColumnarSet:
    h = cset.h
    e_old, n_old = cset.frame_vectors()
    target = ColumnarSet(h, cset.c, {}, 2, angle=angle)
    e_new, n_new = target.frame_vectors()
    # new frame vectors in old frame coordinates
    e_loc = np.array([e_new @ e_old, e_new @ n_old])
    n_loc = np.array([n_new @ e_old, n_new @ n_old])

    quads = _planar_pieces(cset)
    if quads.size == 0:
        return target
    proj = quads @ e_loc
    kmin = np.ceil(proj.min(axis=1) / h - 0.5).astype(int)
    kmax = np.floor(proj.max(axis=1) / h - 0.5).astype(int)
    counts = np.maximum(kmax - kmin + 1, 0)
    piece = np.repeat(np.arange(len(quads)), counts)
    k = kmin[piece] + np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    origin = ((k + 0.5) * h)[:, None] * e_loc[None, :]

    # Cyrus-Beck: clip the line origin + t n_loc against every edge half-plane
    t_lo = np.full(k.size, -np.inf)
    t_hi = np.full(k.size, np.inf)
    inside = np.ones(k.size, dtype=bool)
    for edge in range(4):
        q0 = quads[piece, edge]
        d = quads[piece, (edge + 1) % 4] - q0
        normal = np.stack([-d[:, 1], d[:, 0]], axis=1)
        num = np.einsum("ij,ij->i", normal, origin - q0)
        den = normal @ n_loc
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = -num / den
        t_lo = np.where(den > 0.0, np.maximum(t_lo, bound), t_lo)
        t_hi = np.where(den < 0.0, np.minimum(t_hi, bound), t_hi)
        inside &= ~((den == 0.0) & (num < 0.0))
    keep = inside & (t_hi > t_lo)

    segments: Dict[int, List[Tuple[float, float]]] = {}
    for kk, lo, hi in zip(k[keep].tolist(), t_lo[keep].tolist(), t_hi[keep].tolist()):
        segments.setdefault(kk, []).append((lo, hi))
    return target.with_columns({(kk,): _merge_close(v, MERGE_GAP * h) for kk, v in segments.items()})


def _rebase_spatial(cset: ColumnarSet, axis: int) -> ColumnarSet:
    """Staircase re-slicing: column cells are boxes of side h around their base point."""
    h = cset.h
    old_base = cset.base_axes()
    new_base = tuple(ax for ax in range(3) if ax != axis)
    segments: Dict[Key, List[Tuple[float, float]]] = {}
    for key, region in cset.columns.items():
        index = dict(zip(old_base, key))
        centre = (index[axis] + 0.5) * h
        for lo, hi in region.intervals:
            for k in range(math.ceil(lo / h - 0.5), math.ceil(hi / h - 0.5)):
                index[cset.axis] = k
                new_key = tuple(index[ax] for ax in new_base)
                segments.setdefault(new_key, []).append((centre - 0.5 * h, centre + 0.5 * h))
    target = ColumnarSet(h, cset.c, {}, 3, axis=axis)
    return target.with_columns({key: _merge_close(v, MERGE_GAP * h) for key, v in segments.items()})


def rebase(cset: ColumnarSet, angle: Optional[float] = None, axis: Optional[int] = None) -> ColumnarSet:
    """Re-slice a set along another column direction (planar angle or spatial axis)."""
    if cset.dimension == 2:
        if axis is not None:
            angle = _axis_angle(axis)
        if angle is None or _normalize_angle(angle) == cset.angle:
            return cset
        return _rebase_planar(cset, _normalize_angle(angle))
    if angle is not None:
        raise InputError("Spatial sets are re-sliced along coordinate axes only")
    if axis is None or axis == cset.axis:
        return cset
    if axis not in (0, 1, 2):
        raise InputError(f"Column axis must be 0, 1 or 2, got {axis}")
    return _rebase_spatial(cset, axis)


def _axis_angle(axis: int) -> float:
    if axis not in (0, 1):
        raise InputError(f"Planar axis must be 0 or 1, got {axis}")
    return HORIZONTAL if axis == 0 else VERTICAL


# ---------------------------------------------------------------------------
# Weighted volume, perimeter, symmetric difference
# ---------------------------------------------------------------------------

def weighted_volume_columnar(cset: ColumnarSet) -> float:
    return float(sum(cset.column_weight(key) * column_length(region, cset.c)
                     for key, region in cset.columns.items()))


def _xor_pieces(first: Sequence[Tuple[float, float]], second: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    points = sorted({v for pair in (*first, *second) for v in pair})
    pieces = []
    for u, v in zip(points, points[1:]):
        mid = 0.5 * (u + v)
        in_first = any(a < mid < b for a, b in first)
        in_second = any(a < mid < b for a, b in second)
        if in_first != in_second:
            if pieces and pieces[-1][1] == u:
                pieces[-1] = (pieces[-1][0], v)
            else:
                pieces.append((u, v))
    return pieces


def symmetric_difference(first: ColumnarSet, second: ColumnarSet) -> float:
    """Columnwise weighted measure of the symmetric difference (second re-sliced onto first's frame)."""
    second = rebase(second, **first.frame)
    total = 0.0
    for key in set(first.columns) | set(second.columns):
        a = first.columns.get(key, Region1D()).intervals
        b = second.columns.get(key, Region1D()).intervals
        pieces = _xor_pieces(a, b)
        if pieces:
            total += first.column_weight(key) * column_length(Region1D(tuple(pieces)), first.c)
    return total


def _planar_boundary(cset: ColumnarSet) -> Tuple[List[Segment], int]:
    """
    Boundary segments (p0, t0, p1, t1) of the quadrilateral model and the number of
    neighbouring column pairs whose interval counts disagree (caps and topology changes).
    """
    h = cset.h
    cols = {key[0]: region.intervals for key, region in cset.columns.items()}
    segments: List[Segment] = []
    caps = 0
    for i in sorted(set(cols) | {k - 1 for k in cols}):
        left, right = cols.get(i, ()), cols.get(i + 1, ())
        p0, p1 = (i + 0.5) * h, (i + 1.5) * h
        if left and right and len(left) == len(right):
            for (a0, b0), (a1, b1) in zip(left, right):
                segments.append((p0, a0, p1, a1))
                segments.append((p0, b0, p1, b1))
            continue
        caps += 1
        pm = p0 + 0.5 * h
        for a, b in left:
            segments.extend(((p0, a, pm, a), (p0, b, pm, b)))
        for a, b in right:
            segments.extend(((pm, a, p1, a), (pm, b, p1, b)))
        for u, v in _xor_pieces(left, right):
            segments.append((pm, u, pm, v))
    return segments, caps


def _clip_to_halfspace(segments: np.ndarray, sign: int) -> np.ndarray:
    """Part of each segment with sign * t > 0."""
    p0, t0, p1, t1 = segments.T
    s0, s1 = sign * t0, sign * t1
    lo = np.zeros(len(segments))
    hi = np.ones(len(segments))
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(s0 != s1, s0 / (s0 - s1), 0.0)
    lo = np.where((s0 <= 0.0) & (s1 > 0.0), cross, lo)
    hi = np.where((s0 > 0.0) & (s1 <= 0.0), cross, hi)
    hi = np.where((s0 <= 0.0) & (s1 <= 0.0), lo, hi)
    dp, dt = p1 - p0, t1 - t0
    return np.stack([p0 + lo * dp, t0 + lo * dt, p0 + hi * dp, t0 + hi * dt], axis=1)


def _segment_lengths(segments: np.ndarray, c: float) -> float:
    """Sum of the weighted lengths of planar segments under exp(c (p^2 + t^2))."""
    if segments.size == 0:
        return 0.0
    p0, t0, p1, t1 = segments.T
    vertical = p0 == p1
    horizontal = (t0 == t1) & ~vertical
    slanted = ~(vertical | horizontal)
    total = np.sum(np.exp(c * p0[vertical] ** 2)
                   * np.abs(line_primitive(t1[vertical], c) - line_primitive(t0[vertical], c)))
    total += np.sum(np.exp(c * t0[horizontal] ** 2)
                    * np.abs(line_primitive(p1[horizontal], c) - line_primitive(p0[horizontal], c)))
    if np.any(slanted):
        s = 0.5 * (_GAUSS_NODES + 1.0)
        ps = p0[slanted, None] + s[None, :] * (p1 - p0)[slanted, None]
        ts = t0[slanted, None] + s[None, :] * (t1 - t0)[slanted, None]
        length = np.hypot(p1 - p0, t1 - t0)[slanted]
        total += np.sum(0.5 * length * (np.exp(c * (ps * ps + ts * ts)) @ _GAUSS_WEIGHTS))
    return float(total)


def _spatial_perimeter(cset: ColumnarSet, sign: Optional[int]) -> Tuple[float, int]:
    """Graph terms h^2 f sqrt(1 + |grad|^2) where all four neighbours match, walls elsewhere."""
    h, c = cset.h, cset.c
    cols = {key: region.intervals for key, region in cset.columns.items()}
    steps = ((1, 0), (-1, 0), (0, 1), (0, -1))
    total = 0.0
    caps = 0

    def keep(t: float) -> bool:
        return sign is None or sign * t > 0.0

    for (i, j), col in cols.items():
        weight = cset.column_weight((i, j))
        nbrs = [cols.get((i + di, j + dj), ()) for di, dj in steps]
        if all(len(nb) == len(col) for nb in nbrs):
            for idx, pair in enumerate(col):
                for end in (0, 1):
                    t = pair[end]
                    if not keep(t):
                        continue
                    gx = (nbrs[0][idx][end] - nbrs[1][idx][end]) / (2.0 * h)
                    gy = (nbrs[2][idx][end] - nbrs[3][idx][end]) / (2.0 * h)
                    total += weight * math.exp(c * t * t) * math.sqrt(1.0 + gx * gx + gy * gy)
        else:
            caps += 1
            total += sum(weight * math.exp(c * t * t) for pair in col for t in pair if keep(t))
        for (di, dj), nb in zip(steps, nbrs):
            neighbour_present = (i + di, j + dj) in cols
            if neighbour_present and (di < 0 or dj < 0):
                continue
            if neighbour_present and len(nb) == len(col):
                continue
            pieces = _xor_pieces(col, nb)
            if sign is not None:
                pieces = [(max(u, 0.0), v) if sign > 0 else (u, min(v, 0.0)) for u, v in pieces]
                pieces = [(u, v) for u, v in pieces if v > u]
            if not pieces:
                continue
            # wall face between the two cells; along it the tangential base coordinate spans a cell
            face = np.array([(i + 0.5 + 0.5 * di) * h, (j + 0.5 + 0.5 * dj) * h])
            normal_coord = face[0] if di else face[1]
            along = j if di else i
            span = float(line_primitive((along + 1) * h, c) - line_primitive(along * h, c))
            total += math.exp(c * normal_coord ** 2) * span * column_length(Region1D(tuple(pieces)), c)
    return total, caps


def _perimeter_and_caps(cset: ColumnarSet, halfspace: Optional[int] = None) -> Tuple[float, int]:
    if cset.dimension == 3:
        return _spatial_perimeter(cset, halfspace)
    segments, caps = _planar_boundary(cset)
    arr = np.asarray(segments, dtype=float).reshape(-1, 4)
    if halfspace is not None:
        arr = _clip_to_halfspace(arr, halfspace)
    return _segment_lengths(arr, cset.c), caps


def weighted_perimeter_columnar(cset: ColumnarSet, halfspace: Optional[int] = None) -> float:
    """
    Weighted perimeter estimate. Planar sets: weighted length of the boundary of the
    quadrilateral model (segments between matched endpoints of neighbouring columns, half-cell
    edges and walls where interval counts change). Spatial sets: central-difference graph
    terms and cell walls. halfspace=+1/-1 restricts to the open half {sign * t > 0} of the
    frame (relative perimeter).

    Accuracy degrades near tangential boundaries, where the error is O(h^(1/2)) per cap.
    """
    return _perimeter_and_caps(cset, halfspace)[0]


def _allowance(before: ColumnarSet, after: ColumnarSet, caps: int) -> float:
    reach = max(before.extent(), after.extent())
    f_max = math.exp(max(before.c, 0.0) * reach * reach)
    return f_max * math.sqrt(before.h) * before.h ** (before.dimension - 2) * max(2, caps)


def perimeter_allowance(before: ColumnarSet, after: ColumnarSet) -> float:
    """f_max h^(1/2) h^(d-2) per cap of either set (at least two caps)."""
    caps = _perimeter_and_caps(before)[1] + _perimeter_and_caps(after)[1]
    return _allowance(before, after, caps)


# ---------------------------------------------------------------------------
# Steiner symmetrization and Hsiang reflection
# ---------------------------------------------------------------------------

def _half_widths(lengths: np.ndarray, extents: np.ndarray, c: float, tol: float = 1e-12) -> np.ndarray:
    """Solve 2 G(a) = L for every column by vectorised bisection on [0, extent]."""
    if c == 0.0:
        return 0.5 * lengths
    lo = np.zeros_like(lengths)
    hi = extents.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        too_long = 2.0 * line_primitive(mid, c) > lengths
        hi = np.where(too_long, mid, hi)
        lo = np.where(too_long, lo, mid)
        if np.all(hi - lo <= tol):
            break
    return 0.5 * (lo + hi)


def _symmetrize_columns(cset: ColumnarSet) -> ColumnarSet:
    keys = list(cset.columns)
    if not keys:
        return cset
    regions = [cset.columns[k] for k in keys]
    lengths = np.array([column_length(r, cset.c) for r in regions])
    extents = np.array([max(abs(v) for pair in r.intervals for v in pair) for r in regions])
    widths = _half_widths(lengths, extents, cset.c)
    columns = {}
    for key, region, a in zip(keys, regions, widths.tolist()):
        intervals = region.intervals
        if len(intervals) == 1 and intervals[0][0] == -intervals[0][1]:
            columns[key] = region
        elif a > 0.0:
            columns[key] = Region1D(((-a, a),))
    return cset.with_columns(columns)


def steiner_symmetrize(cset: ColumnarSet, axis: Optional[int] = None,
                       angle: Optional[float] = None) -> ColumnarSet:
    """
    Replace every column along `axis` (or a planar direction `angle`) by the symmetric
    interval (-a, a) of the same weighted length under exp(c t^2). Columns that already are
    symmetric intervals are kept bit for bit.
    """
    if axis is None and angle is None:
        raise InputError("Steiner symmetrization needs an axis or a planar angle")
    frame = rebase(cset, axis=axis, angle=angle)
    result = _symmetrize_columns(frame)
    logger.debug(f"Symmetrized {len(frame.columns)} columns along {frame.frame}")
    return result


def _halves(cset: ColumnarSet) -> Tuple[Dict[Key, Region1D], Dict[Key, Region1D]]:
    positive, negative = {}, {}
    for key, region in cset.columns.items():
        pos = Region1D.of(*((max(a, 0.0), b) for a, b in region.intervals))
        neg = Region1D.of(*((a, min(b, 0.0)) for a, b in region.intervals))
        if not pos.is_empty():
            positive[key] = pos
        if not neg.is_empty():
            negative[key] = neg
    return positive, negative


@dataclass(frozen=True)
class ReflectionResult:
    result: ColumnarSet
    kept: str
    volume_positive: float
    volume_negative: float
    perimeter_positive: float
    perimeter_negative: float

    def to_dict(self) -> dict:
        return {"kept": self.kept, "volume_positive": self.volume_positive,
                "volume_negative": self.volume_negative, "perimeter_positive": self.perimeter_positive,
                "perimeter_negative": self.perimeter_negative,
                "volume": weighted_volume_columnar(self.result)}


def hsiang_reflect(cset: ColumnarSet, hyperplane: int) -> ReflectionResult:
    """
    Split by {x_hyperplane = 0}, keep the half with the smaller relative perimeter (ties keep
    the positive side) and return it united with its mirror image. The output volume is twice
    the kept half's; both halves' volumes are reported so callers can equalize first.
    """
    if not 0 <= hyperplane < cset.dimension:
        raise InputError(f"Hyperplane index must be in [0, {cset.dimension}), got {hyperplane}")
    frame = rebase(cset, axis=hyperplane)
    positive, negative = _halves(frame)
    vol_pos = weighted_volume_columnar(frame.with_columns(positive))
    vol_neg = weighted_volume_columnar(frame.with_columns(negative))
    per_pos = weighted_perimeter_columnar(frame, halfspace=+1)
    per_neg = weighted_perimeter_columnar(frame, halfspace=-1)
    keep_positive = per_pos <= per_neg * (1.0 + 1e-12)
    half = positive if keep_positive else negative
    mirrored = {key: Region1D.of(*region.intervals, *((-b, -a) for a, b in region.intervals))
                for key, region in half.items()}
    kept = "positive" if keep_positive else "negative"
    logger.info(f"Hsiang reflection in x_{hyperplane} = 0 kept the {kept} half "
                f"(relative perimeters {per_pos:.6g} / {per_neg:.6g})")
    return ReflectionResult(frame.with_columns(mirrored), kept, vol_pos, vol_neg, per_pos, per_neg)


# ---------------------------------------------------------------------------
# Convergence to the centred ball
# ---------------------------------------------------------------------------

def radial_volume(radius: float, c: float, dimension: int) -> float:
    """Weighted volume of the centred ball of the given radius under exp(c|x|^2)."""
    if radius <= 0.0:
        return 0.0
    if dimension == 2:
        return math.pi * radius * radius if c == 0.0 else math.pi * math.expm1(c * radius * radius) / c
    return 4.0 * math.pi * adaptive_simpson(lambda s: math.exp(c * s * s) * s * s, 0.0, radius)


def equal_volume_radius(volume: float, c: float, dimension: int) -> float:
    if volume <= 0.0:
        return 0.0
    hi = 1.0
    for _ in range(60):
        if radial_volume(hi, c, dimension) >= volume:
            break
        hi *= 2.0
    else:
        raise InputError(f"No centred ball has weighted volume {volume}")
    return bisect(lambda r: radial_volume(r, c, dimension) - volume, 0.0, hi, tol=1e-13)


def distance_to_ball(cset: ColumnarSet) -> Tuple[float, float]:
    """(radius, symmetric difference) against the centred ball of equal weighted volume."""
    radius = equal_volume_radius(weighted_volume_columnar(cset), cset.c, cset.dimension)
    if radius == 0.0:
        return 0.0, 0.0
    target = ball(np.zeros(cset.dimension), radius, cset.h, cset.c, cset.dimension, **cset.frame)
    return radius, symmetric_difference(cset, target)


@dataclass(frozen=True)
class SymmetrizationStep:
    step: int
    direction: str
    volume_before: float
    volume_after: float
    perimeter_before: float
    perimeter_after: float
    allowance: float
    symmetric_difference_to_ball: float


LOG_COLUMNS = ["step", "direction", "volume_before", "volume_after", "perimeter_before",
               "perimeter_after", "allowance", "symmetric_difference_to_ball"]


@dataclass(frozen=True)
class ConvergenceRun:
    final: ColumnarSet
    log: Tuple[SymmetrizationStep, ...]
    converged: bool
    ball_radius: float
    symmetric_difference_to_ball: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(step) for step in self.log], columns=LOG_COLUMNS)

    def to_dict(self) -> dict:
        return {"converged": self.converged, "steps": len(self.log), "ball_radius": self.ball_radius,
                "symmetric_difference_to_ball": self.symmetric_difference_to_ball}


def symmetrization_directions(dimension: int, rotations: bool = True) -> Iterator[dict]:
    """
    Coordinate axes first. Planar runs then turn by pi * frac(j * WEYL) at their j-th rotation:
    the turns k * step are then equidistributed mod pi for every boundary mode k.
    """
    if dimension == 3:
        while True:
            for axis in (2, 0, 1):
                yield {"axis": axis}
    yield {"angle": VERTICAL}
    yield {"angle": HORIZONTAL}
    angle = HORIZONTAL
    j = 1
    while True:
        if rotations:
            angle = _normalize_angle(angle + math.pi * math.fmod(j * WEYL, 1.0))
            yield {"angle": angle}
        else:
            yield {"angle": VERTICAL if j % 2 == 1 else HORIZONTAL}
        j += 1


def _direction_label(direction: dict) -> str:
    if "axis" in direction:
        return f"axis {direction['axis']}"
    return f"{math.degrees(direction['angle']):.6f} deg"


def converge_to_ball(cset: ColumnarSet, max_steps: int = 64, tol: Optional[float] = None,
                     rotations: bool = True) -> ConvergenceRun:
    """
    Repeated Steiner symmetrization until `dimension + 1` consecutive steps move the set by at
    most tol (weighted symmetric difference, default h/4), or max_steps is reached. Each step
    is logged with its volume and perimeter bookkeeping and the distance to the centred ball
    of the current weighted volume. Non-convergence is reported, not raised.
    """
    if cset.is_empty():
        raise InputError("Cannot symmetrize an empty set")
    tol = cset.h / 4.0 if tol is None else tol
    radius, distance = distance_to_ball(cset)
    if distance <= tol:
        logger.info("Set already coincides with the centred ball; nothing to do")
        return ConvergenceRun(cset, (), True, radius, distance)

    current = cset
    log: List[SymmetrizationStep] = []
    quiet = 0
    converged = False
    directions = symmetrization_directions(cset.dimension, rotations)
    for step in range(1, max_steps + 1):
        direction = next(directions)
        frame = rebase(current, **direction)
        after = _symmetrize_columns(frame)
        moved = symmetric_difference(frame, after)
        radius, distance = distance_to_ball(after)
        per_before, caps_before = _perimeter_and_caps(frame)
        per_after, caps_after = _perimeter_and_caps(after)
        log.append(SymmetrizationStep(
            step, _direction_label(direction),
            weighted_volume_columnar(frame), weighted_volume_columnar(after),
            per_before, per_after, _allowance(frame, after, caps_before + caps_after), distance))
        logger.info(f"Step {step} ({_direction_label(direction)}): moved {moved:.3e}, "
                    f"distance to ball {distance:.3e}")
        current = after
        quiet = quiet + 1 if moved <= tol else 0
        if quiet >= cset.dimension + 1:
            converged = True
            break
    if not converged:
        logger.warning(f"Symmetrization did not settle within {max_steps} steps")
    return ConvergenceRun(current, tuple(log), converged, radius, distance)


# ---------------------------------------------------------------------------
# Convexity inequality and per-column integrands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexityCheck:
    lhs: float
    rhs: float
    equality_case: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "equality_case": self.equality_case}


def convexity_inequality(alphas: Sequence[float], slopes: Sequence[float], alpha: float, a: float,
                         tol: float = 1e-12) -> ConvexityCheck:
    """
    sum_j alpha_j sqrt(1 + a_j^2) >= 2 alpha sqrt(1 + a^2) whenever sum alpha_j a_j >= 2 alpha a
    and sum alpha_j >= 2 alpha; equality iff every a_j = a and sum alpha_j = 2 alpha.
    """
    alphas_arr = np.asarray(alphas, dtype=float)
    slopes_arr = np.asarray(slopes, dtype=float)
    if alphas_arr.shape != slopes_arr.shape or alphas_arr.ndim != 1 or alphas_arr.size == 0:
        raise InputError("alphas and slopes must be non-empty lists of the same length")
    if np.any(alphas_arr < 0.0) or np.any(slopes_arr < 0.0) or alpha < 0.0 or a < 0.0:
        raise InputError("Weights and slopes must be nonnegative")
    total = float(alphas_arr.sum())
    moment = float(alphas_arr @ slopes_arr)
    scale = tol * max(1.0, total, moment)
    if moment < 2.0 * alpha * a - scale or total < 2.0 * alpha - scale:
        raise InputError("Preconditions sum alpha_j a_j >= 2 alpha a and sum alpha_j >= 2 alpha fail")
    lhs = float(alphas_arr @ np.sqrt(1.0 + slopes_arr ** 2))
    rhs = 2.0 * alpha * math.sqrt(1.0 + a * a)
    equality = bool(np.all(np.abs(slopes_arr - a) <= tol * max(1.0, a)) and abs(total - 2.0 * alpha) <= scale)
    return ConvexityCheck(lhs, rhs, equality)


def column_integrands(before: ColumnarSet, after: ColumnarSet, key: Key) -> Optional[Tuple[float, float]]:
    """
    Pointwise form of the symmetrization inequality at a planar column: sum over the endpoints
    h_j of f(p, h_j) sqrt(1 + h_j'^2) before, and 2 f(p, a) sqrt(1 + a'^2) after, with
    central-difference slopes. None where either set is not a graph over the neighbours.
    """
    after = rebase(after, **before.frame)
    (i,) = key
    p = float(before.base_point(key)[0])
    c, h = before.c, before.h

    def graph_sum(cset: ColumnarSet) -> Optional[Tuple[float, int]]:
        col = cset.columns.get((i,), Region1D()).intervals
        left = cset.columns.get((i - 1,), Region1D()).intervals
        right = cset.columns.get((i + 1,), Region1D()).intervals
        if not col or len(left) != len(col) or len(right) != len(col):
            return None
        total = 0.0
        for idx, pair in enumerate(col):
            for end in (0, 1):
                slope = (right[idx][end] - left[idx][end]) / (2.0 * h)
                total += math.exp(c * (p * p + pair[end] ** 2)) * math.sqrt(1.0 + slope * slope)
        return total, len(col)

    lhs = graph_sum(before)
    rhs = graph_sum(after)
    if lhs is None or rhs is None or rhs[1] != 1:
        return None
    return lhs[0], rhs[0]
