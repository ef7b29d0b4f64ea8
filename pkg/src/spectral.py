"""
Dirichlet eigenvalues of (Lu)(x) = Delta u - 2c <x, grad u> on rasterized domains.

Masks are read as unions of closed cells with nodes at the cell centres; the Dirichlet
condition sits on the cell edges (ghost value -u outside the mask). The "drift-minus" convention is
L itself, the "weighted-laplacian" convention flips the drift to
Delta + 2c <x, grad>. Under u = exp(+-c|x|^2/2) v both become -Delta + c^2|x|^2 -+ c d, which is
the symmetric form the eigen-solver iterates on.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from src.data_quality import parse_mask
from src.errors import ConvergenceError, InputError
from src.numerics import bisect
from src.symmetrize import line_primitive, radial_volume

logger = logging.getLogger(__name__)


class SignConvention(str, Enum):
    DRIFT_MINUS = "drift-minus"
    WEIGHTED_LAPLACIAN = "weighted-laplacian"

    @property
    def drift_sign(self) -> float:
        """sigma in -L = -Delta + sigma 2c <x, grad>."""
        return 1.0 if self == SignConvention.DRIFT_MINUS else -1.0


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Boolean occupancy on a uniform grid; mask[row, col] with row 0 at the lower y."""
    mask: np.ndarray
    h: float
    origin: Tuple[float, ...]

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim not in (1, 2):
            raise InputError("Grid domains are intervals or planar masks")
        if not mask.any():
            raise InputError("Grid domain mask is empty")
        if not self.h > 0.0:
            raise InputError("Grid spacing must be positive")
        object.__setattr__(self, "mask", mask)
        if mask.ndim == 2:
            _, count = ndimage.label(mask)
            if count > 1:
                logger.warning(f"Grid domain has {count} connected components")

    @property
    def dimension(self) -> int:
        return self.mask.ndim

    @property
    def phase(self) -> Tuple[float, ...]:
        """Offset of the cell edges from the h lattice through the origin, in [-h/2, h/2]."""
        return tuple(o - round(o / self.h) * self.h for o in self.origin)

    @property
    def window(self) -> Tuple[Tuple[float, float], ...]:
        # mask axes are (y, x) in the plane; windows are listed x first
        shape = self.mask.shape[::-1]
        return tuple((o, o + n * self.h) for o, n in zip(self.origin, shape))

    def centres(self) -> np.ndarray:
        """Cell centres of the mask, one row per unknown, coordinates (x) or (x, y)."""
        if self.dimension == 1:
            idx = np.flatnonzero(self.mask)
            return (self.origin[0] + (idx + 0.5) * self.h)[:, None]
        rows, cols = np.nonzero(self.mask)
        return np.stack([self.origin[0] + (cols + 0.5) * self.h,
                         self.origin[1] + (rows + 0.5) * self.h], axis=1)

    def boundary_cells(self) -> np.ndarray:
        """Mask cells with at least one axis neighbour outside the mask."""
        padded = np.pad(self.mask, 1, constant_values=False)
        interior = ndimage.binary_erosion(padded, structure=ndimage.generate_binary_structure(self.dimension, 1))
        inner = interior[tuple(slice(1, -1) for _ in range(self.dimension))]
        return self.mask & ~inner

    def weighted_volume(self, c: float) -> float:
        """Grid sum of h^d exp(c|x|^2) over the mask."""
        x = self.centres()
        return float(self.h ** self.dimension * np.sum(np.exp(c * np.sum(x * x, axis=1))))

    # constructors -------------------------------------------------------------

    @classmethod
    def interval(cls, a: float, b: float, h: float) -> "GridDomain":
        """(a, b) split into round((b - a)/h) equal cells (the spacing is adjusted to fit)."""
        if not b > a:
            raise InputError(f"Empty interval ({a}, {b})")
        n = max(1, int(round((b - a) / h)))
        return cls(np.ones(n, dtype=bool), (b - a) / n, (float(a),))

    @classmethod
    def from_indicator(cls, inside: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       window: Sequence[Sequence[float]], h: float) -> "GridDomain":
        """Rasterize a planar set: a cell is in when inside(x, y) holds at its centre."""
        (x0, x1), (y0, y1) = window
        nx, ny = int(round((x1 - x0) / h)), int(round((y1 - y0) / h))
        xs = x0 + (np.arange(nx) + 0.5) * h
        ys = y0 + (np.arange(ny) + 0.5) * h
        xx, yy = np.meshgrid(xs, ys)
        return cls(np.asarray(inside(xx, yy), dtype=bool), h, (float(x0), float(y0)))

    @classmethod
    def disk(cls, center: Sequence[float], radius: float, h: float,
             phase: Sequence[float] = (0.0, 0.0)) -> "GridDomain":
        cx, cy = center
        px, py = phase
        k = math.ceil(radius / h) + 2
        # window edges on the h lattice through `phase`
        x0 = (math.floor((cx - px) / h) - k) * h + px
        y0 = (math.floor((cy - py) / h) - k) * h + py
        span = (2 * k + 2) * h
        return cls.from_indicator(lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 < radius * radius,
                                  ((x0, x0 + span), (y0, y0 + span)), h)

    @classmethod
    def rectangle(cls, lo: Sequence[float], hi: Sequence[float], h: float) -> "GridDomain":
        (ax, ay), (bx, by) = lo, hi
        nx, ny = max(1, int(round((bx - ax) / h))), max(1, int(round((by - ay) / h)))
        return cls(np.ones((ny, nx), dtype=bool), h, (float(ax), float(ay)))

    @classmethod
    def from_mask(cls, payload: dict) -> "GridDomain":
        try:
            h, ((x0, _), (y0, _)), cells = parse_mask(payload)
        except ValueError as e:
            raise InputError(f"Malformed mask: {e}") from e
        return cls(cells, h, (x0, y0))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OperatorHandle:
    """-L with its drift (non-symmetric for c > 0) and its symmetric realization."""
    domain: GridDomain
    c: float
    convention: SignConvention
    matrix: sp.csr_matrix
    symmetric: sp.csc_matrix


def _neighbour_offsets(dimension: int):
    """(array offset, coordinate axis, direction) for every axis neighbour."""
    if dimension == 1:
        return [((1,), 0, 1.0), ((-1,), 0, -1.0)]
    # mask axes are (row=y, col=x)
    return [((0, 1), 0, 1.0), ((0, -1), 0, -1.0), ((1, 0), 1, 1.0), ((-1, 0), 1, -1.0)]


def assemble_operator(domain: GridDomain, c: float,
                      sign_convention: SignConvention = SignConvention.DRIFT_MINUS) -> OperatorHandle:
    """
    Second-order central differences for Delta and grad with ghost-cell Dirichlet rows.
    Refuses grids with 2 c max|x| h >= 2, where the drift would flip the stencil signs.
    """
    convention = SignConvention(sign_convention)
    if c < 0.0:
        raise InputError(f"c must be nonnegative, got {c}")
    h, d = domain.h, domain.dimension
    x = domain.centres()
    reach = float(np.max(np.abs(x)) + h) if d == 1 else float(np.max(np.linalg.norm(x, axis=1)) + h)
    if 2.0 * c * reach * h >= 2.0:
        required = 1.0 / (c * reach)
        logger.error(f"Stencil unstable: 2 c max|x| h = {2.0 * c * reach * h:.4g}")
        raise InputError(f"Grid too coarse for c = {c}: need h < {required:.6g}")

    n = x.shape[0]
    index = -np.ones(domain.mask.shape, dtype=int)
    index[domain.mask] = np.arange(n)
    cells = np.argwhere(domain.mask)
    sigma = convention.drift_sign
    inv_h2 = 1.0 / (h * h)

    diag_lap = np.full(n, 2.0 * d * inv_h2)
    diag_drift = np.zeros(n)
    rows, cols, lap_vals, drift_vals = [], [], [], []
    for offset, axis, direction in _neighbour_offsets(d):
        nb = cells + np.asarray(offset)
        in_bounds = np.all((nb >= 0) & (nb < np.asarray(domain.mask.shape)), axis=1)
        nb_index = np.full(n, -1)
        nb_index[in_bounds] = index[tuple(nb[in_bounds].T)]
        present = nb_index >= 0
        drift = sigma * c * x[:, axis] * direction / h
        rows.append(np.flatnonzero(present))
        cols.append(nb_index[present])
        lap_vals.append(np.full(present.sum(), -inv_h2))
        drift_vals.append(drift[present])
        # ghost value -u at a missing neighbour
        diag_lap[~present] += inv_h2
        diag_drift[~present] -= drift[~present]

    r = np.concatenate(rows + [np.arange(n)])
    cc = np.concatenate(cols + [np.arange(n)])
    lap = sp.csr_matrix((np.concatenate(lap_vals + [diag_lap]), (r, cc)), shape=(n, n))
    drift_m = sp.csr_matrix((np.concatenate(drift_vals + [diag_drift]), (r, cc)), shape=(n, n))
    potential = c * c * np.sum(x * x, axis=1) - sigma * c * d
    symmetric = (lap + sp.diags(potential)).tocsc()
    logger.info(f"Assembled -L ({convention.value}, c={c}) with {n} unknowns")
    return OperatorHandle(domain, c, convention, (lap + drift_m).tocsr(), symmetric)


# ---------------------------------------------------------------------------
# Eigen-solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    iterations: int
    residual: float
    h: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "iterations": self.iterations, "residual": self.residual,
                "h": self.h, "converged": self.converged}


def inverse_power_iteration(matrix: sp.spmatrix, tol: float = 1e-8, max_iter: int = 500) -> EigenResult:
    """Smallest eigenvalue of a symmetric positive definite matrix; all-ones start vector."""
    lu = spla.splu(sp.csc_matrix(matrix))
    v = np.ones(matrix.shape[0])
    v /= np.linalg.norm(v)
    lam, residual = math.nan, math.inf
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        v = w / np.linalg.norm(w)
        av = matrix @ v
        lam = float(v @ av)
        residual = float(np.linalg.norm(av - lam * v))
        if residual <= tol:
            return EigenResult(lam, it, residual, math.nan, True)
    logger.warning(f"Inverse power iteration stopped at residual {residual:.3e} after {max_iter} iterations")
    return EigenResult(lam, max_iter, residual, math.nan, False)


def lambda1(domain: GridDomain, c: float, sign_convention: SignConvention = SignConvention.DRIFT_MINUS,
            tol: float = 1e-8, max_iter: int = 500) -> EigenResult:
    """Lowest Dirichlet eigenvalue of -L; non-convergence is reported through `converged`."""
    handle = assemble_operator(domain, c, sign_convention)
    result = inverse_power_iteration(handle.symmetric, tol, max_iter)
    if result.lambda1 <= 0.0:
        raise ConvergenceError(f"Non-positive lowest eigenvalue {result.lambda1}", achieved=result.residual)
    return EigenResult(result.lambda1, result.iterations, result.residual, domain.h, result.converged)


# ---------------------------------------------------------------------------
# Faber-Krahn comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaberKrahnResult:
    lambda1_domain: float
    lambda1_ball: float
    ball_radius: float
    weighted_volume: float
    holds: bool
    equality: bool
    convention: SignConvention

    @property
    def margin(self) -> float:
        return self.lambda1_domain - self.lambda1_ball

    def to_dict(self) -> dict:
        return {"lambda1_domain": self.lambda1_domain, "lambda1_ball": self.lambda1_ball,
                "ball_radius": self.ball_radius, "weighted_volume": self.weighted_volume,
                "holds": self.holds, "equality": self.equality, "margin": self.margin,
                "sign_convention": self.convention.value}


def _ball_volume(radius: float, c: float, dimension: int) -> float:
    if dimension == 1:
        return 2.0 * float(line_primitive(radius, c))
    return radial_volume(radius, c, dimension)


def centred_ball_radius(volume: float, c: float, dimension: int) -> float:
    hi = 1.0
    while _ball_volume(hi, c, dimension) < volume:
        hi *= 2.0
        if hi > 1e6:
            raise InputError(f"No centred ball has weighted volume {volume}")
    return bisect(lambda r: _ball_volume(r, c, dimension) - volume, 0.0, hi, tol=1e-13)


def centred_ball_domain(radius: float, h: float, dimension: int,
                        phase: Sequence[float] = (0.0, 0.0)) -> GridDomain:
    """Rasterized centred ball; planar balls share the cell edges of `phase`."""
    if dimension == 1:
        return GridDomain.interval(-radius, radius, h)
    return GridDomain.disk((0.0, 0.0), radius, h, phase)


def _mask_difference(first: GridDomain, second: GridDomain, c: float) -> float:
    """Weighted measure of the cells in exactly one of two domains on the same lattice."""
    phase = np.asarray(first.phase)
    shift = (phase - np.asarray(second.phase)) / first.h
    if not math.isclose(first.h, second.h) or np.any(np.abs(shift - np.round(shift)) > 1e-6):
        raise InputError("Masks on different lattices cannot be compared cell by cell")

    def cells(domain: GridDomain) -> set:
        keys = np.round((domain.centres() - phase) / domain.h - 0.5).astype(int)
        return set(map(tuple, keys))

    diff = cells(first) ^ cells(second)
    if not diff:
        return 0.0
    x = phase + (np.array(sorted(diff), dtype=float) + 0.5) * first.h
    return float(first.h ** first.dimension * np.sum(np.exp(c * np.sum(x * x, axis=1))))


def faber_krahn_compare(domain: GridDomain, c: float,
                        sign_convention: SignConvention = SignConvention.DRIFT_MINUS,
                        rel_tol: float = 1e-2, tol: float = 1e-8, max_iter: int = 500) -> FaberKrahnResult:
    """
    lambda1(domain) >= lambda1(B), B the centred ball of the same weighted volume for
    exp(c|x|^2), both at the domain's spacing. Equality is flagged when the eigenvalues agree
    within rel_tol and the masks differ by less than rel_tol of the volume.
    """
    convention = SignConvention(sign_convention)
    volume = domain.weighted_volume(c)
    radius = centred_ball_radius(volume, c, domain.dimension)
    ball = centred_ball_domain(radius, domain.h, domain.dimension, domain.phase)
    lam_domain = lambda1(domain, c, convention, tol, max_iter)
    lam_ball = lambda1(ball, c, convention, tol, max_iter)
    for result in (lam_domain, lam_ball):
        if not result.converged:
            raise ConvergenceError("Eigen-solve did not converge", achieved=result.residual)
    holds = lam_domain.lambda1 >= lam_ball.lambda1 * (1.0 - rel_tol)
    close = abs(lam_domain.lambda1 - lam_ball.lambda1) <= rel_tol * lam_ball.lambda1
    same_shape = domain.dimension == 2 and _mask_difference(domain, ball, c) <= rel_tol * volume
    if domain.dimension == 1:
        (a, b), = domain.window
        same_shape = abs(a + b) <= rel_tol * (b - a) and bool(domain.mask.all())
    logger.info(f"Faber-Krahn ({convention.value}, c={c}): lambda1 {lam_domain.lambda1:.6g} "
                f"vs ball {lam_ball.lambda1:.6g} (R = {radius:.6g})")
    return FaberKrahnResult(lam_domain.lambda1, lam_ball.lambda1, radius, volume, holds,
                            close and same_shape, convention)


def convention_gap(domain: GridDomain, c: float, tol: float = 1e-8) -> float:
    """lambda1(weighted-laplacian) - lambda1(drift-minus); equals 2 c d for the symmetric realizations."""
    weighted = lambda1(domain, c, SignConvention.WEIGHTED_LAPLACIAN, tol)
    minus = lambda1(domain, c, SignConvention.DRIFT_MINUS, tol)
    return weighted.lambda1 - minus.lambda1
