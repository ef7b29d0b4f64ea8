"""
Scalar numerical toolkit: adaptive Simpson quadrature (finite and improper),
bisection and golden-section search.
"""
import logging
import math
from typing import Callable, Tuple

from src.errors import ConvergenceError

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# the improper substitution samples u = TAIL_EPS instead of u = 0
TAIL_EPS = 1e-12


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     abs_tol: float = 1e-12, rel_tol: float = 1e-13,
                     max_depth: int = 60) -> float:
    """
    Integrate f over the finite interval [a, b].

    Args:
        f: integrand, evaluated at interval ends and midpoints only
        a, b: finite limits (a <= b)
        abs_tol, rel_tol: target error is max(abs_tol, rel_tol * |integral|)
        max_depth: bisection depth after which an unconverged leaf is a failure

    Returns:
        The integral, or +inf when the integrand is infinite somewhere on the samples.

    Raises:
        ConvergenceError: a leaf failed to meet its tolerance at max_depth
    """
    if b <= a:
        return 0.0

    # coarse composite estimate fixes the relative target
    n = 8
    step = (b - a) / n
    samples = [f(a + i * step) for i in range(n + 1)]
    if not all(math.isfinite(v) for v in samples):
        return math.inf
    coarse = step / 3.0 * (samples[0] + samples[-1]
                           + 4.0 * sum(samples[1:-1:2]) + 2.0 * sum(samples[2:-1:2]))
    target = max(abs_tol, rel_tol * abs(coarse))

    total = 0.0
    unresolved = 0.0
    leaf_tol = target / n
    stack = []
    for i in range(0, n, 2):
        lo, hi = a + i * step, a + (i + 2) * step
        fl, fm, fh = samples[i], samples[i + 1], samples[i + 2]
        whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh)
        stack.append((lo, hi, fl, fm, fh, whole, 2.0 * leaf_tol, 0))

    while stack:
        lo, hi, fl, fm, fh, whole, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        if not (math.isfinite(flm) and math.isfinite(frm)):
            return math.inf
        left = (mid - lo) / 6.0 * (fl + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fh)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or mid <= lo or mid >= hi:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            unresolved += abs(delta)
            total += left + right + delta / 15.0
            continue
        stack.append((lo, mid, fl, flm, fm, left, 0.5 * tol, depth + 1))
        stack.append((mid, hi, fm, frm, fh, right, 0.5 * tol, depth + 1))

    if unresolved > 1e3 * target:
        logger.error(f"Simpson quadrature on [{a}, {b}] did not converge")
        raise ConvergenceError(f"Quadrature on [{a!r}, {b!r}] exceeded max depth {max_depth}",
                               achieved=unresolved)
    return total


def tail_integral(psi: Callable[[float], float], start: float, direction: int,
                  abs_tol: float = 1e-12, rel_tol: float = 1e-13) -> float:
    """
    Integrate e^psi from start to +inf (direction=+1) or from -inf to start (direction=-1).

    Uses x = start + direction * (1/u - 1), u in (0, 1], evaluating e^(psi(x) - 2 log u) so
    large psi values do not overflow before the Jacobian is applied. The u = 0 end takes the
    value at u = TAIL_EPS.
    """
    def integrand(u: float) -> float:
        u = max(u, TAIL_EPS)
        x = start + direction * (1.0 / u - 1.0)
        exponent = psi(x) - 2.0 * math.log(u)
        if exponent > 709.0:
            return math.inf
        return math.exp(exponent)

    return adaptive_simpson(integrand, 0.0, 1.0, abs_tol=abs_tol, rel_tol=rel_tol)


def bisect(f: Callable[[float], float], lo: float, hi: float,
           tol: float = 1e-12, max_iter: int = 200) -> float:
    """
    Root of f on [lo, hi] by bisection; f(lo) and f(hi) must not share a sign.

    Raises:
        ConvergenceError: no sign change on the bracket
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ConvergenceError(f"Bisection bracket [{lo!r}, {hi!r}] has no sign change")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid <= lo or mid >= hi:
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-12, max_iter: int = 300) -> Tuple[float, float]:
    """Minimise a unimodal f on [lo, hi]. Returns (x, f(x)) for the best point of the final bracket."""
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(hi - lo) <= tol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    best = min(((x, f(x)), (c, fc), (d, fd)), key=lambda pair: pair[1])
    return best
