"""Beta distribution special functions, Beta intervals, and bisection.

The incomplete beta function and quantile come from the kernel backend
(continued fraction, then bisection on the CDF). Interval construction here
follows the equal-density root-finding recipe directly and is deliberately
independent of the kernel's fused interval routine, so one can check the
other.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from ._backend import ET, HD, kernels
from .errors import ConvergenceError, UnsupportedShapeError

BISECT_TOL = 1e-9
BISECT_MAXITER = 200
# endpoint searches inside interval routines run until the bracket can no
# longer be halved in floating point; endpoints pinned within 1e-11 of 0 or 1
# need that relative precision, and 1100 halvings always exhaust a double
INTERVAL_TOL = 0.0
INTERVAL_MAXITER = 1100


class IntervalKind(enum.Enum):
    EQUAL_TAILED = "et"
    HIGHEST_DENSITY = "hd"

    @property
    def code(self) -> int:
        return ET if self is IntervalKind.EQUAL_TAILED else HD


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0) or math.isinf(self.a) or math.isinf(self.b):
            raise ValueError(f"Beta shapes must be positive and finite, got a={self.a}, b={self.b}")

    @property
    def mode(self) -> float:
        """Mode for a, b >= 1 (not both 1)."""
        return (self.a - 1.0) / (self.a + self.b - 2.0)

    @property
    def log_beta(self) -> float:
        return math.lgamma(self.a) + math.lgamma(self.b) - math.lgamma(self.a + self.b)


@dataclass(frozen=True)
class ProbabilityInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"need 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _check_unit(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def _check_coverage(coverage: float) -> None:
    if not 0.0 <= coverage < 1.0:
        raise ValueError(f"coverage must lie in [0, 1), got {coverage}")


def beta_cdf(p: BetaParams, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    _check_unit("x", x)
    value = kernels.betainc_scalar(p.a, p.b, x)
    if math.isnan(value):
        raise ConvergenceError(f"incomplete beta did not converge for {p} at x={x}")
    return value


def beta_pdf(p: BetaParams, x: float) -> float:
    _check_unit("x", x)
    return math.exp(_log_density(p, x))


def _log_density(p: BetaParams, x: float) -> float:
    def term(shape, v):
        if shape == 1.0:
            return 0.0
        return (shape - 1.0) * math.log(v) if v > 0.0 else (-math.inf if shape > 1.0 else math.inf)

    return term(p.a, x) + term(p.b, 1.0 - x) - p.log_beta


def beta_quantile(p: BetaParams, q: float) -> float:
    _check_unit("q", q)
    return kernels.ppf_scalar(p.a, p.b, q)


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = BISECT_TOL,
    maxiter: int = BISECT_MAXITER,
) -> float:
    """Find a root of ``f`` on a sign-changing bracket ``[lo, hi]``.

    Stops once the bracket is narrower than ``tol`` or ``f`` hits zero
    exactly. Infinite function values are fine; NaN is not.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.isnan(flo) or math.isnan(fhi) or (flo > 0) == (fhi > 0):
        raise ValueError(f"bracket [{lo}, {hi}] does not change sign: f = ({flo}, {fhi})")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid <= lo or mid >= hi:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if math.isnan(fmid):
            raise ConvergenceError(f"f returned NaN at {mid}")
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not reach tol={tol} in {maxiter} iterations")


def equal_tailed_interval(p: BetaParams, coverage: float) -> ProbabilityInterval:
    _check_coverage(coverage)
    lo = beta_quantile(p, 0.5 * (1.0 - coverage))
    hi = beta_quantile(p, 0.5 * (1.0 + coverage))
    return ProbabilityInterval(lo, max(lo, hi))


def _shape_class(p: BetaParams) -> str:
    if p.a < 1.0 or p.b < 1.0:
        raise UnsupportedShapeError(
            f"highest density intervals need a >= 1 and b >= 1, got a={p.a}, b={p.b}"
        )
    if p.a == 1.0 and p.b == 1.0:
        return "flat"
    if p.a == 1.0:
        return "decreasing"
    # a shape a hair above 1 can round the mode onto the boundary
    if p.b == 1.0 or p.mode >= 1.0:
        return "increasing"
    if p.mode <= 0.0:
        return "decreasing"
    return "unimodal"


def highest_density_interval(p: BetaParams, coverage: float) -> ProbabilityInterval:
    """Shortest interval holding ``coverage`` of the Beta mass.

    Beta(1, 1) has no unique answer; the equal-tailed interval is returned,
    which is one of the (equally short) solutions.
    """
    _check_coverage(coverage)
    shape = _shape_class(p)
    if shape == "flat":
        return equal_tailed_interval(p, coverage)
    if shape == "decreasing":
        return ProbabilityInterval(0.0, beta_quantile(p, coverage))
    if shape == "increasing":
        return ProbabilityInterval(beta_quantile(p, 1.0 - coverage), 1.0)
    mode = p.mode
    if coverage == 0.0:
        return ProbabilityInterval(mode, mode)

    def upper_end(lower):
        return beta_quantile(p, min(beta_cdf(p, lower) + coverage, 1.0))

    def density_gap(lower):
        return _log_density(p, lower) - _log_density(p, upper_end(lower))

    bracket_lo = beta_quantile(p, max(beta_cdf(p, mode) - coverage, 0.0))
    bracket_hi = min(mode, beta_quantile(p, 1.0 - coverage))
    # a shape parameter barely above 1 puts the equal-density point closer to
    # the boundary than a double can resolve; the bracket end is then the answer
    if density_gap(bracket_hi) <= 0.0:
        lower = bracket_hi
    elif density_gap(bracket_lo) >= 0.0:
        lower = bracket_lo
    else:
        lower = bisect(density_gap, bracket_lo, bracket_hi, INTERVAL_TOL, INTERVAL_MAXITER)
    return ProbabilityInterval(lower, max(lower, upper_end(lower)))


def smallest_interval_coverage(p: BetaParams, x: float, kind: IntervalKind) -> float:
    """Mass of the smallest interval of ``kind`` that contains ``x``."""
    _check_unit("x", x)
    if kind is IntervalKind.EQUAL_TAILED:
        return 2.0 * abs(0.5 - beta_cdf(p, x))
    shape = _shape_class(p)
    if shape == "flat":
        return 2.0 * abs(0.5 - beta_cdf(p, x))
    if shape == "decreasing":
        return beta_cdf(p, x)
    if shape == "increasing":
        return 1.0 - beta_cdf(p, x)
    mode = p.mode
    if x == mode:
        return 0.0
    if x <= 0.0 or x >= 1.0:
        return 1.0
    target = _log_density(p, x)

    def gap(y):
        return _log_density(p, y) - target

    if gap(mode) <= 0.0:
        # x sits at the mode to within rounding
        return 0.0
    if x < mode:
        other = bisect(gap, mode, 1.0, INTERVAL_TOL, INTERVAL_MAXITER)
        mass = beta_cdf(p, other) - beta_cdf(p, x)
    else:
        other = bisect(gap, 0.0, mode, INTERVAL_TOL, INTERVAL_MAXITER)
        mass = beta_cdf(p, x) - beta_cdf(p, other)
    return min(max(mass, 0.0), 1.0)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))
