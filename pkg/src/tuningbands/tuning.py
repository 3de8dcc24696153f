"""Tuning curves and their confidence bands.

The best score after k rounds of random search has CDF F(y)^k, so CDF bands
raised to the k-th power bound that distribution; its median or mean then
bounds the tuning curve. Upper CDF bands give lower curve bands and vice
versa.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .cdfbands import BandMethod, CdfBands, Sample, StepCdf, ecdf
from .errors import ExtrapolationWarning, VacuousBandWarning

DEFAULT_NONTRIVIAL_FRACTION = 0.05


@dataclass(frozen=True)
class SupportBounds:
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or not lo < hi:
            raise ValueError(f"support needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, values) -> bool:
        values = np.asarray(values)
        return bool(np.all((values >= self.lo) & (values <= self.hi)))


@dataclass(frozen=True, eq=False)
class KGrid:
    """Budgets in cost units. ``cost_multiplier`` is the cost of one search
    iteration, so the iteration counts are ``budgets / cost_multiplier``."""

    budgets: np.ndarray
    cost_multiplier: float = 1.0

    def __post_init__(self):
        budgets = np.array(self.budgets, dtype=np.float64).ravel()
        if budgets.size == 0:
            raise ValueError("a grid needs at least one budget")
        if not np.all(np.isfinite(budgets)) or np.any(budgets <= 0):
            raise ValueError("budgets must be positive and finite")
        if np.any(np.diff(budgets) <= 0):
            raise ValueError("budgets must be strictly ascending")
        if not (self.cost_multiplier > 0 and math.isfinite(self.cost_multiplier)):
            raise ValueError("cost multiplier must be positive")
        budgets.setflags(write=False)
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "cost_multiplier", float(self.cost_multiplier))

    @classmethod
    def integers(cls, k_max: int) -> "KGrid":
        return cls(np.arange(1, int(k_max) + 1, dtype=np.float64))

    @property
    def iterations(self) -> np.ndarray:
        return self.budgets / self.cost_multiplier

    def __len__(self):
        return self.budgets.size

    def __eq__(self, other):
        return (
            isinstance(other, KGrid)
            and self.cost_multiplier == other.cost_multiplier
            and np.array_equal(self.budgets, other.budgets)
        )


def scale_cost(grid: KGrid, multiplier: float) -> KGrid:
    """Re-express a grid in cost units where one iteration costs ``multiplier``."""
    if not multiplier > 0:
        raise ValueError(f"cost multiplier must be positive, got {multiplier}")
    return KGrid(grid.budgets * multiplier, grid.cost_multiplier * multiplier)


class CurveKind(enum.Enum):
    MEDIAN = "median"
    MEAN = "mean"


@dataclass(frozen=True, eq=False)
class CurveBandSet:
    kind: CurveKind
    confidence: float
    grid: KGrid
    lower: np.ndarray
    point: np.ndarray
    upper: np.ndarray
    method: Optional[BandMethod] = None
    support: SupportBounds = field(default_factory=SupportBounds)

    def __post_init__(self):
        for name in ("lower", "point", "upper"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != self.grid.budgets.shape:
                raise ValueError(f"{name} must have one value per budget")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> np.ndarray:
        return self.grid.iterations


def _check_k(k) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if np.any(~(k > 0)) or np.any(~np.isfinite(k)):
        raise ValueError(f"k must be positive and finite, got {k}")
    return k


def power_transform(cdf: StepCdf, k: float) -> StepCdf:
    """CDF of the max of k draws, given the CDF of one draw."""
    k = float(_check_k(k))
    return cdf.map_values(lambda v: np.power(v, k))


def _median_curve(cdf: StepCdf, ks: np.ndarray, support: SupportBounds) -> np.ndarray:
    # candidates are the support's lower bound (carrying the value before the
    # first knot) followed by the knots; past all of them the median is the
    # upper bound
    locs = np.concatenate([[support.lo], cdf.knots, [support.hi]])
    vals = np.concatenate([[cdf.value_before_first], cdf.values, [1.0]])
    hits = np.power(vals[None, :], ks[:, None]) >= 0.5
    hits[:, -1] = True
    return locs[hits.argmax(axis=1)]


def median_of_powered_cdf(
    cdf: StepCdf, k: float, support: Optional[SupportBounds] = None
) -> float:
    """Smallest location whose powered CDF value reaches one half.

    Returns ``support.hi`` (default +inf) when no knot qualifies and
    ``support.lo`` (default -inf) when the CDF already exceeds one half to
    the left of the first knot.
    """
    ks = _check_k(np.atleast_1d(k))
    return float(_median_curve(cdf, ks, support or SupportBounds())[0])


def _mean_curve(cdf: StepCdf, ks: np.ndarray, support: SupportBounds) -> np.ndarray:
    locs = np.concatenate([[support.lo], cdf.knots, [support.hi]])
    vals = np.concatenate([[cdf.value_before_first], cdf.values, [1.0]])
    powered = np.power(vals[None, :], ks[:, None])
    mass = np.diff(powered, axis=1, prepend=0.0)
    mass = np.clip(mass, 0.0, None)
    finite = np.isfinite(locs)
    out = (mass[:, finite] * locs[finite]).sum(axis=1)
    low_inf = (mass[:, 0] > 0) & (locs[0] == -np.inf)
    high_inf = (mass[:, -1] > 0) & (locs[-1] == np.inf)
    out = np.where(low_inf, -np.inf, out)
    out = np.where(high_inf, np.inf, out)
    return np.where(low_inf & high_inf, np.nan, out)


def mean_of_powered_cdf(
    cdf: StepCdf, k: float, support: Optional[SupportBounds] = None
) -> float:
    """Mean of the distribution with CDF ``cdf^k``, leftover mass at the bounds.

    Mass below the first knot sits on ``support.lo``; mass the CDF never
    reaches sits on ``support.hi``. Infinite bounds holding mass make the
    mean infinite (NaN when both do).
    """
    ks = _check_k(np.atleast_1d(k))
    return float(_mean_curve(cdf, ks, support or SupportBounds())[0])


def _warn_extrapolation(grid: KGrid, n: int) -> None:
    if grid.iterations.max() > n:
        warnings.warn(
            f"budgets reach k={grid.iterations.max():g} beyond the sample size n={n}",
            ExtrapolationWarning,
            stacklevel=3,
        )


def median_curve_bands(
    bands: CdfBands, grid: KGrid, support: Optional[SupportBounds] = None
) -> CurveBandSet:
    support = support or SupportBounds()
    ks = grid.iterations
    point = ecdf(bands.sample)
    return CurveBandSet(
        CurveKind.MEDIAN,
        bands.confidence,
        grid,
        lower=_median_curve(bands.upper, ks, support),
        point=_median_curve(point, ks, support),
        upper=_median_curve(bands.lower, ks, support),
        method=bands.method,
        support=support,
    )


def mean_curve_bands(bands: CdfBands, grid: KGrid, support: SupportBounds) -> CurveBandSet:
    if not support.finite:
        warnings.warn(
            "support is unbounded on at least one side; that side of the mean band is vacuous",
            VacuousBandWarning,
            stacklevel=2,
        )
    ks = grid.iterations
    return CurveBandSet(
        CurveKind.MEAN,
        bands.confidence,
        grid,
        lower=_mean_curve(bands.upper, ks, support),
        point=_v_statistic(bands.sample.scores, ks),
        upper=_mean_curve(bands.lower, ks, support),
        method=bands.method,
        support=support,
    )


def curve_bands(
    bands: CdfBands, grid: KGrid, kind: CurveKind, support: Optional[SupportBounds] = None
) -> CurveBandSet:
    if CurveKind(kind) is CurveKind.MEDIAN:
        return median_curve_bands(bands, grid, support)
    return mean_curve_bands(bands, grid, support or SupportBounds())


def v_statistic_weights(n: int, ks) -> np.ndarray:
    """Row j holds the weights on Y_(1..n) for the V-statistic at ks[j]."""
    ks = np.atleast_1d(np.asarray(ks, dtype=np.float64))
    frac = np.arange(0, n + 1) / n
    return np.diff(np.power(frac[None, :], ks[:, None]), axis=1)


def _v_statistic(scores: np.ndarray, ks: np.ndarray) -> np.ndarray:
    return v_statistic_weights(scores.size, ks) @ scores


def u_statistic_weights(n: int, ks: Sequence[int]) -> np.ndarray:
    """Row j holds C(i-1, k-1) / C(n, k) on Y_(i) for k = ks[j]."""
    rows = []
    for k in ks:
        k = _check_u_order(k, n)
        total = math.comb(n, k)
        rows.append([math.comb(i - 1, k - 1) / total for i in range(1, n + 1)])
    return np.array(rows, dtype=np.float64)


def _check_u_order(k, n: int) -> int:
    if float(k) != int(k) or not 1 <= int(k) <= n:
        raise ValueError(f"U-statistic needs an integer 1 <= k <= n={n}, got {k}")
    return int(k)


def point_estimate_mean_v(sample: Sample, k: float) -> float:
    """Plug-in estimate of the expected best score after k rounds."""
    return float(_v_statistic(sample.scores, _check_k(np.atleast_1d(k)))[0])


def point_estimate_mean_u(sample: Sample, k: int) -> float:
    """Unbiased estimate: the average max over all size-k subsets."""
    return float(u_statistic_weights(sample.n, [k])[0] @ sample.scores)


def point_estimate_median(sample: Sample, k: float) -> float:
    return median_of_powered_cdf(ecdf(sample), k)


def upper_trivial_budget(bands: CdfBands) -> float:
    """Largest k at which the median curve's upper band is still finite.

    Past this budget the lower CDF band's top value, raised to k, drops
    below one half. Returns +inf if the lower band reaches 1.
    """
    top = float(bands.lower.values[-1])
    if top >= 1.0:
        return math.inf
    if top <= 0.0:
        return 0.0
    return math.log(0.5) / math.log(top)


class Grade(enum.Enum):
    NONE = "none"
    WEAK_A = "weak-a"
    WEAK_B = "weak-b"
    FAIR = "fair"
    STRONG_A = "strong-a"
    STRONG_B = "strong-b"

    @property
    def level(self) -> int:
        return {"none": 0, "weak": 1, "fair": 2, "strong": 3}[self.value.split("-")[0]]


@dataclass(frozen=True)
class ComparisonReport:
    grades: tuple
    overall: Grade
    # "a", "b" or None: which model the overall grade favors
    favors: Optional[str]
    fractions: Dict[Grade, float]
    nontrivial_fraction: float


def _grade_one(a_lo, a_pt, a_hi, b_lo, b_pt, b_hi):
    """Return (grade, direction) for one budget."""
    if any(math.isnan(v) for v in (a_lo, a_pt, a_hi, b_lo, b_pt, b_hi)):
        return Grade.NONE, None
    if a_lo > b_hi:
        return Grade.STRONG_A, "a"
    if b_lo > a_hi:
        return Grade.STRONG_B, "b"
    a_excludes = not a_lo <= b_pt <= a_hi
    b_excludes = not b_lo <= a_pt <= b_hi
    if a_excludes and b_excludes:
        return Grade.FAIR, ("a" if a_pt > b_pt else "b" if b_pt > a_pt else None)
    if a_excludes:
        return (Grade.WEAK_A, "a") if b_pt < a_lo else (Grade.WEAK_B, "b")
    if b_excludes:
        return (Grade.WEAK_A, "a") if a_pt > b_hi else (Grade.WEAK_B, "b")
    return Grade.NONE, None


def grade_budgets(a: CurveBandSet, b: CurveBandSet):
    return [
        _grade_one(*vals)
        for vals in zip(a.lower, a.point, a.upper, b.lower, b.point, b.upper)
    ]


def compare_curves(
    a: CurveBandSet, b: CurveBandSet, nontrivial_fraction: float = DEFAULT_NONTRIVIAL_FRACTION
) -> ComparisonReport:
    """Grade the evidence that one model's tuning curve beats the other's.

    Per budget: weak when one band excludes the other's point estimate, fair
    when each does, strong when the bands do not overlap. The overall grade
    is the strongest level held, in one direction, on at least
    ``nontrivial_fraction`` of the budgets.
    """
    if not np.array_equal(a.grid.budgets, b.grid.budgets):
        raise ValueError("curves must be evaluated on the same budgets")
    if a.kind is not b.kind:
        raise ValueError(f"cannot compare a {a.kind.value} curve with a {b.kind.value} curve")
    if a.confidence != b.confidence:
        raise ValueError("curves must share a confidence level")
    if not 0.0 < nontrivial_fraction <= 1.0:
        raise ValueError("nontrivial_fraction must lie in (0, 1]")
    graded = grade_budgets(a, b)
    grades = tuple(g for g, _ in graded)
    total = len(graded)
    fractions = {g: sum(1 for x in grades if x is g) / total for g in Grade}
    overall, favors = Grade.NONE, None
    for level in (3, 2, 1):
        share = {
            side: sum(1 for g, d in graded if g.level >= level and d == side) / total
            for side in ("a", "b")
        }
        side = max(share, key=share.get)
        if share[side] > 0 and share[side] >= nontrivial_fraction:
            favors = side
            if level == 3:
                overall = Grade.STRONG_A if side == "a" else Grade.STRONG_B
            elif level == 2:
                overall = Grade.FAIR
            else:
                overall = Grade.WEAK_A if side == "a" else Grade.WEAK_B
            break
    return ComparisonReport(grades, overall, favors, fractions, nontrivial_fraction)
