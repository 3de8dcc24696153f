"""Empirical CDFs and simultaneous confidence bands for them.

Three constructions are provided: DKW (closed form), KS (Monte Carlo
critical value) and LD (per-order-statistic Beta intervals calibrated by
simulating the L_n statistic). All bands are right-continuous step functions
that only change at the sample's distinct scores.
"""
from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _random
from ._backend import kernels
from .errors import EmptySampleError, TiesWarning
from .numerics import IntervalKind

DEFAULT_REPLICATES = 100_000
MIN_REPLICATES = 1000


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Sample:
    """Order statistics Y_(1) <= ... <= Y_(n) of one random search."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if scores.size == 0:
            raise EmptySampleError("a sample needs at least one score")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must all be finite")
        if np.any(np.diff(scores) < 0):
            raise ValueError("scores must be sorted ascending; use Sample.from_scores")
        object.__setattr__(self, "scores", _frozen(scores))

    @classmethod
    def from_scores(cls, values: Iterable[float]) -> "Sample":
        return cls(np.sort(np.asarray(list(values), dtype=np.float64)))

    @property
    def n(self) -> int:
        return int(self.scores.size)

    @property
    def tie_flag(self) -> bool:
        return bool(np.any(np.diff(self.scores) == 0))

    def __len__(self):
        return self.n


@dataclass(frozen=True, eq=False)
class StepCdf:
    """Right-continuous step function: ``value_before_first`` left of the first
    knot, ``values[j]`` on ``[knots[j], knots[j+1])``."""

    knots: np.ndarray
    values: np.ndarray
    value_before_first: float = 0.0

    def __post_init__(self):
        knots = _frozen(self.knots)
        values = _frozen(self.values)
        if knots.ndim != 1 or knots.shape != values.shape:
            raise ValueError("knots and values must be 1-D arrays of equal length")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly ascending")
        before = float(self.value_before_first)
        full = np.concatenate([[before], values])
        if np.any(np.diff(full) < 0):
            raise ValueError("step CDF values must be nondecreasing")
        if full.min() < 0.0 or full.max() > 1.0:
            raise ValueError("step CDF values must lie in [0, 1]")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "value_before_first", before)

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        idx = np.searchsorted(self.knots, y, side="right") - 1
        out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], self.value_before_first)
        return float(out) if out.ndim == 0 else out

    def map_values(self, fn) -> "StepCdf":
        return StepCdf(self.knots, fn(self.values), fn(np.float64(self.value_before_first)))


class BandMethod(enum.Enum):
    DKW = "dkw"
    KS = "ks"
    LD_EQUAL_TAILED = "ld-et"
    LD_HIGHEST_DENSITY = "ld-hd"

    @property
    def interval_kind(self) -> Optional[IntervalKind]:
        return {
            BandMethod.LD_EQUAL_TAILED: IntervalKind.EQUAL_TAILED,
            BandMethod.LD_HIGHEST_DENSITY: IntervalKind.HIGHEST_DENSITY,
        }.get(self)

    @classmethod
    def for_kind(cls, kind: IntervalKind) -> "BandMethod":
        if kind is IntervalKind.EQUAL_TAILED:
            return cls.LD_EQUAL_TAILED
        return cls.LD_HIGHEST_DENSITY


@dataclass(frozen=True, eq=False)
class CdfBands:
    lower: StepCdf
    upper: StepCdf
    confidence: float
    method: BandMethod
    sample: Sample
    # epsilon for DKW/KS, the L_n threshold for LD
    critical_value: float = math.nan

    def __post_init__(self):
        if not np.array_equal(self.lower.knots, self.upper.knots):
            raise ValueError("lower and upper bands must share knots")
        if self.lower.value_before_first > self.upper.value_before_first or np.any(
            self.lower.values > self.upper.values
        ):
            raise ValueError("lower band exceeds upper band")

    @property
    def knots(self) -> np.ndarray:
        return self.lower.knots


@dataclass(frozen=True, eq=False)
class LnNull:
    """Simulated null distribution of L_n, sorted ascending."""

    n: int
    kind: IntervalKind
    replicates: int
    seed: int
    sorted_statistics: np.ndarray = field(repr=False)

    def quantile(self, confidence: float) -> float:
        return _upper_order_statistic(self.sorted_statistics, confidence)


def _check_confidence(confidence: float, allow_zero: bool = True) -> float:
    confidence = float(confidence)
    ok = 0.0 <= confidence < 1.0 if allow_zero else 0.0 < confidence < 1.0
    if not ok:
        raise ValueError(f"confidence must lie in {'[0' if allow_zero else '(0'}, 1), got {confidence}")
    return confidence


def _check_replicates(replicates: int) -> int:
    if replicates < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates, got {replicates}")
    return int(replicates)


def _upper_order_statistic(sorted_draws: np.ndarray, confidence: float) -> float:
    # ceil(confidence * R)-th order statistic, guarding float fuzz in the product
    rank = max(1, math.ceil(confidence * sorted_draws.size - 1e-9))
    return float(sorted_draws[rank - 1])


def _distinct(sample: Sample):
    """Distinct knots and, for each, the 0-based index of its last occurrence."""
    scores = sample.scores
    last = np.flatnonzero(np.append(np.diff(scores) > 0, True))
    return scores[last], last


def ecdf(sample: Sample) -> StepCdf:
    knots, last = _distinct(sample)
    return StepCdf(knots, (last + 1) / sample.n, 0.0)


def dkw_epsilon(n: int, confidence: float) -> float:
    alpha = 1.0 - _check_confidence(confidence, allow_zero=False)
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def _constant_width(sample: Sample, eps: float):
    point = ecdf(sample)
    lower = point.map_values(lambda v: np.clip(v - eps, 0.0, 1.0))
    upper = point.map_values(lambda v: np.clip(v + eps, 0.0, 1.0))
    return lower, upper


def _warn_ties(sample: Sample) -> None:
    if sample.tie_flag:
        warnings.warn(
            "sample contains tied scores; the bands assume a continuous score "
            "distribution and are only conservative here",
            TiesWarning,
            stacklevel=3,
        )


def dkw_bands(sample: Sample, confidence: float) -> CdfBands:
    eps = dkw_epsilon(sample.n, confidence)
    _warn_ties(sample)
    lower, upper = _constant_width(sample, eps)
    return CdfBands(lower, upper, confidence, BandMethod.DKW, sample, eps)


def _simulate(stat, n: int, replicates: int, seed: int, workers: int) -> np.ndarray:
    def chunk(index, start, stop):
        return stat(_random.sorted_uniforms(seed, _random.NULL_UNIFORMS, index, stop - start, n))

    return _random.map_chunks(chunk, replicates, workers)


@functools.lru_cache(maxsize=64)
def _ks_null(n: int, replicates: int, seed: int) -> np.ndarray:
    draws = np.sort(_simulate(kernels.ks_statistics, n, replicates, seed, 1))
    draws.setflags(write=False)
    return draws


def ks_critical_value(
    n: int, confidence: float, replicates: int = DEFAULT_REPLICATES, seed: int = 0
) -> float:
    """Monte Carlo 1 - alpha quantile of the two-sided KS statistic D_n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    confidence = _check_confidence(confidence)
    replicates = _check_replicates(replicates)
    return _upper_order_statistic(_ks_null(int(n), replicates, _random.check_seed(seed)), confidence)


def ks_bands(
    sample: Sample,
    confidence: float,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
    critical_value: Optional[float] = None,
) -> CdfBands:
    confidence = _check_confidence(confidence)
    eps = (
        ks_critical_value(sample.n, confidence, replicates, seed)
        if critical_value is None
        else float(critical_value)
    )
    _warn_ties(sample)
    lower, upper = _constant_width(sample, eps)
    return CdfBands(lower, upper, confidence, BandMethod.KS, sample, eps)


_LN_CACHE: dict = {}


def simulate_ln_null(
    n: int,
    kind: IntervalKind,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
    workers: int = 1,
    cache: bool = True,
) -> LnNull:
    """Simulate L_n = max_i B_i(U_(i)) under uniform order statistics.

    Output depends only on ``(n, kind, replicates, seed)``; ``workers`` only
    changes how chunks are scheduled. Results are memoized per process.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    kind = IntervalKind(kind)
    key = (int(n), kind, _check_replicates(replicates), _random.check_seed(seed))
    if cache and key in _LN_CACHE:
        return _LN_CACHE[key]
    draws = _simulate(lambda u: kernels.ln_statistics(u, kind.code), key[0], key[2], key[3], workers)
    draws.sort()
    draws.setflags(write=False)
    null = LnNull(key[0], kind, key[2], key[3], draws)
    if cache:
        _LN_CACHE[key] = null
    return null


@functools.lru_cache(maxsize=256)
def order_statistic_intervals(n: int, coverage: float, kind: IntervalKind):
    """[l_(i), u_(i)] for every Beta(i, n+1-i), each holding ``coverage``."""
    i = np.arange(1, n + 1, dtype=np.float64)
    lo, hi = kernels.interval_array(i, n + 1.0 - i, coverage, kind.code)
    hi = np.maximum(hi, lo)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def ld_bands(
    sample: Sample,
    confidence: float,
    kind: IntervalKind,
    null: LnNull,
) -> CdfBands:
    confidence = _check_confidence(confidence)
    if null.n != sample.n:
        raise ValueError(f"null was simulated for n={null.n}, sample has n={sample.n}")
    if null.kind is not kind:
        raise ValueError(f"null was simulated for {null.kind.name}, bands need {kind.name}")
    _warn_ties(sample)
    threshold = null.quantile(confidence)
    lo, hi = order_statistic_intervals(sample.n, threshold, kind)
    knots, last = _distinct(sample)
    # lower bound at Y_(i) extends right; upper bound at Y_(i+1) extends left
    upper_vals = np.append(hi, 1.0)[last + 1]
    lower = StepCdf(knots, lo[last], 0.0)
    upper = StepCdf(knots, upper_vals, float(hi[0]))
    return CdfBands(lower, upper, confidence, BandMethod.for_kind(kind), sample, threshold)


def make_bands(
    sample: Sample,
    confidence: float,
    method: BandMethod,
    replicates: int = DEFAULT_REPLICATES,
    seed: int = 0,
    workers: int = 1,
) -> CdfBands:
    """Build bands of any method, simulating whatever null it needs."""
    method = BandMethod(method)
    if method is BandMethod.DKW:
        return dkw_bands(sample, confidence)
    if method is BandMethod.KS:
        return ks_bands(sample, confidence, replicates, seed)
    kind = method.interval_kind
    null = simulate_ln_null(sample.n, kind, replicates, seed, workers)
    return ld_bands(sample, confidence, kind, null)
