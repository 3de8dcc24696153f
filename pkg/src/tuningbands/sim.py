"""Simulation ground truths and coverage experiments.

A ground truth knows its CDF, quantile function and how to sample, so the
true CDF and tuning curves are available exactly and any band can be checked
against them. Coverage experiments repeat sample -> bands -> check and report
the empirical coverage with a Clopper-Pearson interval.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import _random
from .cdfbands import (
    DEFAULT_REPLICATES,
    BandMethod,
    CdfBands,
    Sample,
    dkw_bands,
    ks_bands,
    ks_critical_value,
    ld_bands,
    simulate_ln_null,
)
from .errors import EmptySampleError
from .numerics import BetaParams, ProbabilityInterval, beta_quantile
from ._backend import kernels
from .tuning import (
    CurveBandSet,
    CurveKind,
    KGrid,
    SupportBounds,
    median_curve_bands,
    mean_curve_bands,
    u_statistic_weights,
    v_statistic_weights,
)

# relative offset used to step just past a discontinuity of a curve band
EDGE = 1e-9
# slack for exact ties between a band and the truth: probabilities may round
# by a few ulps, and the mean curve comes from quadrature good to ~1e-10
PROB_TOL = 1e-12
MEAN_RTOL = 1e-10
QUANTILE_ITERS = 200


@dataclass(frozen=True, eq=False)
class Kde:
    """Gaussian kernel density estimate, optionally reflected at both bounds."""

    centers: np.ndarray
    bandwidth: float
    support: SupportBounds = field(default_factory=SupportBounds)
    reflect: bool = False

    def __post_init__(self):
        centers = np.array(self.centers, dtype=np.float64).ravel()
        if centers.size == 0:
            raise ValueError("a KDE needs at least one center")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.reflect:
            if not self.support.finite:
                raise ValueError("reflection needs finite support bounds")
            if not self.support.contains(centers):
                raise ValueError("centers must lie within the support when reflecting")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def bounds(self):
        """Interval carrying all but a negligible amount of the mass."""
        if self.reflect:
            return self.support.lo, self.support.hi
        pad = 40.0 * self.bandwidth
        return float(self.centers.min() - pad), float(self.centers.max() + pad)

    def _images(self):
        # folding at both bounds repeats with period 2W: images of each center
        # sit at c + 2jW and 2lo - c + 2jW
        lo, hi = self.support.lo, self.support.hi
        width = hi - lo
        reach = math.ceil((40.0 * self.bandwidth) / (2.0 * width)) + 1
        shifts = 2.0 * width * np.arange(-reach, reach + 1)
        c = self.centers
        return np.concatenate([(c[:, None] + shifts).ravel(), ((2 * lo - c)[:, None] + shifts).ravel()])


def _raw_cdf(kde: Kde, y: np.ndarray) -> np.ndarray:
    h = kde.bandwidth
    if not kde.reflect:
        return ndtr((y[..., None] - kde.centers) / h).mean(axis=-1)
    images = kde._images()
    lo = kde.support.lo
    inside = ndtr((y[..., None] - images) / h) - ndtr((lo - images) / h)
    return inside.sum(axis=-1) / kde.centers.size


def kde_cdf(kde: Kde, y):
    y = np.asarray(y, dtype=np.float64)
    if not kde.reflect:
        out = _raw_cdf(kde, y)
    else:
        lo, hi = kde.support.lo, kde.support.hi
        total = _raw_cdf(kde, np.array(hi))
        out = np.clip(_raw_cdf(kde, np.clip(y, lo, hi)) / total, 0.0, 1.0)
        out = np.where(y <= lo, 0.0, np.where(y >= hi, 1.0, out))
    return float(out) if out.ndim == 0 else out


def kde_pdf(kde: Kde, y):
    y = np.asarray(y, dtype=np.float64)
    h = kde.bandwidth
    if not kde.reflect:
        z = (y[..., None] - kde.centers) / h
        out = np.exp(-0.5 * z * z).mean(axis=-1) / (h * math.sqrt(2 * math.pi))
    else:
        lo, hi = kde.support.lo, kde.support.hi
        z = (y[..., None] - kde._images()) / h
        dens = np.exp(-0.5 * z * z).sum(axis=-1) / (kde.centers.size * h * math.sqrt(2 * math.pi))
        out = np.where((y < lo) | (y > hi), 0.0, dens / _raw_cdf(kde, np.array(hi)))
    return float(out) if out.ndim == 0 else out


def _bisect_quantile(cdf, p: np.ndarray, lo: float, hi: float) -> np.ndarray:
    left = np.full(p.shape, lo)
    right = np.full(p.shape, hi)
    for _ in range(QUANTILE_ITERS):
        mid = 0.5 * (left + right)
        if np.all((mid <= left) | (mid >= right)):
            break
        below = cdf(mid) < p
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
    return 0.5 * (left + right)


def kde_quantile(kde: Kde, p):
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    lo, hi = kde.bounds
    out = _bisect_quantile(lambda y: kde_cdf(kde, y), p, lo, hi)
    return float(out) if out.ndim == 0 else out


def _kde_draw(kde: Kde, rng: np.random.Generator, size: int) -> np.ndarray:
    centers = kde.centers[rng.integers(0, kde.centers.size, size)]
    x = centers + kde.bandwidth * rng.standard_normal(size)
    if kde.reflect:
        lo, hi = kde.support.lo, kde.support.hi
        width = hi - lo
        t = np.mod(x - lo, 2.0 * width)
        x = lo + np.where(t > width, 2.0 * width - t, t)
    return x


def kde_sample(kde: Kde, m: int, seed: int = 0) -> Sample:
    if m < 1:
        raise EmptySampleError("cannot draw an empty sample")
    rng = _random.generator(seed, _random.SAMPLING)
    return Sample.from_scores(_kde_draw(kde, rng, m))


def bandwidth_report(
    scores: Sequence[float],
    bandwidths: Sequence[float] = (0.1, 0.05, 0.025, 0.0125, 0.00625),
    support: Optional[SupportBounds] = None,
    reflect: bool = False,
) -> List[tuple]:
    """KS distance between the data's eCDF and the KDE for each bandwidth."""
    sample = Sample.from_scores(scores)
    y = sample.scores
    n = sample.n
    out = []
    for h in bandwidths:
        kde = Kde(y, h, support or SupportBounds(), reflect)
        f = kde_cdf(kde, y)
        i = np.arange(1, n + 1)
        out.append((float(h), float(max((i / n - f).max(), (f - (i - 1) / n).max()))))
    return out


@dataclass(frozen=True, eq=False)
class GroundTruth:
    cdf: Callable
    quantile: Callable
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    tag: str
    support: SupportBounds = field(default_factory=SupportBounds)
    # integration breakpoints for the mean curve
    breakpoints: tuple = ()


def uniform_truth(lo: float = 0.0, hi: float = 1.0) -> GroundTruth:
    width = hi - lo
    return GroundTruth(
        cdf=lambda y: np.clip((np.asarray(y, dtype=np.float64) - lo) / width, 0.0, 1.0),
        quantile=lambda p: lo + width * np.asarray(p, dtype=np.float64),
        sampler=lambda rng, size: lo + width * rng.random(size),
        tag=f"uniform({lo:g},{hi:g})",
        support=SupportBounds(lo, hi),
    )


def beta_truth(a: float, b: float) -> GroundTruth:
    params = BetaParams(a, b)

    def quantile(p):
        p = np.asarray(p, dtype=np.float64)
        out = kernels.ppf_array(params.a, params.b, p)
        return float(out) if out.ndim == 0 else out

    def cdf(y):
        y = np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)
        out = kernels.betainc_array(params.a, params.b, y)
        return float(out) if out.ndim == 0 else out

    return GroundTruth(
        cdf=cdf,
        quantile=quantile,
        sampler=lambda rng, size: kernels.ppf_array(params.a, params.b, rng.random(size)),
        tag=f"beta({a:g},{b:g})",
        support=SupportBounds(0.0, 1.0),
    )


def kde_truth(kde: Kde) -> GroundTruth:
    lo, hi = kde.bounds
    return GroundTruth(
        cdf=lambda y: kde_cdf(kde, y),
        quantile=lambda p: kde_quantile(kde, p),
        sampler=lambda rng, size: _kde_draw(kde, rng, size),
        tag=f"kde(m={kde.centers.size},h={kde.bandwidth:g},reflect={kde.reflect})",
        support=kde.support if kde.reflect else SupportBounds(lo, hi),
        breakpoints=tuple(float(c) for c in kde.centers[:50]),
    )


def bimodal_kde(bandwidth: float = 0.05) -> Kde:
    """Two-center reflected KDE on [0, 1] used as a standard test truth."""
    return Kde([0.3, 0.7], bandwidth, SupportBounds(0.0, 1.0), reflect=True)


def true_median_curve(truth: GroundTruth, k):
    """Median of the best of k draws: the 0.5^(1/k) quantile."""
    k = np.asarray(k, dtype=np.float64)
    if np.any(~(k > 0)):
        raise ValueError("k must be positive")
    return truth.quantile(np.power(0.5, 1.0 / k))


def true_mean_curve(truth: GroundTruth, k) -> Union[float, np.ndarray]:
    """Expected best of k draws, lo + integral of (1 - F^k) over the support."""
    lo, hi = truth.support.lo, truth.support.hi
    if not truth.support.finite:
        raise ValueError("the mean curve needs a finite support")
    ks = np.atleast_1d(np.asarray(k, dtype=np.float64))
    if np.any(~(ks > 0)):
        raise ValueError("k must be positive")
    points = [p for p in truth.breakpoints if lo < p < hi] or None
    out = []
    for kk in ks:
        val, _ = integrate.quad(
            lambda y: 1.0 - float(truth.cdf(y)) ** kk,
            lo,
            hi,
            epsabs=1e-13,
            epsrel=1e-10,
            limit=500,
            points=points,
        )
        out.append(lo + val)
    out = np.array(out)
    return float(out[0]) if np.ndim(k) == 0 else out


def clopper_pearson(successes: int, trials: int, confidence: float = 0.99) -> ProbabilityInterval:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else beta_quantile(BetaParams(successes, trials - successes + 1), alpha / 2)
    hi = 1.0 if successes == trials else beta_quantile(BetaParams(successes + 1, trials - successes), 1 - alpha / 2)
    return ProbabilityInterval(lo, hi)


@dataclass(frozen=True)
class CoverageResult:
    successes: int
    trials: int
    rate: float
    cp_interval: ProbabilityInterval
    nominal: float

    @classmethod
    def from_counts(cls, successes: int, trials: int, nominal: float, cp_confidence: float = 0.99):
        return cls(successes, trials, successes / trials, clopper_pearson(successes, trials, cp_confidence), nominal)

    @property
    def nominal_inside(self) -> bool:
        return nominal_in(self.cp_interval, self.nominal)


def nominal_in(interval: ProbabilityInterval, nominal: float) -> bool:
    return interval.lo <= nominal <= interval.hi


class Target(enum.Enum):
    CDF = "cdf"
    MEDIAN = "median"
    MEAN = "mean"


def _cdf_covers(bands: CdfBands, truth: GroundTruth) -> bool:
    knots = bands.knots
    f = np.asarray(truth.cdf(knots), dtype=np.float64)
    # on [knot_j, knot_j+1) the band is flat and F increases: the lower band
    # binds at the left end, the upper band at the right end (left limit)
    upper_left = np.concatenate([[bands.upper.value_before_first], bands.upper.values[:-1]])
    if np.any(f < bands.lower.values - PROB_TOL) or np.any(f > upper_left + PROB_TOL):
        return False
    return bool(bands.upper.values[-1] >= 1.0 - PROB_TOL)


def _curve_covers(curves: CurveBandSet, truth: GroundTruth, true_mean=None) -> bool:
    ks = curves.k
    if curves.kind is CurveKind.MEDIAN:
        # compare in probability space: the band value is a valid upper bound on
        # the median of F^k iff F(value)^k >= 1/2, and a lower bound iff
        # F(value-)^k <= 1/2; F is continuous so F(value-) = F(value)
        f_hi = np.asarray(truth.cdf(curves.upper), dtype=np.float64)
        f_lo = np.asarray(truth.cdf(curves.lower), dtype=np.float64)
        return bool(
            np.all(np.power(f_hi, ks) >= 0.5 - PROB_TOL) and np.all(np.power(f_lo, ks) <= 0.5 + PROB_TOL)
        )
    if true_mean is None:
        true_mean = true_mean_curve(truth, ks)
    slack = MEAN_RTOL * (np.abs(true_mean) + 1.0)
    return bool(np.all(curves.lower <= true_mean + slack) and np.all(true_mean <= curves.upper + slack))


def band_covers(bands: Union[CdfBands, CurveBandSet], truth: GroundTruth, true_mean=None) -> bool:
    """True iff the truth lies inside the bands simultaneously.

    CDF bands are checked on both sides of every knot. Curve bands are
    checked at every budget of their grid; use :func:`median_bands_cover`
    to check a median curve over all real budgets at once.
    """
    if isinstance(bands, CdfBands):
        return _cdf_covers(bands, truth)
    return _curve_covers(bands, truth, true_mean)


def median_critical_grid(bands: CdfBands, extra: Sequence[float] = (1.0,)) -> KGrid:
    """Budgets at, and just either side of, every jump of the median curve bands."""
    vals = np.concatenate(
        [bands.lower.values, bands.upper.values, [bands.upper.value_before_first]]
    )
    vals = vals[(vals > 0.0) & (vals < 1.0)]
    jumps = math.log(0.5) / np.log(vals)
    ks = np.concatenate([jumps * (1 - EDGE), jumps, jumps * (1 + EDGE), np.asarray(extra, float)])
    ks = np.unique(ks[ks > 0])
    return KGrid(ks)


def median_bands_cover(
    bands: CdfBands, truth: GroundTruth, support: Optional[SupportBounds] = None
) -> bool:
    """Check the median curve bands against the true median curve for all k > 0.

    The band curves are step functions of k and the true curve is continuous
    and increasing, so checking both one-sided limits at every jump suffices.
    """
    curves = median_curve_bands(bands, median_critical_grid(bands), support)
    return _curve_covers(curves, truth)


def _bands_factory(method: BandMethod, n: int, replicates: int, seed: int, workers: int):
    method = BandMethod(method)
    if method is BandMethod.DKW:
        return lambda sample, conf: dkw_bands(sample, conf)
    if method is BandMethod.KS:
        return lambda sample, conf: ks_bands(
            sample, conf, critical_value=ks_critical_value(n, conf, replicates, seed)
        )
    kind = method.interval_kind
    null = simulate_ln_null(n, kind, replicates, seed, workers)
    return lambda sample, conf: ld_bands(sample, conf, kind, null)


def coverage_experiment(
    truth: GroundTruth,
    n: int,
    nominal: float,
    reps: int,
    method: BandMethod = BandMethod.LD_HIGHEST_DENSITY,
    target: Target = Target.MEDIAN,
    seed: int = 0,
    replicates: int = DEFAULT_REPLICATES,
    grid: Optional[KGrid] = None,
    workers: int = 1,
    cp_confidence: float = 0.99,
) -> CoverageResult:
    """Empirical simultaneous coverage of one band method against a truth.

    Median targets are checked over every real budget; mean targets on
    ``grid`` (default 1..n) with the truth's support as the bounds.
    """
    if reps < 100:
        raise ValueError(f"need at least 100 repetitions, got {reps}")
    target = Target(target)
    build = _bands_factory(method, n, replicates, seed, workers)
    true_mean = None
    if target is Target.MEAN:
        grid = grid or KGrid.integers(n)
        true_mean = true_mean_curve(truth, grid.iterations)
    successes = 0
    for rep in range(reps):
        rng = _random.generator(seed, _random.EXPERIMENT, rep)
        sample = Sample.from_scores(truth.sampler(rng, n))
        bands = build(sample, nominal)
        if target is Target.CDF:
            ok = _cdf_covers(bands, truth)
        elif target is Target.MEDIAN:
            ok = median_bands_cover(bands, truth, truth.support)
        else:
            curves = mean_curve_bands(bands, grid, truth.support)
            ok = _curve_covers(curves, truth, true_mean)
        successes += ok
    return CoverageResult.from_counts(successes, reps, nominal, cp_confidence)


class Estimator(enum.Enum):
    U = "u"
    V = "v"


def _estimator_weights(estimator: Estimator, n: int, grid: KGrid) -> np.ndarray:
    if Estimator(estimator) is Estimator.U:
        return u_statistic_weights(n, grid.iterations)
    return v_statistic_weights(n, grid.iterations)


def _bootstrap_matrix(scores: np.ndarray, weights: np.ndarray, replicates: int, rng) -> np.ndarray:
    n = scores.size
    resamples = np.sort(scores[rng.integers(0, n, (replicates, n))], axis=1)
    return resamples @ weights.T


def bootstrap_pointwise_bands(
    sample: Sample,
    estimator: Estimator,
    grid: KGrid,
    replicates: int = 4096,
    confidence: float = 0.95,
    seed: int = 0,
) -> CurveBandSet:
    """Percentile bootstrap bands, computed independently at each budget."""
    if replicates < 1000:
        raise ValueError(f"need at least 1000 bootstrap replicates, got {replicates}")
    weights = _estimator_weights(estimator, sample.n, grid)
    rng = _random.generator(seed, _random.BOOTSTRAP)
    boot = _bootstrap_matrix(sample.scores, weights, replicates, rng)
    alpha = 1.0 - confidence
    lower, upper = np.quantile(boot, [alpha / 2, 1 - alpha / 2], axis=0)
    return CurveBandSet(CurveKind.MEAN, confidence, grid, lower, weights @ sample.scores, upper)


def bootstrap_coverage_experiment(
    truth: GroundTruth,
    n: int = 50,
    grid: Optional[KGrid] = None,
    nominal: float = 0.95,
    reps: int = 1000,
    replicates: int = 4096,
    seed: int = 0,
    estimators: Sequence[Estimator] = (Estimator.U, Estimator.V),
    cp_confidence: float = 0.95,
) -> Dict[Estimator, List[CoverageResult]]:
    """Pointwise coverage of bootstrap bands for the mean tuning curve."""
    if reps < 1:
        raise ValueError("need at least one repetition")
    if replicates < 1000:
        raise ValueError(f"need at least 1000 bootstrap replicates, got {replicates}")
    grid = grid or KGrid.integers(n)
    truth_curve = true_mean_curve(truth, grid.iterations)
    weights = {Estimator(e): _estimator_weights(e, n, grid) for e in estimators}
    hits = {e: np.zeros(len(grid), dtype=np.int64) for e in weights}
    alpha = 1.0 - nominal
    for rep in range(reps):
        rng = _random.generator(seed, _random.EXPERIMENT, rep)
        scores = np.sort(truth.sampler(rng, n))
        boot_rng = _random.generator(seed, _random.BOOTSTRAP, rep)
        idx = boot_rng.integers(0, n, (replicates, n))
        resamples = np.sort(scores[idx], axis=1)
        for est, w in weights.items():
            boot = resamples @ w.T
            lower, upper = np.quantile(boot, [alpha / 2, 1 - alpha / 2], axis=0)
            hits[est] += (lower <= truth_curve) & (truth_curve <= upper)
    return {
        est: [CoverageResult.from_counts(int(h), reps, nominal, cp_confidence) for h in counts]
        for est, counts in hits.items()
    }
