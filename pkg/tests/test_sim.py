import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from tuningbands import _random
from tuningbands import cdfbands as cb
from tuningbands import sim
from tuningbands import tuning as tn
from tuningbands.errors import EmptySampleError, TiesWarning
from tuningbands.numerics import IntervalKind
from tuningbands.tuning import CurveKind, KGrid, SupportBounds

UNIT = SupportBounds(0.0, 1.0)


def reflected_density(centers, h, lo, hi, y, images=6):
    """Reflected Gaussian KDE written out term by term."""
    w = hi - lo
    total = 0.0
    for c in centers:
        for j in range(-images, images + 1):
            total += stats.norm.pdf(y, c + 2 * j * w, h) + stats.norm.pdf(y, 2 * lo - c + 2 * j * w, h)
    return total / len(centers)


@pytest.fixture(scope="module")
def bimodal():
    return sim.bimodal_kde(0.05)


class TestKde:
    def test_validation(self):
        with pytest.raises(ValueError):
            sim.Kde([0.5], 0.0)
        with pytest.raises(ValueError):
            sim.Kde([], 0.1)
        with pytest.raises(ValueError):
            sim.Kde([0.5], 0.1, reflect=True)
        with pytest.raises(ValueError):
            sim.Kde([1.5], 0.1, UNIT, reflect=True)

    def test_single_center(self):
        assert sim.kde_cdf(sim.Kde([0.0], 0.1, UNIT, True), 0.0) == 0.0
        assert sim.kde_cdf(sim.Kde([0.37], 0.2), 0.37) == pytest.approx(0.5, abs=1e-15)

    def test_bimodal_symmetry(self, bimodal):
        assert sim.kde_cdf(bimodal, 0.5) == pytest.approx(0.5, abs=1e-6)
        assert sim.kde_quantile(bimodal, 0.5) == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("centers,h", [([0.3, 0.7], 0.05), ([0.02, 0.5, 0.97], 0.2), ([0.9], 0.6)])
    def test_cdf_against_quadrature(self, centers, h):
        kde = sim.Kde(centers, h, UNIT, True)
        norm, _ = integrate.quad(lambda y: reflected_density(centers, h, 0, 1, y), 0, 1)
        for y in (0.05, 0.3, 0.5, 0.81, 0.99):
            mass, _ = integrate.quad(lambda t: reflected_density(centers, h, 0, 1, t), 0, y, epsabs=1e-13)
            assert sim.kde_cdf(kde, y) == pytest.approx(mass / norm, abs=1e-9)
            assert sim.kde_pdf(kde, y) == pytest.approx(reflected_density(centers, h, 0, 1, y) / norm, rel=1e-9)

    def test_bounds_and_monotone(self):
        for kde in (sim.Kde([0.1, 0.95], 0.3, UNIT, True), sim.Kde([2.0, 3.0], 0.5)):
            lo, hi = kde.bounds
            y = np.linspace(lo - 1, hi + 1, 2001)
            f = sim.kde_cdf(kde, y)
            assert np.all(np.diff(f) >= 0)
            assert sim.kde_cdf(kde, lo) == pytest.approx(0.0, abs=1e-9)
            assert sim.kde_cdf(kde, hi) == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 0.99))
    def test_quantile_inverts(self, y):
        kde = sim.Kde([0.2, 0.25, 0.8], 0.07, UNIT, True)
        assert sim.kde_quantile(kde, sim.kde_cdf(kde, y)) == pytest.approx(y, abs=1e-6)

    def test_quantile_domain(self, bimodal):
        with pytest.raises(ValueError):
            sim.kde_quantile(bimodal, 1.2)

    def test_sample(self, bimodal):
        with pytest.raises(EmptySampleError):
            sim.kde_sample(bimodal, 0)
        s = sim.kde_sample(bimodal, 100_000, seed=3)
        assert np.array_equal(s.scores, sim.kde_sample(bimodal, 100_000, seed=3).scores)
        assert s.scores.min() >= 0 and s.scores.max() <= 1
        assert stats.kstest(s.scores, lambda y: sim.kde_cdf(bimodal, y)).statistic < 0.01

    def test_sampler_reflects(self):
        # mass near a boundary gets folded back, matching the reflected CDF
        kde = sim.Kde([0.02], 0.1, UNIT, True)
        s = sim.kde_sample(kde, 100_000, seed=1)
        assert stats.kstest(s.scores, lambda y: sim.kde_cdf(kde, y)).statistic < 0.01

    def test_bandwidth_report(self):
        scores = np.random.default_rng(0).random(40)
        report = sim.bandwidth_report(scores, (0.2, 0.05, 0.01), UNIT, reflect=True)
        dists = [d for _, d in report]
        assert [h for h, _ in report] == [0.2, 0.05, 0.01]
        assert dists == sorted(dists, reverse=True)


class TestTrueCurves:
    def test_uniform_median(self):
        t = sim.uniform_truth()
        assert sim.true_median_curve(t, 2) == pytest.approx(math.sqrt(0.5), abs=1e-15)
        assert sim.true_median_curve(t, 1) == 0.5

    def test_kde_median_residual(self, bimodal):
        t = sim.kde_truth(bimodal)
        y = sim.true_median_curve(t, 4)
        assert abs(t.cdf(y) ** 4 - 0.5) <= 1e-9

    def test_uniform_mean(self):
        t = sim.uniform_truth()
        assert sim.true_mean_curve(t, 2) == pytest.approx(2 / 3, rel=1e-10)
        assert sim.true_mean_curve(t, 1) == pytest.approx(0.5, rel=1e-10)
        assert sim.true_mean_curve(t, [3, 7.5]) == pytest.approx([3 / 4, 7.5 / 8.5], rel=1e-10)

    def test_beta_mean(self):
        t = sim.beta_truth(2, 5)
        assert sim.true_mean_curve(t, 1) == pytest.approx(2 / 7, rel=1e-9)

    def test_kde_mean_monte_carlo(self, bimodal):
        t = sim.kde_truth(bimodal)
        k, m = 3, 1_000_000
        draws = t.sampler(np.random.default_rng(12), m * k).reshape(m, k).max(axis=1)
        se = draws.std() / math.sqrt(m)
        assert abs(sim.true_mean_curve(t, k) - draws.mean()) < 3 * se

    def test_domain(self):
        with pytest.raises(ValueError):
            sim.true_median_curve(sim.uniform_truth(), 0)
        unbounded = sim.GroundTruth(stats.norm.cdf, stats.norm.ppf, None, "normal")
        with pytest.raises(ValueError):
            sim.true_mean_curve(unbounded, 1)

    def test_beta_truth_round_trip(self):
        t = sim.beta_truth(3, 1.5)
        y = np.linspace(0.01, 0.99, 50)
        assert t.quantile(t.cdf(y)) == pytest.approx(y, abs=1e-9)


class TestClopperPearson:
    def test_zero_successes(self):
        iv = sim.clopper_pearson(0, 10, 0.95)
        assert iv.lo == 0 and iv.hi == pytest.approx(1 - 0.025 ** 0.1, abs=1e-10)
        assert iv.hi == pytest.approx(0.3085, abs=1e-4)

    def test_mirror(self):
        a, b = sim.clopper_pearson(0, 10, 0.95), sim.clopper_pearson(10, 10, 0.95)
        assert b.hi == 1 and b.lo == pytest.approx(1 - a.hi, abs=1e-10)

    def test_against_scipy(self):
        for x, n in ((5, 10), (480, 1000), (1, 37)):
            iv = sim.clopper_pearson(x, n, 0.99)
            assert iv.lo == pytest.approx(stats.beta.ppf(0.005, x, n - x + 1), abs=1e-10)
            assert iv.hi == pytest.approx(stats.beta.ppf(0.995, x + 1, n - x), abs=1e-10)
            assert x / n in iv

    def test_domain(self):
        with pytest.raises(ValueError):
            sim.clopper_pearson(11, 10)
        with pytest.raises(ValueError):
            sim.clopper_pearson(1, 0)


def dense_cdf_covers(bands, truth):
    lo, hi = bands.knots[0], bands.knots[-1]
    pad = 0.1 * (hi - lo) + 0.1
    ys = np.linspace(lo - pad, hi + pad, 10_000)
    eps = 1e-12 * max(hi - lo, 1.0)
    ys = np.concatenate([ys, bands.knots, bands.knots - eps])
    f = truth.cdf(ys)
    return bool(np.all(bands.lower(ys) <= f) and np.all(f <= bands.upper(ys)))


class TestBandCovers:
    def test_degenerate_curves(self):
        t = sim.uniform_truth()
        grid = KGrid.integers(10)
        true = sim.true_median_curve(t, grid.iterations)
        exact = tn.CurveBandSet(CurveKind.MEDIAN, 0.8, grid, true, true, true)
        assert sim.band_covers(exact, t)
        shifted = tn.CurveBandSet(CurveKind.MEDIAN, 0.8, grid, true + 0.01, true + 0.01, true + 0.02)
        assert not sim.band_covers(shifted, t)
        mean = sim.true_mean_curve(t, grid.iterations)
        assert sim.band_covers(tn.CurveBandSet(CurveKind.MEAN, 0.8, grid, mean, mean, mean), t)

    def test_shifted_cdf_bands(self):
        s = cb.Sample.from_scores(np.linspace(0.05, 0.95, 10))
        bands = cb.dkw_bands(s, 0.5)
        lifted = cb.CdfBands(
            bands.lower.map_values(lambda v: np.minimum(v + 0.5, 1.0)),
            bands.upper.map_values(lambda v: np.ones_like(v)),
            0.5, bands.method, s,
        )
        assert not sim.band_covers(lifted, sim.uniform_truth())

    def test_fuzzed_against_dense_grid(self):
        truth = sim.kde_truth(sim.bimodal_kde())
        null = cb.simulate_ln_null(12, IntervalKind.HIGHEST_DENSITY, 5000, seed=5)
        rng = np.random.default_rng(21)
        verdicts = []
        for _ in range(100):
            s = cb.Sample.from_scores(truth.sampler(rng, 12))
            bands = cb.ld_bands(s, rng.uniform(0.1, 0.9), IntervalKind.HIGHEST_DENSITY, null)
            got = sim.band_covers(bands, truth)
            assert got == dense_cdf_covers(bands, truth)
            # the median curve bands agree with the CDF bands at every budget
            assert sim.median_bands_cover(bands, truth, UNIT) == got
            verdicts.append(got)
        assert 0 < sum(verdicts) < 100

    def test_median_dense_k_grid(self):
        truth = sim.uniform_truth()
        rng = np.random.default_rng(3)
        for _ in range(30):
            s = cb.Sample.from_scores(rng.random(15))
            bands = cb.dkw_bands(s, rng.uniform(0.1, 0.9))
            dense = tn.median_curve_bands(bands, KGrid(np.geomspace(0.01, 500, 10_000)), UNIT)
            if sim.band_covers(dense, truth) is False:
                assert not sim.median_bands_cover(bands, truth, UNIT)

    def test_critical_grid_includes_jumps(self):
        s = cb.Sample.from_scores([0.2, 0.4, 0.9])
        bands = cb.dkw_bands(s, 0.5)
        ks = sim.median_critical_grid(bands).budgets
        v = bands.lower.values[bands.lower.values > 0][0]
        jump = math.log(0.5) / math.log(v)
        assert np.any(ks == jump) and np.any(ks < jump) and np.any(ks > jump)


class TestCoverageExperiment:
    def test_nominal_zero(self):
        res = sim.coverage_experiment(sim.uniform_truth(), 10, 0.0, 200, replicates=2000, seed=1)
        assert res.rate <= 0.02

    def test_deterministic(self):
        args = (sim.uniform_truth(), 8, 0.8, 150)
        a = sim.coverage_experiment(*args, replicates=2000, seed=4)
        b = sim.coverage_experiment(*args, replicates=2000, seed=4, workers=2)
        assert a == b

    def test_dkw_conservative(self):
        res = sim.coverage_experiment(
            sim.uniform_truth(), 20, 0.8, 1000, cb.BandMethod.DKW, sim.Target.CDF, seed=2
        )
        assert res.rate >= 0.8

    def test_mean_conservative(self):
        res = sim.coverage_experiment(
            sim.beta_truth(2, 2), 15, 0.8, 300, sim.BandMethod.LD_HIGHEST_DENSITY, sim.Target.MEAN,
            seed=3, replicates=5000,
        )
        assert res.cp_interval.hi >= 0.8

    def test_result_fields(self):
        res = sim.CoverageResult.from_counts(80, 100, 0.8)
        assert res.rate == 0.8 and res.rate in res.cp_interval and res.nominal_inside

    def test_preconditions(self):
        with pytest.raises(ValueError):
            sim.coverage_experiment(sim.uniform_truth(), 5, 0.8, 10)


class TestBootstrap:
    def test_constant_sample(self):
        s = cb.Sample.from_scores([0.4] * 12)
        curves = sim.bootstrap_pointwise_bands(s, sim.Estimator.V, KGrid.integers(5), 1000)
        assert curves.upper - curves.lower == pytest.approx(0.0, abs=1e-15)
        assert curves.lower == pytest.approx(0.4, abs=1e-15)

    def test_mean_bootstrap_oracle(self):
        scores = np.random.default_rng(1).random(25)
        s = cb.Sample.from_scores(scores)
        curves = sim.bootstrap_pointwise_bands(s, sim.Estimator.V, KGrid([1.0]), 2000, 0.9, seed=6)
        rng = _random.generator(6, _random.BOOTSTRAP)
        means = s.scores[rng.integers(0, 25, (2000, 25))].mean(axis=1)
        lo, hi = np.quantile(means, [0.05, 0.95])
        assert curves.lower[0] == pytest.approx(lo, abs=1e-12)
        assert curves.upper[0] == pytest.approx(hi, abs=1e-12)
        assert curves.point[0] == pytest.approx(scores.mean(), abs=1e-15)

    def test_u_estimator_point(self):
        s = cb.Sample.from_scores([1.0, 2.0, 3.0])
        curves = sim.bootstrap_pointwise_bands(s, sim.Estimator.U, KGrid([2.0]), 1000)
        assert curves.point[0] == pytest.approx(8 / 3)

    def test_preconditions(self):
        s = cb.Sample.from_scores([1.0, 2.0])
        with pytest.raises(ValueError):
            sim.bootstrap_pointwise_bands(s, sim.Estimator.V, KGrid([1.0]), 999)
        with pytest.raises(ValueError):
            sim.bootstrap_coverage_experiment(sim.uniform_truth(), reps=0)

    def test_small_experiment(self):
        res = sim.bootstrap_coverage_experiment(
            sim.uniform_truth(), n=20, grid=KGrid([1.0, 20.0]), reps=100, replicates=1000, seed=2
        )
        assert set(res) == {sim.Estimator.U, sim.Estimator.V}
        assert all(len(v) == 2 and v[0].trials == 100 for v in res.values())
        again = sim.bootstrap_coverage_experiment(
            sim.uniform_truth(), n=20, grid=KGrid([1.0, 20.0]), reps=100, replicates=1000, seed=2
        )
        assert res == again
