import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tuningbands import _random
from tuningbands import cdfbands as cb
from tuningbands._backend import kernels
from tuningbands.errors import EmptySampleError, TiesWarning
from tuningbands.numerics import BetaParams, IntervalKind, smallest_interval_coverage

ET, HD = IntervalKind.EQUAL_TAILED, IntervalKind.HIGHEST_DENSITY
R = 20_000


def sample(values):
    return cb.Sample.from_scores(values)


scores_strategy = st.lists(
    st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False), min_size=1, max_size=30
)


class TestSample:
    def test_sorted(self):
        assert list(sample([3, 1, 2]).scores) == [1, 2, 3]

    def test_empty(self):
        with pytest.raises(EmptySampleError):
            sample([])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            sample([1.0, float("nan")])

    def test_unsorted_direct(self):
        with pytest.raises(ValueError):
            cb.Sample(np.array([2.0, 1.0]))

    def test_ties(self):
        assert sample([1, 1, 2]).tie_flag
        assert not sample([1, 2]).tie_flag

    def test_immutable(self):
        with pytest.raises(ValueError):
            sample([1, 2]).scores[0] = 5


class TestEcdf:
    def test_examples(self):
        f = cb.ecdf(sample([3, 1, 2]))
        assert f(2) == pytest.approx(2 / 3)
        assert f(0.5) == 0.0
        assert cb.ecdf(sample([1, 1, 2]))(1) == pytest.approx(2 / 3)

    @given(scores_strategy, st.floats(-2e3, 2e3))
    def test_counts(self, values, y):
        f = cb.ecdf(sample(values))
        assert f(y) == pytest.approx(sum(v <= y for v in values) / len(values))

    def test_step_cdf_validation(self):
        with pytest.raises(ValueError):
            cb.StepCdf([1.0, 2.0], [0.5, 0.4])
        with pytest.raises(ValueError):
            cb.StepCdf([2.0, 1.0], [0.1, 0.4])
        with pytest.raises(ValueError):
            cb.StepCdf([1.0], [1.5])


class TestDkw:
    def test_epsilon(self):
        # sqrt(ln 40 / 100) evaluated by hand: 0.19206456
        assert cb.dkw_epsilon(50, 0.95) == pytest.approx(0.1920646, abs=1e-7)
        assert cb.dkw_epsilon(50, 0.95) == pytest.approx(math.sqrt(math.log(40) / 100), rel=1e-15)
        assert cb.dkw_epsilon(200, 0.90) == pytest.approx(0.086541, abs=1e-6)

    def test_clipping(self):
        bands = cb.dkw_bands(sample(np.linspace(0, 1, 50)), 0.95)
        assert bands.lower.value_before_first == 0.0
        assert bands.lower.values[0] == 0.0
        assert bands.upper.values[-1] == 1.0

    def test_confidence_domain(self):
        with pytest.raises(ValueError):
            cb.dkw_bands(sample([1.0]), 1.0)
        with pytest.raises(ValueError):
            cb.dkw_bands(sample([1.0]), 0.0)


class TestKs:
    def test_n1_law(self):
        # P(D_1 <= d) = 2d - 1
        assert cb.ks_critical_value(1, 0.95, R, seed=3) == pytest.approx(0.975, abs=0.003)
        assert cb.ks_critical_value(1, 0.0, R, seed=3) == pytest.approx(0.5, abs=1e-3)

    @pytest.mark.parametrize("n,conf", [(5, 0.8), (20, 0.5), (48, 0.95), (100, 0.9)])
    def test_exact_distribution(self, n, conf):
        crit = cb.ks_critical_value(n, conf, 100_000, seed=1)
        assert crit == pytest.approx(stats.kstwo.ppf(conf, n), rel=0.01)

    def test_asymptotic(self):
        assert cb.ks_critical_value(100, 0.95) == pytest.approx(1.3581 / 10, rel=0.05)

    def test_narrower_than_dkw(self):
        for n in (1, 5, 20, 48, 100):
            for conf in (0.5, 0.8, 0.95):
                assert cb.ks_critical_value(n, conf, R) <= cb.dkw_epsilon(n, conf)

    def test_n1_bands(self):
        bands = cb.ks_bands(sample([0.5]), 0.95, R, seed=3)
        eps = bands.critical_value
        assert bands.upper(0.4) == pytest.approx(eps) and bands.lower(0.4) == 0.0
        assert bands.lower(0.5) == pytest.approx(1 - eps) and bands.upper(0.6) == 1.0
        assert eps == pytest.approx(0.975, abs=0.003)

    def test_collapse(self):
        # D_n >= 1/(2n) always, so confidence 0 leaves bands just that far off the eCDF
        eps = [cb.ks_critical_value(30, c, R) for c in (0.8, 0.5, 0.1, 0.0)]
        assert eps == sorted(eps, reverse=True)
        assert 1 / 60 <= eps[-1] < 0.06

    def test_replicates_floor(self):
        with pytest.raises(ValueError):
            cb.ks_critical_value(10, 0.9, 999)

    def test_statistic_definition(self):
        u = np.sort(np.random.default_rng(5).random((50, 7)), axis=1)
        i = np.arange(1, 8)
        want = np.maximum(i / 7 - u, u - (i - 1) / 7).max(axis=1)
        assert np.array_equal(kernels.ks_statistics(u), want)


class TestLnNull:
    @pytest.mark.parametrize("kind", [ET, HD])
    def test_n1_uniform_law(self, kind):
        null = cb.simulate_ln_null(1, kind, R, seed=11)
        assert null.quantile(0.95) == pytest.approx(0.95, abs=0.006)
        assert null.sorted_statistics.mean() == pytest.approx(0.5, abs=0.006)

    def test_sorted_and_bounded(self):
        draws = cb.simulate_ln_null(12, HD, 2000, seed=4).sorted_statistics
        assert draws.size == 2000
        assert np.all(np.diff(draws) >= 0) and draws.min() >= 0 and draws.max() <= 1

    @pytest.mark.parametrize("kind", [ET, HD])
    def test_against_elementwise_definition(self, kind):
        n = 9
        u = _random.sorted_uniforms(0, _random.NULL_UNIFORMS, 0, 40, n)
        fast = kernels.ln_statistics(u, kind.code)
        slow = [
            max(smallest_interval_coverage(BetaParams(i + 1, n - i), row[i], kind) for i in range(n))
            for row in u
        ]
        assert fast == pytest.approx(slow, abs=1e-9)

    def test_reproducible(self):
        a = cb.simulate_ln_null(10, HD, 5000, seed=9, cache=False).sorted_statistics
        b = cb.simulate_ln_null(10, HD, 5000, seed=9, workers=3, cache=False).sorted_statistics
        c = cb.simulate_ln_null(10, HD, 5000, seed=10, cache=False).sorted_statistics
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            cb.simulate_ln_null(0, HD, R)
        with pytest.raises(ValueError):
            cb.simulate_ln_null(5, HD, 10)

    def test_quantile_rank(self):
        null = cb.LnNull(3, HD, 1000, 0, np.arange(1000) / 1000)
        # ceil(0.8 * 1000) = 800th smallest
        assert null.quantile(0.8) == 0.799
        assert null.quantile(0.0) == 0.0


class TestLdBands:
    def test_n1_example(self):
        null = cb.simulate_ln_null(1, ET, R, seed=2)
        bands = cb.ld_bands(sample([0.5]), 0.9, ET, null)
        c = bands.critical_value
        assert bands.lower(0.4) == 0.0
        assert bands.upper(0.4) == pytest.approx(0.5 + c / 2, abs=1e-12)
        assert bands.lower(0.5) == pytest.approx(0.5 - c / 2, abs=1e-12)
        assert bands.upper(0.7) == 1.0
        assert (bands.lower(0.5), bands.upper(0.4)) == pytest.approx((0.05, 0.95), abs=0.005)

    def test_n2_closed_form(self):
        null = cb.simulate_ln_null(2, ET, R, seed=2)
        bands = cb.ld_bands(sample([0.2, 0.6]), 0.8, ET, null)
        c = bands.critical_value
        q = lambda t: 1 - math.sqrt(1 - t)  # Beta(1, 2) quantile
        r = lambda t: math.sqrt(t)  # Beta(2, 1) quantile
        assert bands.lower.values == pytest.approx([q((1 - c) / 2), r((1 - c) / 2)], abs=1e-12)
        assert bands.upper.value_before_first == pytest.approx(q((1 + c) / 2), abs=1e-12)
        assert bands.upper.values == pytest.approx([r((1 + c) / 2), 1.0], abs=1e-12)

    def test_mismatch(self):
        null = cb.simulate_ln_null(3, HD, 2000)
        with pytest.raises(ValueError):
            cb.ld_bands(sample([1, 2]), 0.8, HD, null)
        with pytest.raises(ValueError):
            cb.ld_bands(sample([1, 2, 3]), 0.8, ET, null)

    def test_ties_warn_and_collapse_knots(self):
        null = cb.simulate_ln_null(4, HD, 2000)
        with pytest.warns(TiesWarning):
            bands = cb.ld_bands(sample([1, 2, 2, 3]), 0.8, HD, null)
        lo, hi = cb.order_statistic_intervals(4, bands.critical_value, HD)
        assert list(bands.knots) == [1, 2, 3]
        # at a tied knot the lower bound uses the last copy, the upper the next score
        assert bands.lower.values[1] == lo[2]
        assert bands.upper.values[0] == hi[1] and bands.upper.values[1] == hi[3]

    def test_no_warning_without_ties(self):
        null = cb.simulate_ln_null(3, HD, 2000)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cb.ld_bands(sample([1, 2, 3]), 0.8, HD, null)

    def test_narrow_at_extremes(self):
        s = sample(np.random.default_rng(8).random(30))
        ld = cb.make_bands(s, 0.8, cb.BandMethod.LD_HIGHEST_DENSITY, R)
        ks = cb.make_bands(s, 0.8, cb.BandMethod.KS, R)
        width = lambda b, j: b.upper.values[j] - b.lower.values[j]
        first_ld = ld.upper.value_before_first - ld.lower.value_before_first
        first_ks = ks.upper.value_before_first - ks.lower.value_before_first
        assert first_ld < first_ks
        assert width(ld, -2) < width(ks, -2)


METHODS = list(cb.BandMethod)


class TestBandProperties:
    @settings(max_examples=40, deadline=None)
    @given(scores_strategy, st.sampled_from(METHODS), st.floats(0.05, 0.95))
    def test_structural(self, values, method, conf):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TiesWarning)
            bands = cb.make_bands(sample(values), conf, method, 2000)
        for f in (bands.lower, bands.upper):
            full = np.concatenate([[f.value_before_first], f.values])
            assert np.all(np.diff(full) >= 0) and full.min() >= 0 and full.max() <= 1
        assert np.array_equal(bands.knots, np.unique(values))
        assert np.all(bands.lower.values <= bands.upper.values)
        assert bands.lower.value_before_first <= bands.upper.value_before_first

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=20, unique=True), st.sampled_from(METHODS))
    def test_nesting(self, values, method):
        s = sample(values)
        narrow = cb.make_bands(s, 0.5, method, 2000)
        wide = cb.make_bands(s, 0.9, method, 2000)
        assert np.all(wide.lower.values <= narrow.lower.values + 1e-15)
        assert np.all(wide.upper.values >= narrow.upper.values - 1e-15)
        assert wide.upper.value_before_first >= narrow.upper.value_before_first - 1e-15
