"""Tests for the cohort comparison statistics."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from srtkit.stats import glm_cv, ks_test, overlapping_index, welch_test, _ols

import oracles


class TestOverlappingIndex:
    def test_identical_samples_give_one(self):
        sample = [1.0, 2.0, 2.5, 7.0, 7.0]
        assert overlapping_index(sample, sample, 1.0) == pytest.approx(1.0)

    def test_disjoint_samples_give_zero(self):
        assert overlapping_index([0.0, 1.0, 2.0], [10.0, 11.0], 1.0) == 0.0

    def test_half_overlapping_uniforms(self):
        # Uniform on [0, 10] vs uniform on [5, 15] share half their mass.
        rng = np.random.default_rng(2024)
        x = rng.uniform(0.0, 10.0, size=10_000)
        y = rng.uniform(5.0, 15.0, size=10_000)
        assert overlapping_index(x, y, 1.0) == pytest.approx(0.5, abs=0.05)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            overlapping_index([], [1.0], 1.0)
        with pytest.raises(ValueError):
            overlapping_index([1.0], [], 1.0)

    def test_non_positive_bin_width_rejected(self):
        with pytest.raises(ValueError):
            overlapping_index([1.0], [2.0], 0.0)
        with pytest.raises(ValueError):
            overlapping_index([1.0], [2.0], -1.0)

    @given(
        x=st.lists(st.floats(-50, 50), min_size=1, max_size=40),
        y=st.lists(st.floats(-50, 50), min_size=1, max_size=40),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_bounded(self, x, y):
        eta = overlapping_index(x, y, 2.0)
        assert eta == pytest.approx(overlapping_index(y, x, 2.0), abs=1e-12)
        assert 0.0 <= eta <= 1.0 + 1e-12

    def test_shift_by_whole_bins_preserves_index(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0.0, 3.0, size=200)
        y = rng.normal(2.0, 4.0, size=150)
        base = overlapping_index(x, y, 1.0)
        shifted = overlapping_index(x + 5.0, y + 5.0, 1.0)
        assert shifted == pytest.approx(base, abs=1e-12)


class TestWelchTest:
    def test_equal_means_give_zero_statistic(self):
        t, _, p = welch_test([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
        assert t == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(1.0, abs=1e-12)

    def test_large_shift_is_significant(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0.0, 1.0, size=100)
        y = x + 10.0
        _, _, p = welch_test(x, y)
        assert p < 1e-6

    def test_matches_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.normal(0.0, 1.0, size=int(rng.integers(5, 60)))
            y = rng.normal(0.5, 2.5, size=int(rng.integers(5, 60)))
            t, df, p = welch_test(x, y)
            ref = scipy.stats.ttest_ind(x, y, equal_var=False)
            assert t == pytest.approx(ref.statistic, rel=1e-12)
            assert p == pytest.approx(ref.pvalue, rel=1e-9)
            # Welch-Satterthwaite df is bounded by the classical extremes.
            assert min(x.size, y.size) - 1 <= df <= x.size + y.size - 2

    def test_affine_rescaling_preserves_statistic(self):
        rng = np.random.default_rng(5)
        x = rng.normal(10.0, 2.0, size=30)
        y = rng.normal(12.0, 3.0, size=25)
        t0, df0, p0 = welch_test(x, y)
        t1, df1, p1 = welch_test(4.0 * x - 7.0, 4.0 * y - 7.0)
        assert t1 == pytest.approx(t0, rel=1e-9)
        assert df1 == pytest.approx(df0, rel=1e-9)
        assert p1 == pytest.approx(p0, rel=1e-9)

    def test_too_small_samples_rejected(self):
        with pytest.raises(ValueError):
            welch_test([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            welch_test([1.0, 2.0], [3.0])

    def test_two_constant_samples_rejected(self):
        with pytest.raises(ValueError):
            welch_test([5.0, 5.0, 5.0], [7.0, 7.0])


class TestKsTest:
    def test_identical_samples(self):
        x = [1.0, 2.0, 3.0, 4.0]
        d, p = ks_test(x, list(x))
        assert d == 0.0
        assert p == pytest.approx(1.0)

    def test_disjoint_samples(self):
        d, p = ks_test([0.0, 1.0, 2.0], [10.0, 11.0, 12.0])
        assert d == 1.0
        assert p < 0.05

    def test_statistic_matches_scipy(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            x = rng.normal(0.0, 1.0, size=int(rng.integers(10, 80)))
            y = rng.normal(0.4, 1.5, size=int(rng.integers(10, 80)))
            d, p = ks_test(x, y)
            ref = scipy.stats.ks_2samp(x, y, method="asymp")
            assert d == pytest.approx(ref.statistic, abs=1e-12)
            # The effective-size correction shifts p slightly against
            # scipy's plain asymptotic value; they agree to a few percent.
            assert p == pytest.approx(ref.pvalue, abs=0.05)

    def test_monotone_rescaling_preserves_statistic(self):
        rng = np.random.default_rng(23)
        x = rng.normal(0.0, 1.0, size=40)
        y = rng.normal(1.0, 2.0, size=35)
        d0, p0 = ks_test(x, y)
        d1, p1 = ks_test(3.0 * x + 2.0, 3.0 * y + 2.0)
        assert d1 == pytest.approx(d0, abs=1e-12)
        assert p1 == pytest.approx(p0, abs=1e-12)

    def test_ties_between_samples_handled(self):
        d, p = ks_test([1.0, 2.0, 2.0, 3.0], [2.0, 2.0, 4.0])
        ref = scipy.stats.ks_2samp([1.0, 2.0, 2.0, 3.0], [2.0, 2.0, 4.0])
        assert d == pytest.approx(ref.statistic, abs=1e-12)
        assert 0.0 <= p <= 1.0

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            ks_test([], [1.0])


def _planted_rows(beta, n, sigma, seed):
    rng = np.random.default_rng(seed)
    slope = rng.uniform(1.0, 6.0, size=n)
    wrs50 = rng.uniform(-30.0, 50.0, size=n)
    diff = beta[0] + beta[1] * slope + beta[2] * wrs50
    if sigma > 0.0:
        diff = diff + rng.normal(0.0, sigma, size=n)
    return [(float(d), float(s), float(w)) for d, s, w in zip(diff, slope, wrs50)]


class TestGlmCv:
    def test_noiseless_rows_recovered_exactly(self):
        planted = (2.0, -3.5, 0.146)
        rows = _planted_rows(planted, n=60, sigma=0.0, seed=1)
        fit = glm_cv(rows, folds=10, seed=0)
        assert fit.mean_beta == pytest.approx(planted, abs=1e-9)
        for fold in fit.folds:
            assert fold.beta == pytest.approx(planted, abs=1e-9)
        assert fit.rmse_cv < 1e-9
        assert fit.rmse < 1e-9
        assert fit.bias == pytest.approx(0.0, abs=1e-9)
        assert fit.pearson_r == pytest.approx(1.0, abs=1e-9)

    def test_noisy_rmse_matches_noise_level(self):
        rows = _planted_rows((4.0, -2.5, 0.2), n=1000, sigma=3.0, seed=2)
        fit = glm_cv(rows, folds=10, seed=0)
        assert fit.rmse_cv == pytest.approx(3.0, abs=0.3)
        assert abs(fit.bias) < 0.4
        assert fit.pearson_r > 0.8

    def test_same_rows_and_seed_reproduce_fit(self):
        rows = _planted_rows((1.0, 0.5, -0.1), n=120, sigma=2.0, seed=3)
        first = glm_cv(rows, folds=10, seed=42)
        second = glm_cv(rows, folds=10, seed=42)
        assert first == second

    def test_seed_changes_fold_partition(self):
        rows = _planted_rows((1.0, 0.5, -0.1), n=80, sigma=2.0, seed=4)
        a = glm_cv(rows, folds=10, seed=0)
        b = glm_cv(rows, folds=10, seed=1)
        assert any(
            fa.beta != fb.beta for fa, fb in zip(a.folds, b.folds)
        )

    def test_collinear_design_rejected(self):
        rows = [(float(i), float(s), 2.0 * s - 1.0) for i, s in enumerate(range(1, 31))]
        with pytest.raises(ValueError, match="collinear design matrix"):
            glm_cv(rows, folds=10, seed=0)

    def test_too_few_rows_rejected(self):
        rows = _planted_rows((0.0, 1.0, 0.0), n=9, sigma=1.0, seed=5)
        with pytest.raises(ValueError):
            glm_cv(rows, folds=10, seed=0)

    def test_rescaling_slope_rescales_its_coefficient(self):
        rows = _planted_rows((4.0, -2.5, 0.2), n=200, sigma=1.0, seed=6)
        scale = 4.0
        scaled = [(d, scale * s, w) for d, s, w in rows]
        base = glm_cv(rows, folds=10, seed=0)
        other = glm_cv(scaled, folds=10, seed=0)
        assert other.mean_beta[0] == pytest.approx(base.mean_beta[0], rel=1e-9)
        assert other.mean_beta[1] == pytest.approx(base.mean_beta[1] / scale, rel=1e-9)
        assert other.mean_beta[2] == pytest.approx(base.mean_beta[2], rel=1e-9)
        assert other.rmse_cv == pytest.approx(base.rmse_cv, rel=1e-9)

    def test_summary_row_is_mean_of_folds(self):
        rows = _planted_rows((2.0, -1.0, 0.05), n=150, sigma=2.5, seed=7)
        fit = glm_cv(rows, folds=10, seed=0)
        assert len(fit.folds) == 10
        assert [f.fold for f in fit.folds] == list(range(1, 11))
        stacked = np.array([f.beta for f in fit.folds])
        assert fit.mean_beta == pytest.approx(stacked.mean(axis=0), rel=1e-12)
        assert fit.rmse_cv == pytest.approx(
            math.sqrt(np.mean([f.mse for f in fit.folds])), rel=1e-12
        )
        for fold in fit.folds:
            assert all(0.0 <= v <= 1.0 for v in fold.p)

    def test_ols_matches_reference_fit(self):
        rng = np.random.default_rng(8)
        features = rng.normal(0.0, 2.0, size=(40, 2))
        target = rng.normal(1.0, 3.0, size=40)
        design = np.column_stack([np.ones(40), features])
        beta, se = _ols(design, target)
        ref_beta, ref_se = oracles.ols_fit(features.tolist(), target.tolist())
        assert beta == pytest.approx(ref_beta, rel=1e-9)
        assert se == pytest.approx(ref_se, rel=1e-9)
