import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturehmm.gmm import (
    VAR_FLOOR,
    GaussianMixture,
    gmm_fit,
    gmm_log_pdf,
    logsumexp,
    weighted_em_update,
)
from gesturehmm.signal import ValidationError

from oracles import random_mixture, scalar_mixture_logpdf


class TestLogSumExp:
    def test_matches_naive(self):
        a = np.array([[0.1, -2.0, 3.0], [1.0, 1.0, 1.0]])
        np.testing.assert_allclose(logsumexp(a, axis=1), np.log(np.exp(a).sum(axis=1)))

    def test_large_values(self):
        assert logsumexp(np.array([1000.0, 1000.0])) == pytest.approx(1000 + math.log(2))

    def test_all_neg_inf(self):
        assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf

    def test_keepdims(self):
        assert logsumexp(np.zeros((3, 4)), axis=1, keepdims=True).shape == (3, 1)


class TestDensity:
    def test_standard_normal_peak(self):
        g = GaussianMixture([1.0], [[0.0]], [[1.0]])
        assert gmm_log_pdf(g, [0.0]) == pytest.approx(-0.9189385332046727, abs=1e-15)

    def test_identical_components(self):
        g1 = GaussianMixture([1.0], [[0.3, -1]], [[2.0, 0.5]])
        g2 = GaussianMixture([0.5, 0.5], [[0.3, -1]] * 2, [[2.0, 0.5]] * 2)
        x = [1.1, 0.2]
        assert gmm_log_pdf(g2, x) == pytest.approx(gmm_log_pdf(g1, x), abs=1e-14)

    def test_two_term_sum(self):
        g = GaussianMixture([0.3, 0.7], [[-1.0], [2.0]], [[1.0], [4.0]])
        direct = (0.3 * math.exp(-(1.5 ** 2) / 2) / math.sqrt(2 * math.pi)
                  + 0.7 * math.exp(-(1.5 ** 2) / 8) / math.sqrt(8 * math.pi))
        assert gmm_log_pdf(g, [0.5]) == pytest.approx(math.log(direct), rel=1e-13)

    def test_random_against_scalar_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            M, D = rng.integers(1, 4), rng.integers(1, 5)
            g = random_mixture(rng, M, D)
            x = rng.normal(0, 2, D)
            ref = scalar_mixture_logpdf(g.weights, g.means, g.variances, x)
            assert gmm_log_pdf(g, x) == pytest.approx(ref, rel=1e-12)

    def test_far_point_finite(self):
        g = GaussianMixture([0.5, 0.5], [[0.0], [1.0]], [[1e-6], [1e-6]])
        assert np.isfinite(gmm_log_pdf(g, [1e4]))

    def test_dimension_mismatch(self):
        g = GaussianMixture([1.0], [[0.0, 0.0]], [[1.0, 1.0]])
        with pytest.raises(ValidationError):
            gmm_log_pdf(g, [0.0])

    @pytest.mark.parametrize("w,var", [([0.5, 0.6], [[1.0], [1.0]]), ([0.5, 0.5], [[1.0], [0.0]]),
                                       ([1.0, 0.0], [[1.0], [1.0]])])
    def test_invalid_parameters(self, w, var):
        with pytest.raises(ValidationError):
            GaussianMixture(w, [[0.0], [1.0]], var)


class TestFit:
    def test_single_gaussian_recovery(self):
        x = np.random.default_rng(0).normal(3.0, 2.0, size=(500, 1))
        g = gmm_fit(x, 1, seed=0)
        assert abs(g.means[0, 0] - 3.0) < 3 * 2 / math.sqrt(500)
        assert abs(g.variances[0, 0] - 4.0) < 0.25 * 4.0

    def test_saturation(self):
        x = np.array([[0.0], [1.0], [5.0], [9.0]])
        g = gmm_fit(x, 4, seed=0, tol=1e-14, max_iter=500)
        np.testing.assert_allclose(np.sort(g.means[:, 0]), x[:, 0], atol=1e-3)
        assert np.all(g.variances <= 1e-4)
        assert np.all(g.variances >= VAR_FLOOR)
        assert np.isfinite(g.report.final_log_likelihood)

    def test_two_clusters(self):
        rng = np.random.default_rng(3)
        x = np.concatenate([rng.normal(-5, 1, (300, 2)), rng.normal(5, 1, (100, 2))])
        g = gmm_fit(x, 2, seed=1)
        order = np.argsort(g.means[:, 0])
        np.testing.assert_allclose(g.means[order, 0], [-5, 5], atol=0.3)
        np.testing.assert_allclose(g.weights[order], [0.75, 0.25], atol=0.02)

    def test_deterministic(self):
        x = np.random.default_rng(1).normal(size=(80, 3))
        a, b = gmm_fit(x, 3, seed=5), gmm_fit(x, 3, seed=5)
        assert a.same_parameters(b)

    def test_constant_data_floor(self):
        g = gmm_fit(np.ones((10, 2)), 2, seed=0)
        np.testing.assert_array_equal(g.variances, VAR_FLOOR)
        assert "duplicate_components" in g.report.flags

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            gmm_fit(np.zeros((2, 1)), 3)

    def test_weighted_fit_ignores_zero_weight(self):
        rng = np.random.default_rng(2)
        x = np.concatenate([rng.normal(0, 1, (100, 1)), rng.normal(50, 1, (100, 1))])
        w = np.r_[np.ones(100), np.zeros(100)]
        g = gmm_fit(x, 1, sample_weight=w)
        assert abs(g.means[0, 0]) < 0.5

    def test_em_update_reports_input_likelihood(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 2))
        g = random_mixture(rng, 2, 2)
        _, ll = weighted_em_update(g, x)
        assert ll == pytest.approx(np.mean(g.log_pdf(x)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3))
    def test_monotone(self, seed, M, D):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(40, D)) * rng.uniform(0.5, 3, D)
        trace = np.array(gmm_fit(x, M, seed=seed, tol=0.0, max_iter=40).report.log_likelihoods)
        assert np.all(np.diff(trace) >= -1e-8)
