"""Unit tests for truncated Gaussian sampling."""

import os
import sys
import unittest

import numpy as np
from scipy.stats import truncnorm

# Add the src directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../src")))

from grca.errors import DimensionError, SingularSystemError
from grca.sampler.truncated import (
    Support,
    exact_hmc,
    sample_trunc_mvn,
    truncated_standard_normal,
)


class TestUnivariate(unittest.TestCase):
    """Test cases for the univariate generator."""

    def test_draws_respect_limits(self):
        rng = np.random.default_rng(0)
        lower = np.array([-np.inf, -1.0, 0.0, 2.0, 5.0, -3.0, -0.1])
        upper = np.array([np.inf, 1.0, np.inf, np.inf, 6.0, -2.5, 0.1])
        for _ in range(50):
            x = truncated_standard_normal(lower, upper, rng)
            self.assertTrue(np.all(x >= lower) and np.all(x <= upper))

    def test_moments_match_scipy(self):
        rng = np.random.default_rng(1)
        n = 40000
        for a, b in ((0.0, np.inf), (1.5, np.inf), (-0.5, 0.3), (-4.0, -3.0)):
            x = truncated_standard_normal(np.full(n, a), np.full(n, b), rng)
            mean, var = truncnorm.stats(a, b, moments="mv")
            self.assertAlmostEqual(float(x.mean()), float(mean), delta=4 * np.sqrt(float(var) / n))

    def test_mismatched_limits(self):
        with self.assertRaises(DimensionError):
            truncated_standard_normal(np.zeros(2), np.ones(3), np.random.default_rng(0))


class TestMultivariate(unittest.TestCase):
    """Test cases for sample_trunc_mvn."""

    def test_half_normal_mean(self):
        rng = np.random.default_rng(2)
        draws = np.array(
            [sample_trunc_mvn(np.zeros(1), np.eye(1), Support.POSITIVE_ORTHANT, rng)[0] for _ in range(20000)]
        )
        self.assertTrue(np.all(draws >= 0))
        self.assertAlmostEqual(float(draws.mean()), np.sqrt(2 / np.pi), delta=0.02)

    def test_full_support_moments(self):
        rng = np.random.default_rng(3)
        mu = np.array([1.0, -2.0])
        Sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
        draws = np.array([sample_trunc_mvn(mu, Sigma, Support.FULL, rng) for _ in range(20000)])
        np.testing.assert_allclose(draws.mean(axis=0), mu, atol=0.06)
        np.testing.assert_allclose(np.cov(draws.T), Sigma, atol=0.1)

    def test_correlated_orthant_matches_rejection_oracle(self):
        rng = np.random.default_rng(4)
        mu = np.array([0.3, -0.2])
        Sigma = np.array([[1.0, 0.7], [0.7, 1.0]])
        draws = np.array([sample_trunc_mvn(mu, Sigma, Support.POSITIVE_ORTHANT, rng) for _ in range(20000)])

        oracle = rng.multivariate_normal(mu, Sigma, size=400000)
        oracle = oracle[np.all(oracle >= 0, axis=1)]
        se = draws.std(axis=0) / np.sqrt(len(draws))
        np.testing.assert_array_less(np.abs(draws.mean(axis=0) - oracle.mean(axis=0)), 4 * se + 0.005)

    def test_mask_leaves_free_coordinates_unconstrained(self):
        rng = np.random.default_rng(5)
        mask = np.array([True, False])
        draws = np.array(
            [sample_trunc_mvn(np.array([0.0, -3.0]), np.eye(2), mask, rng) for _ in range(2000)]
        )
        self.assertTrue(np.all(draws[:, 0] >= 0))
        self.assertTrue(np.any(draws[:, 1] < 0))

    def test_far_tail_diagonal_is_drawn_exactly(self):
        rng = np.random.default_rng(6)
        draws = np.array(
            [sample_trunc_mvn(np.array([-6.0, -6.0]), np.eye(2), Support.POSITIVE_ORTHANT, rng) for _ in range(4000)]
        )
        self.assertTrue(np.all(draws >= 0))
        expected = truncnorm.mean(6.0, np.inf, loc=-6.0)
        np.testing.assert_allclose(draws.mean(axis=0), expected, rtol=0.05)

    def test_far_tail_correlated_falls_back_to_hmc(self):
        rng = np.random.default_rng(11)
        mu = np.array([-6.0, -6.0])
        Sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
        x = sample_trunc_mvn(mu, Sigma, Support.POSITIVE_ORTHANT, rng)
        self.assertTrue(np.all(x >= 0))
        self.assertTrue(np.all(np.isfinite(x)))

    def test_non_spd_covariance(self):
        with self.assertRaises(SingularSystemError):
            sample_trunc_mvn(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), Support.FULL, np.random.default_rng(0))
        with self.assertRaises(DimensionError):
            sample_trunc_mvn(np.zeros(2), np.eye(3), Support.FULL, np.random.default_rng(0))


class TestExactHmc(unittest.TestCase):
    """Test cases for the batched exact HMC sampler."""

    def batch(self, mu, Sigma, n):
        return np.tile(mu, (n, 1)), np.tile(np.linalg.inv(Sigma), (n, 1, 1))

    def assert_matches_oracle(self, x, mu, Sigma, rng, slack):
        oracle = rng.multivariate_normal(mu, Sigma, size=400000)
        oracle = oracle[np.all(oracle >= 0, axis=1)]
        se = x.std(axis=0) / np.sqrt(len(x))
        np.testing.assert_array_less(np.abs(x.mean(axis=0) - oracle.mean(axis=0)), 4 * se + slack)
        np.testing.assert_array_less(np.abs(x.std(axis=0) - oracle.std(axis=0)), 4 * se + slack)

    def test_stationary_moments(self):
        rng = np.random.default_rng(7)
        mu = np.array([0.5, -0.5])
        Sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
        n = 4000
        means, Q = self.batch(mu, Sigma, n)
        x = np.abs(rng.standard_normal((n, 2)))
        x = exact_hmc(x, means, Q, np.array([True, True]), rng, n_trajectories=3)
        self.assertTrue(np.all(x >= 0))
        self.assert_matches_oracle(x, mu, Sigma, rng, 0.01)

    def test_moves_along_narrow_ridge(self):
        rng = np.random.default_rng(8)
        mu = np.array([0.4, 0.1])
        Sigma = np.array([[1.0, 0.995], [0.995, 1.0]])
        n = 4000
        means, Q = self.batch(mu, Sigma, n)
        x = exact_hmc(np.zeros((n, 2)), means, Q, np.array([True, True]), rng, n_trajectories=3)
        self.assertTrue(np.all(x >= 0))
        self.assert_matches_oracle(x, mu, Sigma, rng, 0.02)

    def test_unconstrained_trajectory_is_an_exact_draw(self):
        rng = np.random.default_rng(9)
        mu = np.array([1.0, -2.0, 0.5])
        Sigma = np.array([[2.0, 0.6, 0.0], [0.6, 1.0, -0.3], [0.0, -0.3, 0.5]])
        n = 20000
        means, Q = self.batch(mu, Sigma, n)
        x = exact_hmc(np.full((n, 3), 50.0), means, Q, np.zeros(3, dtype=bool), rng)
        np.testing.assert_allclose(x.mean(axis=0), mu, atol=0.05)
        np.testing.assert_allclose(np.cov(x.T), Sigma, atol=0.08)

    def test_badly_scaled_precision(self):
        rng = np.random.default_rng(10)
        n = 200
        Q = np.tile(np.array([[1e4, 50.0], [50.0, 1e12]]), (n, 1, 1))
        means = np.tile(np.array([0.2, -1e-7]), (n, 1))
        x = exact_hmc(np.zeros((n, 2)), means, Q, np.array([True, True]), rng, n_trajectories=2)
        self.assertTrue(np.all(np.isfinite(x)))
        self.assertTrue(np.all(x >= 0))
        self.assertLess(float(x[:, 1].max()), 1e-4)
        self.assertAlmostEqual(float(x[:, 0].mean()), 0.2, delta=0.005)

    def test_singular_precision(self):
        with self.assertRaises(SingularSystemError):
            exact_hmc(
                np.zeros((1, 2)),
                np.zeros((1, 2)),
                np.array([[[1.0, 2.0], [2.0, 1.0]]]),
                np.array([True, True]),
                np.random.default_rng(0),
            )


if __name__ == "__main__":
    unittest.main()
