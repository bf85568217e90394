"""Unit tests for the least-squares baselines."""

import os
import sys
import unittest
from itertools import combinations

import numpy as np

# Add the src directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../src")))

from grca.baselines import fcls, fcls_cube, ncls, ncls_cube, nm_cube, nm_extended_matrix, nm_unmix
from grca.errors import DimensionError, RankDeficiencyError
from grca.mixing import build_interaction_basis
from grca.models import EndmemberSet, HyperCube


def nnls_by_enumeration(y, M):
    """Best unconstrained least-squares fit over every support with nonnegative coefficients."""
    best, best_cost = np.zeros(M.shape[1]), float(np.sum(y**2))
    for size in range(1, M.shape[1] + 1):
        for support in combinations(range(M.shape[1]), size):
            cols = list(support)
            coef = np.linalg.lstsq(M[:, cols], y, rcond=None)[0]
            if np.any(coef < 0):
                continue
            a = np.zeros(M.shape[1])
            a[cols] = coef
            cost = float(np.sum((y - M @ a) ** 2))
            if cost < best_cost:
                best, best_cost = a, cost
    return best


def simplex_grid_cost(y, M, step=1e-3):
    """Smallest residual over a regular grid of the 3-simplex."""
    n = int(round(1 / step))
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    A = np.stack([i[keep], j[keep], n - i[keep] - j[keep]]) * step
    return float(np.min(np.linalg.norm(y[:, None] - M @ A, axis=0)))


class TestNcls(unittest.TestCase):
    """Test cases for NCLS."""

    def test_orthonormal_examples(self):
        M = np.eye(4)[:, :3]
        np.testing.assert_allclose(ncls(M[:, 0], M).abundances, [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(ncls(-M[:, 0], M).abundances, [0, 0, 0], atol=1e-12)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            M = rng.uniform(0, 1, (8, 4))
            y = M @ rng.normal(0.3, 0.5, 4) + rng.normal(0, 0.05, 8)
            np.testing.assert_allclose(ncls(y, M).abundances, nnls_by_enumeration(y, M), atol=1e-6)

    def test_rank_deficient(self):
        M = np.ones((5, 2))
        with self.assertRaises(RankDeficiencyError):
            ncls(np.ones(5), M)

    def test_wrong_pixel_length(self):
        with self.assertRaises(DimensionError):
            ncls(np.ones(3), np.eye(4)[:, :2])


class TestFcls(unittest.TestCase):
    """Test cases for FCLS."""

    def test_pure_and_mixed_pixels(self):
        M = np.eye(4)[:, :3]
        np.testing.assert_allclose(fcls(M[:, 1], M).abundances, [0, 1, 0], atol=1e-10)
        y = (M[:, 0] + M[:, 1]) / 2
        np.testing.assert_allclose(fcls(y, M[:, :2]).abundances, [0.5, 0.5], atol=1e-10)

    def test_constraints_hold(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            M = rng.uniform(0, 1, (10, 3))
            y = rng.uniform(0, 1.5, 10)
            a = fcls(y, M).abundances
            self.assertTrue(np.all(a >= 0))
            self.assertAlmostEqual(float(a.sum()), 1.0, places=8)

    def test_matches_simplex_grid(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            M = rng.uniform(0, 1, (6, 3))
            y = rng.uniform(0, 1, 6)
            solution = fcls(y, M)
            # the optimum is at least as good as the best grid point
            self.assertLessEqual(solution.residual_norm, simplex_grid_cost(y, M) + 1e-9)

    def test_residuals_nest(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            M = rng.uniform(0, 1, (8, 3))
            y = rng.uniform(0, 1, 8)
            self.assertLessEqual(ncls(y, M).residual_norm, fcls(y, M).residual_norm + 1e-10)

    def test_feasible_perturbations_never_help(self):
        rng = np.random.default_rng(4)
        M = rng.uniform(0, 1, (8, 3))
        y = rng.uniform(0, 1, 8)
        a = fcls(y, M).abundances
        cost = np.sum((y - M @ a) ** 2)
        for _ in range(200):
            b = rng.dirichlet(np.ones(3))
            candidate = a + 0.01 * (b - a)
            self.assertGreaterEqual(np.sum((y - M @ candidate) ** 2), cost - 1e-10)


class TestNm(unittest.TestCase):
    """Test cases for the NM extended-matrix unmixer."""

    def setUp(self):
        rng = np.random.default_rng(5)
        self.endmembers = EndmemberSet(rng.uniform(0.1, 1.0, (12, 3)))
        self.basis = build_interaction_basis(self.endmembers)

    def test_extended_matrix_has_plain_cross_products(self):
        M = self.endmembers.M
        E = nm_extended_matrix(self.endmembers)
        self.assertEqual(E.shape, (12, 6))
        np.testing.assert_allclose(E[:, 3], M[:, 0] * M[:, 1])
        np.testing.assert_allclose(E[:, 5], M[:, 1] * M[:, 2])

    def test_pure_pixel(self):
        w = nm_unmix(self.endmembers.M[:, 0], self.basis).abundances
        np.testing.assert_allclose(w, [1, 0, 0, 0, 0, 0], atol=1e-8)

    def test_recovers_generating_weights(self):
        E = nm_extended_matrix(self.endmembers)
        w = np.array([0.3, 0.2, 0.1, 0.25, 0.05, 0.1])
        np.testing.assert_allclose(nm_unmix(E @ w, self.basis).abundances, w, atol=1e-4)


class TestCubes(unittest.TestCase):
    """Test cases for whole-image unmixing."""

    def test_cube_helpers_match_pixel_solvers(self):
        rng = np.random.default_rng(6)
        endmembers = EndmemberSet(rng.uniform(0.1, 1.0, (10, 3)))
        Y = HyperCube(rng.uniform(0, 1, (10, 3, 4)))
        for cube_fn, pixel_fn in ((ncls_cube, ncls), (fcls_cube, fcls)):
            A = cube_fn(Y, endmembers, threads=2).values
            self.assertEqual(A.shape, (3, 3, 4))
            np.testing.assert_allclose(A[:, 1, 2], pixel_fn(Y.data[:, 1, 2], endmembers).abundances)
        abundances, fitted = nm_cube(Y, endmembers)
        self.assertEqual(abundances.values.shape, (3, 3, 4))
        self.assertEqual(fitted.shape, (10, 3, 4))
        pixel = nm_unmix(Y.data[:, 2, 1], build_interaction_basis(endmembers))
        np.testing.assert_allclose(abundances.values[:, 2, 1], pixel.abundances[:3])
        np.testing.assert_allclose(fitted[:, 2, 1], nm_extended_matrix(endmembers) @ pixel.abundances)

    def test_band_mismatch(self):
        endmembers = EndmemberSet(np.eye(4)[:, :2] + 0.1)
        with self.assertRaises(DimensionError):
            ncls_cube(HyperCube(np.ones((3, 2, 2))), endmembers)


if __name__ == "__main__":
    unittest.main()
