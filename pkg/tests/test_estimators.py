"""Unit tests for the posterior estimators."""

import os
import sys
import unittest

import numpy as np

# Add the src directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../src")))

from grca.errors import DomainError, GrcaError
from grca.estimators import (
    detect,
    log_energy_map,
    mmse_abundances,
    mmse_nonlin_energy,
    mmse_reconstruction,
    mmse_s,
    mmse_s2,
    nonlin_probability,
)
from grca.mixing import build_interaction_basis, phi, reconstruct_cube
from grca.models import ChainOutput, ChainSample, EndmemberSet, HyperCube


def random_chain(n_samples=7, R=2, K=3, n_row=3, n_col=4, seed=0):
    rng = np.random.default_rng(seed)
    return [
        ChainSample(
            t=t,
            A=rng.uniform(0, 1, (R, n_row, n_col)),
            gamma=rng.normal(0, 0.1, (K, n_row, n_col)),
            S=rng.uniform(0.1, 2, (n_row, n_col)),
        )
        for t in range(1, n_samples + 1)
    ]


class TestMmse(unittest.TestCase):
    """Test cases for the running-mean estimators."""

    def setUp(self):
        self.basis = build_interaction_basis(EndmemberSet(np.random.default_rng(1).uniform(0.2, 1, (5, 2))))
        self.chain = random_chain()

    def test_single_sample_is_identity(self):
        sample = self.chain[0]
        np.testing.assert_array_equal(mmse_abundances([sample]).values, sample.A)
        np.testing.assert_array_equal(mmse_s([sample]), sample.S)

    def test_means_match_stacked_oracle(self):
        np.testing.assert_allclose(
            mmse_abundances(self.chain).values, np.mean([s.A for s in self.chain], axis=0)
        )
        np.testing.assert_allclose(mmse_s(self.chain), np.mean([s.S for s in self.chain], axis=0))
        np.testing.assert_allclose(mmse_s2(self.chain), np.mean([s.S**2 for s in self.chain], axis=0))
        expected = np.mean(
            [reconstruct_cube(s.A, s.gamma, self.basis) for s in self.chain], axis=0
        )
        np.testing.assert_allclose(mmse_reconstruction(self.chain, self.basis), expected)

    def test_nonlin_energy_matches_pixel_loop(self):
        energy = mmse_nonlin_energy(self.chain, self.basis)
        for i in range(3):
            for j in range(4):
                expected = np.mean([np.sum(phi(s.gamma[:, i, j], self.basis) ** 2) for s in self.chain])
                self.assertAlmostEqual(energy[i, j], expected)
        self.assertTrue(np.all(energy >= 0))

    def test_zero_gamma_gives_zero_energy(self):
        chain = [ChainSample(t=s.t, A=s.A, gamma=np.zeros_like(s.gamma), S=s.S) for s in self.chain]
        np.testing.assert_array_equal(mmse_nonlin_energy(chain, self.basis), 0.0)
        self.assertTrue(np.all(np.isneginf(log_energy_map(chain, self.basis))))

    def test_order_does_not_matter(self):
        shuffled = self.chain[::-1]
        np.testing.assert_allclose(mmse_s(shuffled), mmse_s(self.chain))

    def test_accepts_generators_and_chain_output(self):
        output = ChainOutput(samples=self.chain, alpha3_trace=np.ones(7), loglik_trace=np.zeros(7))
        from_generator = mmse_s(s for s in self.chain)
        np.testing.assert_allclose(mmse_s(output), from_generator)

    def test_empty_chain(self):
        with self.assertRaises(GrcaError):
            mmse_abundances([])
        with self.assertRaises(GrcaError):
            mmse_nonlin_energy(iter([]), self.basis)


class TestNonlinProbability(unittest.TestCase):
    """Test cases for the posterior nonlinearity probability."""

    def setUp(self):
        rng = np.random.default_rng(2)
        self.endmembers = EndmemberSet(rng.uniform(0.2, 1, (6, 2)))
        self.basis = build_interaction_basis(self.endmembers)
        self.A = rng.uniform(0, 1, (2, 2, 2))

    def sample(self, gamma_value, t=1):
        return ChainSample(t=t, A=self.A, gamma=np.full((3, 2, 2), gamma_value), S=np.ones((2, 2)))

    def test_linear_draws_give_zero_probability(self):
        Y = HyperCube(reconstruct_cube(self.A, np.zeros((3, 2, 2)), self.basis) + 0.01)
        prob = nonlin_probability([self.sample(0.0), self.sample(0.0)], Y, self.endmembers, self.basis)
        np.testing.assert_array_equal(prob, 0.0)

    def test_half_of_draws_exceed(self):
        # data hold an exact nonlinear pixel: the matching draw has zero residual
        Y = HyperCube(reconstruct_cube(self.A, np.full((3, 2, 2), 0.2), self.basis))
        chain = [self.sample(0.2, 1), self.sample(0.0, 2)]
        prob = nonlin_probability(chain, Y, self.endmembers.M, self.basis, eta=2.0)
        np.testing.assert_array_equal(prob, 0.5)

    def test_probability_grid(self):
        rng = np.random.default_rng(3)
        Y = HyperCube(reconstruct_cube(self.A, np.full((3, 2, 2), 0.1), self.basis))
        chain = [self.sample(g, t) for t, g in enumerate(rng.uniform(0, 0.2, 9), start=1)]
        prob = nonlin_probability(chain, Y, self.endmembers, self.basis, eta=1.0)
        np.testing.assert_allclose(prob * 9, np.round(prob * 9))
        self.assertTrue(np.all((prob >= 0) & (prob <= 1)))

    def test_probability_decreases_with_eta(self):
        rng = np.random.default_rng(4)
        Y = HyperCube(reconstruct_cube(self.A, np.full((3, 2, 2), 0.1), self.basis) + rng.normal(0, 0.01, (6, 2, 2)))
        chain = [self.sample(g, t) for t, g in enumerate(rng.uniform(0, 0.2, 20), start=1)]
        probs = [nonlin_probability(chain, Y, self.endmembers, self.basis, eta) for eta in (0.5, 1, 2, 4)]
        for low, high in zip(probs, probs[1:]):
            self.assertTrue(np.all(high <= low))

    def test_bad_eta(self):
        Y = HyperCube(np.ones((6, 2, 2)))
        with self.assertRaises(DomainError):
            nonlin_probability([self.sample(0.0)], Y, self.endmembers, self.basis, eta=0.0)


class TestDetect(unittest.TestCase):
    """Test cases for the Bayesian decision rule."""

    def test_default_threshold(self):
        result = detect(np.array([[0.51, 0.5], [0.0, 1.0]]))
        np.testing.assert_array_equal(result.decision_map, [[True, False], [False, True]])
        self.assertEqual((result.a0, result.a1, result.eta), (1.0, 1.0, 2.0))

    def test_asymmetric_losses(self):
        result = detect(np.array([0.2, 0.26, 0.3]), a0=3.0, a1=1.0)
        np.testing.assert_array_equal(result.decision_map, [False, True, True])

    def test_raising_threshold_never_adds_detections(self):
        prob = np.random.default_rng(5).uniform(0, 1, (10, 10))
        loose = detect(prob, a0=3.0, a1=1.0).decision_map
        strict = detect(prob, a0=1.0, a1=3.0).decision_map
        self.assertFalse(np.any(strict & ~loose))

    def test_bad_inputs(self):
        with self.assertRaises(DomainError):
            detect(np.zeros((2, 2)), a0=0.0)
        with self.assertRaises(DomainError):
            detect(np.full((2, 2), 1.5))


if __name__ == "__main__":
    unittest.main()
