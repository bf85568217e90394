"""
Posterior point estimates and nonlinearity detection from a sampler run.

Every estimator is a running mean over the retained draws, so it accepts
any iterable of ChainSample (a ChainOutput, a list, or a generator).
"""

from typing import Callable, Iterable, Union

import numpy as np

from grca.errors import DimensionError, DomainError, GrcaError
from grca.mixing import phi_energy_map, reconstruct_cube
from grca.models import (
    AbundanceField,
    ChainOutput,
    ChainSample,
    DetectionResult,
    EndmemberSet,
    HyperCube,
    InteractionBasis,
)

DEFAULT_ETA = 2.0

Samples = Union[ChainOutput, Iterable[ChainSample]]


def _samples(chain: Samples) -> Iterable[ChainSample]:
    return chain.samples if isinstance(chain, ChainOutput) else chain


def _running_mean(chain: Samples, statistic: Callable[[ChainSample], np.ndarray]) -> np.ndarray:
    total = None
    count = 0
    for sample in _samples(chain):
        value = np.asarray(statistic(sample), dtype=np.float64)
        total = value.copy() if total is None else total + value
        count += 1
    if count == 0:
        raise GrcaError("Chain holds no retained samples")
    return total / count


def mmse_abundances(chain: Samples) -> AbundanceField:
    """Posterior mean of the abundance matrix."""
    return AbundanceField(_running_mean(chain, lambda sample: sample.A))


def mmse_nonlin_energy(chain: Samples, basis: InteractionBasis) -> np.ndarray:
    """Posterior mean of ||phi(gamma)||^2 for every pixel."""
    return _running_mean(chain, lambda sample: phi_energy_map(sample.gamma, basis))


def mmse_s(chain: Samples) -> np.ndarray:
    """Posterior mean of the nonlinearity scales."""
    return _running_mean(chain, lambda sample: sample.S)


def mmse_s2(chain: Samples) -> np.ndarray:
    """Posterior mean of the squared nonlinearity scales."""
    return _running_mean(chain, lambda sample: sample.S**2)


def mmse_reconstruction(chain: Samples, basis: InteractionBasis) -> np.ndarray:
    """Posterior mean of the noise-free image, shape (L, N_row, N_col)."""
    return _running_mean(chain, lambda sample: reconstruct_cube(sample.A, sample.gamma, basis))


def log_energy_map(chain: Samples, basis: InteractionBasis) -> np.ndarray:
    """log10 of the mean nonlinearity energy; pixels with zero energy map to -inf."""
    energy = mmse_nonlin_energy(chain, basis)
    with np.errstate(divide="ignore"):
        return np.log10(energy)


def _ratio_exceeds(
    sample: ChainSample, Y: HyperCube, M: np.ndarray, basis: InteractionBasis, eta: float
) -> np.ndarray:
    """Indicator of T > eta, T = ||phi||^2 / ||y - M a - phi||^2, per pixel.

    A zero residual with nonzero phi counts as an exceedance; zero residual
    with zero phi gives T = 0.
    """
    perturbation = np.einsum("lk,kij->lij", basis.nonlinear, sample.gamma)
    residual = Y.data - np.einsum("lr,rij->lij", M, sample.A) - perturbation
    numerator = np.sum(perturbation**2, axis=0)
    denominator = np.sum(residual**2, axis=0)
    return numerator > eta * denominator


def nonlin_probability(
    chain: Samples,
    Y: HyperCube,
    M: Union[EndmemberSet, np.ndarray],
    basis: InteractionBasis,
    eta: float = DEFAULT_ETA,
) -> np.ndarray:
    """Fraction of retained draws whose nonlinearity-to-residual energy ratio exceeds eta."""
    if eta <= 0:
        raise DomainError(f"eta must be > 0, got {eta}")
    M = M.M if isinstance(M, EndmemberSet) else np.asarray(M, dtype=np.float64)
    if M.shape[0] != Y.n_bands or basis.n_bands != Y.n_bands:
        raise DimensionError(f"Cube has {Y.n_bands} bands, endmembers have {M.shape[0]}")
    return _running_mean(
        chain, lambda sample: _ratio_exceeds(sample, Y, M, basis, eta).astype(np.float64)
    )


def detect(
    prob_map: np.ndarray, a0: float = 1.0, a1: float = 1.0, eta: float = DEFAULT_ETA
) -> DetectionResult:
    """Flag pixels whose nonlinearity probability exceeds a1 / (a0 + a1)."""
    if a0 <= 0 or a1 <= 0:
        raise DomainError(f"a0 and a1 must be > 0, got {a0}, {a1}")
    prob_map = np.asarray(prob_map, dtype=np.float64)
    if np.any(prob_map < 0) or np.any(prob_map > 1):
        raise DomainError("Probabilities must lie in [0, 1]")
    return DetectionResult(
        prob_map=prob_map,
        decision_map=prob_map > a1 / (a0 + a1),
        eta=eta,
        a0=a0,
        a1=a1,
    )
