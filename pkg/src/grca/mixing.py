"""
Mixing model, polynomial nonlinearity basis and Gaussian likelihood.

Pixels follow y = M a + phi(gamma) + e with e ~ N(0, diag(sigma2)), where
phi(gamma) is a linear combination of the endmember interaction spectra.
"""

from itertools import combinations
from typing import Union

import numpy as np

from grca.errors import DimensionError, DomainError
from grca.models import (
    AbundanceField,
    EndmemberSet,
    HyperCube,
    InteractionBasis,
    NoiseVariances,
    NonlinField,
)

ArrayOrField = Union[np.ndarray, AbundanceField, NonlinField]


def _values(field: ArrayOrField) -> np.ndarray:
    if isinstance(field, (AbundanceField, NonlinField)):
        return field.values
    return np.asarray(field, dtype=np.float64)


def interaction_labels(n_endmembers: int):
    """Cross pairs (k < k') in lexicographic order, then the squares (k, k)."""
    cross = list(combinations(range(1, n_endmembers + 1), 2))
    squares = [(k, k) for k in range(1, n_endmembers + 1)]
    return tuple(cross + squares)


def build_interaction_basis(endmembers: EndmemberSet) -> InteractionBasis:
    """Build G = [M, sqrt(2) m_k*m_k' (k < k'), m_k*m_k]."""
    M = endmembers.M
    R = endmembers.n_endmembers
    labels = interaction_labels(R)
    columns = []
    for k, kp in labels:
        product = M[:, k - 1] * M[:, kp - 1]
        columns.append(product if k == kp else np.sqrt(2.0) * product)
    G = np.column_stack([M] + columns)
    return InteractionBasis(G=G, n_endmembers=R, column_labels=labels)


def phi(gamma: np.ndarray, basis: InteractionBasis) -> np.ndarray:
    """Nonlinear perturbation phi(gamma) of one pixel."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (basis.n_interactions,):
        raise DimensionError(
            f"gamma must have length {basis.n_interactions}, got shape {gamma.shape}"
        )
    return basis.nonlinear @ gamma


def reconstruct_pixel(
    a: np.ndarray, gamma: np.ndarray, basis: InteractionBasis
) -> np.ndarray:
    """Noise-free pixel M a + phi(gamma)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (basis.n_endmembers,):
        raise DimensionError(
            f"a must have length {basis.n_endmembers}, got shape {a.shape}"
        )
    return basis.M @ a + phi(gamma, basis)


def _check_fields(A: np.ndarray, Gamma: np.ndarray, basis: InteractionBasis) -> None:
    if A.ndim != 3 or A.shape[0] != basis.n_endmembers:
        raise DimensionError(f"Abundances must be (R={basis.n_endmembers}, rows, cols), got {A.shape}")
    if Gamma.shape != (basis.n_interactions,) + A.shape[1:]:
        raise DimensionError(
            f"Nonlinearity field must be {(basis.n_interactions,) + A.shape[1:]}, got {Gamma.shape}"
        )


def reconstruct_cube(
    A: ArrayOrField, Gamma: ArrayOrField, basis: InteractionBasis
) -> np.ndarray:
    """Noise-free image (L, N_row, N_col) = G [A; Gamma] pixel by pixel."""
    A, Gamma = _values(A), _values(Gamma)
    _check_fields(A, Gamma, basis)
    coefficients = np.concatenate([A, Gamma], axis=0)
    return np.einsum("lk,kij->lij", basis.G, coefficients)


def phi_energy_map(Gamma: ArrayOrField, basis: InteractionBasis) -> np.ndarray:
    """Per-pixel ||phi(gamma)||^2 of a nonlinearity field."""
    Gamma = _values(Gamma)
    if Gamma.shape[0] != basis.n_interactions:
        raise DimensionError(f"Nonlinearity field needs {basis.n_interactions} layers")
    perturbation = np.einsum("lk,kij->lij", basis.nonlinear, Gamma)
    return np.sum(perturbation**2, axis=0)


def residual_cube(
    Y: HyperCube, A: ArrayOrField, Gamma: ArrayOrField, basis: InteractionBasis
) -> np.ndarray:
    """Y minus its noise-free reconstruction."""
    if Y.n_bands != basis.n_bands:
        raise DimensionError(f"Cube has {Y.n_bands} bands, basis has {basis.n_bands}")
    X = reconstruct_cube(A, Gamma, basis)
    if X.shape != Y.data.shape:
        raise DimensionError(f"Fields cover {X.shape[1:]}, cube is {Y.data.shape[1:]}")
    return Y.data - X


def log_likelihood(
    Y: HyperCube,
    A: ArrayOrField,
    Gamma: ArrayOrField,
    sigma2: Union[NoiseVariances, np.ndarray],
    basis: InteractionBasis,
) -> float:
    """Fully normalised Gaussian log-likelihood of the whole image."""
    s2 = sigma2.sigma2 if isinstance(sigma2, NoiseVariances) else np.asarray(sigma2, float)
    if s2.shape != (Y.n_bands,):
        raise DimensionError(f"sigma2 must have length {Y.n_bands}, got {s2.shape}")
    if np.any(s2 <= 0):
        raise DomainError("Noise variances must be > 0")
    residual = residual_cube(Y, A, Gamma, basis)
    log_norm = -0.5 * Y.n_pixels * np.sum(np.log(2.0 * np.pi * s2))
    quadratic = -0.5 * np.sum(np.sum(residual**2, axis=(1, 2)) / s2)
    return float(log_norm + quadratic)
