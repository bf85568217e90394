"""
Constrained least-squares unmixers: NCLS, FCLS and the NM extended-matrix
variant.

NCLS is scipy's Lawson-Hanson NNLS. FCLS starts from NNLS on the
sum-to-one augmented system and then settles the active set exactly with
the equality-constrained KKT system.
"""

from itertools import combinations
from typing import Callable, Tuple, Union

import numpy as np
from scipy.optimize import nnls

from grca.errors import DimensionError, RankDeficiencyError
from grca.models import AbundanceField, EndmemberSet, HyperCube, InteractionBasis, LsqSolution
from grca.workers import map_rows

MatrixLike = Union[np.ndarray, EndmemberSet]

# Weight of the sum-to-one row relative to the data rows.
_STO_WEIGHT = 1e3
_KKT_TOL = 1e-10


def _matrix(M: MatrixLike) -> np.ndarray:
    return M.M if isinstance(M, EndmemberSet) else np.asarray(M, dtype=np.float64)


def _check(y: np.ndarray, M: np.ndarray) -> None:
    if y.shape != (M.shape[0],):
        raise DimensionError(f"Pixel has shape {y.shape}, endmembers have {M.shape[0]} bands")
    if np.linalg.matrix_rank(M) < M.shape[1]:
        raise RankDeficiencyError(f"Endmember matrix of shape {M.shape} is rank deficient")


def _solution(y: np.ndarray, M: np.ndarray, a: np.ndarray) -> LsqSolution:
    return LsqSolution(abundances=a, residual_norm=float(np.linalg.norm(y - M @ a)))


def ncls(y: np.ndarray, M: MatrixLike) -> LsqSolution:
    """argmin ||y - M a|| subject to a >= 0."""
    M = _matrix(M)
    y = np.asarray(y, dtype=np.float64)
    _check(y, M)
    a, _ = nnls(M, y)
    return _solution(y, M, a)


def _equality_ls(y: np.ndarray, M: np.ndarray, active: np.ndarray):
    """Least squares on the `active` columns with sum(a) = 1; returns (a, lambda)."""
    A = M[:, active]
    n = A.shape[1]
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = A.T @ A
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.concatenate([A.T @ y, [1.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    a = np.zeros(M.shape[1])
    a[active] = sol[:n]
    return a, sol[n]


def fcls(y: np.ndarray, M: MatrixLike) -> LsqSolution:
    """argmin ||y - M a|| subject to a >= 0 and sum(a) = 1."""
    M = _matrix(M)
    y = np.asarray(y, dtype=np.float64)
    _check(y, M)
    R = M.shape[1]

    augmented = np.vstack([M, _STO_WEIGHT * np.ones((1, R))])
    start, _ = nnls(augmented, np.concatenate([y, [_STO_WEIGHT]]))
    active = start > 0
    if not np.any(active):
        active[np.argmax(M.T @ y)] = True

    for _ in range(4 * R):
        a, lam = _equality_ls(y, M, active)
        negative = active & (a < -_KKT_TOL)
        if np.any(negative):
            active &= ~negative
            if not np.any(active):
                active[np.argmax(M.T @ y)] = True
            continue
        gradient = M.T @ (M @ a - y)
        multipliers = np.where(active, 0.0, gradient + lam)
        scale = max(1.0, float(np.max(np.abs(gradient))))
        if multipliers.min() >= -_KKT_TOL * scale:
            a = np.maximum(a, 0.0)
            return _solution(y, M, a / a.sum())
        active[np.argmin(multipliers)] = True

    fallback = np.maximum(start, 0.0)
    return _solution(y, M, fallback / fallback.sum())


def nm_extended_matrix(M: MatrixLike) -> np.ndarray:
    """Endmembers followed by the plain cross products m_k * m_k' (k < k')."""
    M = _matrix(M)
    cross = [M[:, k] * M[:, kp] for k, kp in combinations(range(M.shape[1]), 2)]
    return np.column_stack([M] + cross)


def nm_unmix(y: np.ndarray, basis: InteractionBasis) -> LsqSolution:
    """FCLS on the bilinear extended endmember matrix."""
    return fcls(y, nm_extended_matrix(basis.M))


def unmix_cube(
    Y: HyperCube,
    matrix: np.ndarray,
    solver: Callable[[np.ndarray, np.ndarray], LsqSolution],
    threads: int = 1,
) -> np.ndarray:
    """Run a per-pixel solver over the image; returns (n_columns, N_row, N_col)."""
    if Y.n_bands != matrix.shape[0]:
        raise DimensionError(f"Cube has {Y.n_bands} bands, endmembers have {matrix.shape[0]}")

    def solve_row(i: int) -> np.ndarray:
        return np.stack([solver(Y.data[:, i, j], matrix).abundances for j in range(Y.n_col)])

    rows = map_rows(solve_row, Y.n_row, threads)
    return np.stack(rows, axis=0).transpose(2, 0, 1)


def ncls_cube(Y: HyperCube, endmembers: EndmemberSet, threads: int = 1) -> AbundanceField:
    return AbundanceField(unmix_cube(Y, endmembers.M, ncls, threads))


def fcls_cube(Y: HyperCube, endmembers: EndmemberSet, threads: int = 1) -> AbundanceField:
    return AbundanceField(unmix_cube(Y, endmembers.M, fcls, threads))


def nm_cube(
    Y: HyperCube, endmembers: EndmemberSet, threads: int = 1
) -> Tuple[AbundanceField, np.ndarray]:
    """NM unmixing of every pixel.

    Returns the linear part of the coefficients and the (L, N_row, N_col)
    reconstruction, cross terms included.
    """
    extended = nm_extended_matrix(endmembers)
    weights = unmix_cube(Y, extended, fcls, threads)
    fitted = np.einsum("lk,kij->lij", extended, weights)
    return AbundanceField(weights[: endmembers.n_endmembers]), fitted
