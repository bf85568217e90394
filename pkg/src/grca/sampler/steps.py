"""
Conditional updates of the G-RCA / G-RCA+ Gibbs sampler.

Every step reads a ChainState and returns the new value of one block. The
steps draw from generators handed out by IterationStreams, so their output
only depends on (seed, iteration).
"""

from typing import Tuple

import numpy as np

from grca.errors import DimensionError, DomainError, SingularSystemError
from grca.gmrf import alpha4_map, clip_positive, sample_w_block
from grca.mixing import residual_cube
from grca.models import ChainState, HyperCube, InteractionBasis, SignMode
from grca.sampler.streams import IterationStreams, Stage
from grca.sampler.truncated import exact_hmc
from grca.workers import map_rows

SIGMA2_FLOOR = 1e-12


def _inverse_gamma(shape, rate, rng: np.random.Generator, size=None) -> np.ndarray:
    """IG(shape, rate) draws as rate / Gamma(shape, 1)."""
    return np.asarray(rate) / rng.gamma(shape, 1.0, size=size)


def support_mask(basis: InteractionBasis, sign_mode: SignMode) -> np.ndarray:
    """Coordinates of [a; gamma] that are constrained to be nonnegative."""
    mask = np.ones(basis.n_endmembers + basis.n_interactions, dtype=bool)
    if sign_mode is SignMode.UNCONSTRAINED:
        mask[basis.n_endmembers :] = False
    return mask


def conditional_precision(
    pixels: np.ndarray,
    beta: np.ndarray,
    s: np.ndarray,
    sigma2: np.ndarray,
    basis: InteractionBasis,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and precision of [a; gamma] given everything else, for a batch.

    Args:
        pixels: (n, L) observed spectra.
        beta: (R,) abundance prior variances.
        s: (n,) nonlinearity scales.
        sigma2: (L,) noise variances.
        basis: interaction basis G.

    Returns:
        mu (n, R+K) and Q (n, R+K, R+K).
    """
    pixels = np.atleast_2d(pixels)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    if pixels.shape[1] != basis.n_bands or s.shape[0] != pixels.shape[0]:
        raise DimensionError("Pixels, scales and basis do not agree")
    if np.any(beta <= 0) or np.any(s <= 0) or np.any(sigma2 <= 0):
        raise DomainError("beta, s and sigma2 must be > 0")

    G = basis.G
    weighted = G / sigma2[:, None]
    H = G.T @ weighted
    b = pixels @ weighted
    prior = np.empty((len(s), G.shape[1]))
    prior[:, : basis.n_endmembers] = 1.0 / beta
    prior[:, basis.n_endmembers :] = (1.0 / s)[:, None]
    Q = np.broadcast_to(H, (len(s),) + H.shape).copy()
    idx = np.arange(G.shape[1])
    Q[:, idx, idx] += prior
    try:
        np.linalg.cholesky(Q)
        mu = np.linalg.solve(Q, b[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Mixing precision is singular: {e}") from e
    return mu, Q


def conditional_mixing(
    y: np.ndarray,
    beta: np.ndarray,
    s_ij: float,
    sigma2: np.ndarray,
    basis: InteractionBasis,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gaussian parameters (mu, Sigma) of [a; gamma] for one pixel."""
    mu, Q = conditional_precision(
        np.asarray(y, dtype=np.float64)[None, :],
        np.asarray(beta, dtype=np.float64),
        np.array([s_ij], dtype=np.float64),
        np.asarray(sigma2, dtype=np.float64),
        basis,
    )
    try:
        chol = np.linalg.cholesky(Q[0])
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Mixing precision is singular: {e}") from e
    chol_inv = np.linalg.inv(chol)
    return mu[0], chol_inv.T @ chol_inv


def step_mixing(
    state: ChainState,
    Y: HyperCube,
    basis: InteractionBasis,
    sign_mode: SignMode,
    streams: IterationStreams,
    n_trajectories: int = 1,
    threads: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """Move [a; gamma] of every pixel with exact HMC on its truncated Gaussian conditional."""
    R = basis.n_endmembers
    constrained = support_mask(basis, sign_mode)
    S = state.gmrf.S

    def update_row(i: int) -> np.ndarray:
        pixels = Y.data[:, i, :].T
        current = np.concatenate([state.A[:, i, :], state.gamma[:, i, :]], axis=0).T
        try:
            mu, Q = conditional_precision(pixels, state.beta, S[i], state.sigma2, basis)
        except SingularSystemError as e:
            raise SingularSystemError(f"{e} in row {i}") from e
        return exact_hmc(
            current, mu, Q, constrained, streams.get(Stage.MIXING, i), n_trajectories
        )

    rows = map_rows(update_row, Y.n_row, threads)
    coefficients = np.stack(rows, axis=0).transpose(2, 0, 1)
    return coefficients[:R].copy(), coefficients[R:].copy()


def step_sigma2(
    state: ChainState,
    Y: HyperCube,
    basis: InteractionBasis,
    streams: IterationStreams,
    prior_shape: float = 0.0,
    prior_rate: float = 0.0,
) -> np.ndarray:
    """Per-band IG(N/2 + shape, SSR/2 + rate); shape = rate = 0 is Jeffreys."""
    residual = residual_cube(Y, state.A, state.gamma, basis)
    ssr = np.sum(residual**2, axis=(1, 2))
    rng = streams.get(Stage.SIGMA2)
    draws = _inverse_gamma(Y.n_pixels / 2.0 + prior_shape, ssr / 2.0 + prior_rate, rng, ssr.shape)
    return np.maximum(draws, SIGMA2_FLOOR)


def step_beta(
    state: ChainState, alpha1: float, alpha2: float, streams: IterationStreams
) -> np.ndarray:
    """beta_r ~ IG(N/2 + alpha1, sum a_r^2 / 2 + alpha2)."""
    R, n_row, n_col = state.A.shape
    sq = np.sum(state.A**2, axis=(1, 2))
    rng = streams.get(Stage.BETA)
    return _inverse_gamma(n_row * n_col / 2.0 + alpha1, sq / 2.0 + alpha2, rng, (R,))


def step_s(state: ChainState, streams: IterationStreams) -> np.ndarray:
    """s_ij ~ IG(alpha3 + K/2, alpha3 alpha4(W) + ||gamma_ij||^2 / 2)."""
    K = state.gamma.shape[0]
    rate = state.alpha3 * alpha4_map(state.gmrf.W) + 0.5 * np.sum(state.gamma**2, axis=0)
    rng = streams.get(Stage.S)
    return clip_positive(_inverse_gamma(state.alpha3 + K / 2.0, rate, rng, rate.shape))


def step_w(state: ChainState, streams: IterationStreams) -> np.ndarray:
    """w ~ Gamma(alpha3, scale 1 / (alpha3 alpha5(S)))."""
    return sample_w_block(state.gmrf.S, state.alpha3, streams.get(Stage.W))
