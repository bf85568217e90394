"""
Gamma Markov random field over the nonlinearity scales.

The field couples the N_row x N_col scales S with an (N_row+1) x (N_col+1)
auxiliary matrix W on a bipartite graph: every s[i, j] is linked to the four
corners w[i, j], w[i+1, j], w[i, j+1], w[i+1, j+1]. Indices are 0-based.
Because the graph is bipartite, S is conditionally independent given W and
vice versa, so one Gibbs sweep is two vectorised block draws.
"""

from typing import List, Optional, Tuple

import numpy as np

from grca.errors import DomainError
from grca.logger import Logger
from grca.models import GmrfState

DEFAULT_A_MAX = 20.0
ALPHA3_FLOOR = 1e-3

# Keeps draws representable when alpha3 sits near its floor.
_TINY = 1e-150
_HUGE = 1e150


def clip_positive(values: np.ndarray) -> np.ndarray:
    return np.clip(values, _TINY, _HUGE)


def at_clip_bounds(state: GmrfState) -> bool:
    """True when some s or w has been pinned to the representable range."""
    return any(
        np.any(values <= _TINY) or np.any(values >= _HUGE) for values in (state.S, state.W)
    )


def _check_positive(name: str, values: np.ndarray) -> None:
    if np.any(values <= 0):
        raise DomainError(f"{name} must be strictly positive")


def alpha4_map(W: np.ndarray) -> np.ndarray:
    """Mean of the four W corners of every s node, shape (N_row, N_col)."""
    return (W[:-1, :-1] + W[1:, :-1] + W[:-1, 1:] + W[1:, 1:]) / 4.0


def alpha5_map(S: np.ndarray) -> np.ndarray:
    """Sum of the reciprocals of the existing S neighbours of every w node, over 4."""
    _check_positive("S", S)
    padded = np.zeros((S.shape[0] + 2, S.shape[1] + 2))
    padded[1:-1, 1:-1] = 1.0 / S
    return (padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]) / 4.0


def alpha4(W: np.ndarray, i: int, j: int) -> float:
    """alpha4 at the s node (i, j)."""
    n_row, n_col = W.shape[0] - 1, W.shape[1] - 1
    if not (0 <= i < n_row and 0 <= j < n_col):
        raise DomainError(f"({i}, {j}) is not an S node of a {n_row}x{n_col} grid")
    return float((W[i, j] + W[i + 1, j] + W[i, j + 1] + W[i + 1, j + 1]) / 4.0)


def alpha5(S: np.ndarray, i: int, j: int) -> float:
    """alpha5 at the w node (i, j); missing neighbours contribute 0."""
    n_row, n_col = S.shape
    if not (0 <= i <= n_row and 0 <= j <= n_col):
        raise DomainError(f"({i}, {j}) is not a W node of a {n_row}x{n_col} grid")
    _check_positive("S", S)
    total = 0.0
    for di, dj in ((0, 0), (-1, 0), (0, -1), (-1, -1)):
        ii, jj = i + di, j + dj
        if 0 <= ii < n_row and 0 <= jj < n_col:
            total += 1.0 / S[ii, jj]
    return total / 4.0


def edge_sum(state: GmrfState) -> float:
    """Sum over all edges of w / s."""
    return float(np.sum(4.0 * alpha4_map(state.W) / state.S))


def log_density_unnorm(state: GmrfState, alpha3: float) -> float:
    """Log of the gamma MRF density without its normalising constant."""
    S, W = state.S, state.W
    return float(
        -(alpha3 + 1.0) * np.sum(np.log(S))
        + (alpha3 - 1.0) * np.sum(np.log(W))
        - alpha3 / 4.0 * edge_sum(state)
    )


def lambda_stat(state: GmrfState) -> float:
    """Four times the alpha3-derivative of the unnormalised log-density."""
    return float(
        -edge_sum(state)
        + 4.0 * (np.sum(np.log(state.W)) - np.sum(np.log(state.S)))
    )


def sample_s_block(shape: float, rate: np.ndarray, rng) -> np.ndarray:
    """Independent IG(shape, rate) draws, one per S node."""
    return clip_positive(rate / np.maximum(rng.gamma(shape, 1.0, size=rate.shape), _TINY))


def sample_w_block(S: np.ndarray, alpha3: float, rng) -> np.ndarray:
    """w ~ Gamma(alpha3, scale 1 / (alpha3 alpha5(S))) for every w node."""
    scale = 1.0 / (alpha3 * alpha5_map(S))
    return clip_positive(rng.gamma(alpha3, 1.0, size=scale.shape) * scale)


def gibbs_kernel(state: GmrfState, alpha3: float, rng) -> GmrfState:
    """One two-block colouring sweep targeting the gamma MRF prior."""
    if alpha3 <= 0:
        raise DomainError(f"alpha3 must be > 0, got {alpha3}")
    rate = alpha3 * alpha4_map(state.W)
    S = sample_s_block(alpha3, rate, rng)
    W = sample_w_block(S, alpha3, rng)
    return GmrfState(S, W)


def sample_gmrf(
    n_row: int,
    n_col: int,
    alpha3: float,
    n_sweeps: int,
    rng,
    init: Optional[GmrfState] = None,
) -> GmrfState:
    """Approximate draw from the prior after `n_sweeps` Gibbs sweeps."""
    state = init if init is not None else GmrfState.constant(n_row, n_col)
    for _ in range(n_sweeps):
        state = gibbs_kernel(state, alpha3, rng)
    return state


def update_alpha3(
    alpha3: float,
    state_chain: GmrfState,
    state_aux: GmrfState,
    t: int,
    a_max: float = DEFAULT_A_MAX,
    per_node: bool = False,
) -> float:
    """Projected stochastic-gradient step with step size t^(-3/4).

    With `per_node` the Lambda difference is divided by the number of s nodes,
    so the step no longer grows with the image size. A NaN step leaves alpha3
    unchanged; an infinite one moves it to the bound it points at.
    """
    if t < 1:
        raise DomainError(f"Iteration index must be >= 1, got {t}")
    delta = lambda_stat(state_chain) - lambda_stat(state_aux)
    if per_node:
        delta /= state_chain.S.size
    if np.isnan(delta):
        Logger.warning(f"alpha3 gradient is undefined at t={t}, keeping {alpha3:.4g}")
        return float(alpha3)
    candidate = alpha3 + t ** (-0.75) * delta
    if not np.isfinite(candidate):
        candidate = a_max if delta > 0 else ALPHA3_FLOOR
    return float(min(max(candidate, ALPHA3_FLOOR), a_max))


def estimate_alpha3(
    state: GmrfState,
    rng,
    alpha3_init: float = 1.0,
    n_iter: int = 2000,
    a_max: float = DEFAULT_A_MAX,
    per_node: bool = False,
) -> Tuple[float, List[float]]:
    """Maximum-likelihood alpha3 for an observed (S, W) field.

    Returns the final value and the whole trajectory.
    """
    alpha3 = alpha3_init
    trace = []
    for t in range(1, n_iter + 1):
        aux = gibbs_kernel(state, alpha3, rng)
        alpha3 = update_alpha3(alpha3, state, aux, t, a_max, per_node)
        trace.append(alpha3)
    Logger.debug(f"alpha3 estimate after {n_iter} iterations: {alpha3:.4f}")
    return alpha3, trace


def matched_state(S: np.ndarray) -> GmrfState:
    """S with every w set to 1 / alpha5(S), the mean of its conditional."""
    S = np.asarray(S, dtype=np.float64)
    _check_positive("S", S)
    return GmrfState(S, 1.0 / alpha5_map(S))
