"""
Adaptive Gibbs sampler for the G-RCA / G-RCA+ posterior.

Each iteration moves the mixing coefficients by exact HMC, then updates the
noise variances, the abundance variances, S and W, in that order. While
t < n_bi the gamma MRF regularisation alpha3 is also adapted from an
auxiliary colouring sweep, with the gradient taken per s node;
afterwards it stays fixed and (A, Gamma, S) is retained.
"""

import time
from typing import Optional

import numpy as np

from grca.baselines import ncls_cube
from grca.errors import ChainAbortedError, DimensionError, GrcaError
from grca.gmrf import at_clip_bounds, gibbs_kernel, matched_state, update_alpha3
from grca.logger import Logger
from grca.mixing import build_interaction_basis, log_likelihood
from grca.models import (
    ChainConfig,
    ChainOutput,
    ChainSample,
    ChainState,
    EndmemberSet,
    GmrfState,
    HyperCube,
    InteractionBasis,
    SignMode,
)
from grca.sampler.steps import (
    SIGMA2_FLOOR,
    step_beta,
    step_mixing,
    step_s,
    step_sigma2,
    step_w,
)
from grca.sampler.streams import IterationStreams, Stage
from grca.workers import worker_count

S_INIT = 1e-2
GAMMA_INIT = 1e-3


def initialize_state(
    Y: HyperCube,
    endmembers: EndmemberSet,
    basis: InteractionBasis,
    cfg: ChainConfig,
    threads: int = 1,
) -> ChainState:
    """Data-driven starting point: NCLS abundances and their residual variance."""
    A = ncls_cube(Y, endmembers, threads).values
    gamma_value = GAMMA_INIT if cfg.sign_mode is SignMode.POSITIVE_ONLY else 0.0
    gamma = np.full((basis.n_interactions, Y.n_row, Y.n_col), gamma_value)

    residual = Y.data - np.einsum("lr,rij->lij", endmembers.M, A)
    sigma2 = np.maximum(np.var(residual.reshape(Y.n_bands, -1), axis=1), SIGMA2_FLOOR)
    beta = np.mean(A**2, axis=(1, 2)) + cfg.alpha2 / (cfg.alpha1 + 1.0)

    return ChainState(
        A=A,
        gamma=gamma,
        sigma2=sigma2,
        beta=beta,
        gmrf=matched_state(np.full((Y.n_row, Y.n_col), S_INIT)),
        alpha3=cfg.alpha3_init,
        t=0,
    )


def _iterate(
    state: ChainState,
    Y: HyperCube,
    basis: InteractionBasis,
    cfg: ChainConfig,
    threads: int,
) -> None:
    """Run iteration state.t + 1 in place."""
    t = state.t + 1
    streams = IterationStreams(cfg.seed, t)

    state.A, state.gamma = step_mixing(
        state, Y, basis, cfg.sign_mode, streams, cfg.hmc_trajectories, threads
    )
    state.sigma2 = step_sigma2(
        state, Y, basis, streams, cfg.noise_prior_shape, cfg.noise_prior_rate
    )
    state.beta = step_beta(state, cfg.alpha1, cfg.alpha2, streams)
    state.gmrf = GmrfState(step_s(state, streams), state.gmrf.W)
    state.gmrf = GmrfState(state.gmrf.S, step_w(state, streams))

    if cfg.adapt_alpha3 and t < cfg.n_bi:
        aux = gibbs_kernel(state.gmrf, state.alpha3, streams.get(Stage.AUX))
        state.alpha3 = update_alpha3(
            state.alpha3, state.gmrf, aux, t, cfg.a_max, per_node=True
        )
    state.t = t


def run_chain(
    Y: HyperCube,
    endmembers: EndmemberSet,
    cfg: ChainConfig,
    threads: Optional[int] = None,
    initial_state: Optional[ChainState] = None,
) -> ChainOutput:
    """Run the sampler for cfg.n_mc iterations.

    Args:
        Y: observed image.
        endmembers: known endmember matrix.
        cfg: chain settings.
        threads: worker threads for the per-row updates; defaults to GRCA_THREADS.
        initial_state: starting point; defaults to initialize_state.

    Returns:
        ChainOutput with the (A, Gamma, S) draws of t > n_bi, plus the
        alpha3 and log-likelihood traces of every iteration.

    Raises:
        ChainAbortedError: a step failed; `iteration` holds the failing t.
    """
    if Y.n_bands != endmembers.n_bands:
        raise DimensionError(
            f"Cube has {Y.n_bands} bands, endmembers have {endmembers.n_bands}"
        )
    threads = worker_count(threads)
    basis = build_interaction_basis(endmembers)
    state = initial_state or initialize_state(Y, endmembers, basis, cfg, threads)

    Logger.info(
        f"Starting {cfg.sign_mode.value} chain: {cfg.n_mc} iterations, "
        f"{cfg.n_bi} burn-in, {Y.n_row}x{Y.n_col} pixels, R={basis.n_endmembers}, "
        f"{threads} thread(s)"
    )
    started = time.perf_counter()
    samples = []
    clipped = False
    alpha3_trace = np.empty(cfg.n_mc)
    loglik_trace = np.empty(cfg.n_mc)

    while state.t < cfg.n_mc:
        try:
            _iterate(state, Y, basis, cfg, threads)
            loglik = log_likelihood(Y, state.A, state.gamma, state.sigma2, basis)
        except (GrcaError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
            raise ChainAbortedError(state.t + 1, e) from e

        t = state.t
        if not clipped and at_clip_bounds(state.gmrf):
            clipped = True
            Logger.warning(
                f"Iteration {t}: S or W reached the representable range "
                f"[1e-150, 1e150]; the nonlinearity scales have collapsed or diverged"
            )
        alpha3_trace[t - 1] = state.alpha3
        loglik_trace[t - 1] = loglik
        if t > cfg.n_bi and (t - cfg.n_bi) % cfg.thinning == 0:
            samples.append(
                ChainSample(t=t, A=state.A.copy(), gamma=state.gamma.copy(), S=state.gmrf.S.copy())
            )
        if t == cfg.n_bi:
            Logger.info(f"Burn-in finished, alpha3 frozen at {state.alpha3:.4f}")
        if cfg.log_every and t % cfg.log_every == 0:
            Logger.info(f"Iteration {t}/{cfg.n_mc}: log-likelihood {loglik:.4e}, alpha3 {state.alpha3:.4f}")

    Logger.info(
        f"Chain finished in {time.perf_counter() - started:.1f}s with {len(samples)} retained samples"
    )
    return ChainOutput(
        samples=samples,
        alpha3_trace=alpha3_trace,
        loglik_trace=loglik_trace,
        sign_mode=cfg.sign_mode,
        final_state=state,
    )

