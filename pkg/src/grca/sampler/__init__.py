"""MCMC engine: truncated Gaussian draws, conditional steps and the chain."""

from grca.sampler.chain import initialize_state, run_chain
from grca.sampler.steps import (
    conditional_mixing,
    conditional_precision,
    step_beta,
    step_mixing,
    step_s,
    step_sigma2,
    step_w,
)
from grca.sampler.streams import IterationStreams, Stage
from grca.sampler.truncated import Support, exact_hmc, sample_trunc_mvn, truncated_standard_normal

__all__ = [
    "IterationStreams",
    "Stage",
    "Support",
    "conditional_mixing",
    "conditional_precision",
    "exact_hmc",
    "initialize_state",
    "run_chain",
    "sample_trunc_mvn",
    "step_beta",
    "step_mixing",
    "step_s",
    "step_sigma2",
    "step_w",
    "truncated_standard_normal",
]
