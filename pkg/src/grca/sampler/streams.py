"""Counter-based random streams.

Every random draw of the sampler comes from a generator keyed by
(seed, iteration, stage, index), so the output does not depend on how many
threads process the rows.
"""

from enum import IntEnum

import numpy as np


class Stage(IntEnum):
    """Sampler steps that draw random numbers."""

    MIXING = 0
    SIGMA2 = 1
    BETA = 2
    S = 3
    W = 4
    AUX = 5


class IterationStreams:
    """Random generators of one sampler iteration."""

    def __init__(self, seed: int, t: int):
        self.seed = seed
        self.t = t

    def get(self, stage: Stage, index: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, self.t, int(stage), index])
