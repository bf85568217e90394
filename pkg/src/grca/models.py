"""
Data models for grca.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from grca.errors import DimensionError, DomainError


class SignMode(Enum):
    """Support of the nonlinearity coefficients."""

    POSITIVE_ONLY = "positive"  # G-RCA+
    UNCONSTRAINED = "unconstrained"  # G-RCA


class MixingClass(Enum):
    """Forward mixing models used to build synthetic scenes."""

    LMM_WSTO = "lmm_wsto"
    LMM_STO = "lmm_sto"
    GBM_FAN = "gbm_fan"
    PPNM = "ppnm"
    NM = "nm"
    RCA_GEN = "rca_gen"

    @property
    def is_nonlinear(self) -> bool:
        return self not in (MixingClass.LMM_WSTO, MixingClass.LMM_STO)

    @property
    def sum_to_one(self) -> bool:
        return self in (MixingClass.LMM_STO, MixingClass.GBM_FAN, MixingClass.PPNM)


def _as_array(name: str, value, ndim: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class HyperCube:
    """Observed image, indexed (band, row, col)."""

    data: np.ndarray

    def __post_init__(self):
        data = _as_array("HyperCube.data", self.data, 3)
        if min(data.shape) < 1:
            raise DimensionError(f"HyperCube dims must be >= 1, got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def n_bands(self) -> int:
        return self.data.shape[0]

    @property
    def n_row(self) -> int:
        return self.data.shape[1]

    @property
    def n_col(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.n_row * self.n_col


@dataclass(frozen=True, eq=False)
class EndmemberSet:
    """Endmember spectra as the columns of an L x R matrix."""

    M: np.ndarray

    def __post_init__(self):
        M = _as_array("EndmemberSet.M", self.M, 2)
        if np.any(M < 0):
            raise DomainError("Endmember spectra must be nonnegative")
        if np.any(np.all(M == 0, axis=0)):
            raise DomainError("Endmember columns must be nonzero")
        object.__setattr__(self, "M", M)

    @property
    def n_bands(self) -> int:
        return self.M.shape[0]

    @property
    def n_endmembers(self) -> int:
        return self.M.shape[1]


@dataclass(frozen=True, eq=False)
class InteractionBasis:
    """Endmembers followed by their K = R(R+1)/2 interaction spectra."""

    G: np.ndarray
    n_endmembers: int
    column_labels: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        R = self.n_endmembers
        K = R * (R + 1) // 2
        if self.G.shape[1] != R + K or len(self.column_labels) != K:
            raise DimensionError(
                f"Interaction basis for R={R} needs {R + K} columns, got {self.G.shape[1]}"
            )

    @property
    def n_bands(self) -> int:
        return self.G.shape[0]

    @property
    def n_interactions(self) -> int:
        return len(self.column_labels)

    @property
    def M(self) -> np.ndarray:
        return self.G[:, : self.n_endmembers]

    @property
    def nonlinear(self) -> np.ndarray:
        return self.G[:, self.n_endmembers :]


@dataclass(frozen=True, eq=False)
class AbundanceField:
    """Abundances indexed (material, row, col); no sum-to-one constraint."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_array("AbundanceField.values", self.values, 3)
        if np.any(values < 0):
            raise DomainError("Abundances must be nonnegative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class NonlinField:
    """Nonlinearity coefficients indexed (interaction, row, col)."""

    values: np.ndarray
    sign_mode: SignMode = SignMode.POSITIVE_ONLY

    def __post_init__(self):
        values = _as_array("NonlinField.values", self.values, 3)
        if self.sign_mode is SignMode.POSITIVE_ONLY and np.any(values < 0):
            raise DomainError("G-RCA+ nonlinearity coefficients must be nonnegative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class NoiseVariances:
    """Per-band noise variances (diagonal noise covariance)."""

    sigma2: np.ndarray

    def __post_init__(self):
        sigma2 = _as_array("NoiseVariances.sigma2", self.sigma2, 1)
        if np.any(sigma2 <= 0):
            raise DomainError("Noise variances must be > 0")
        object.__setattr__(self, "sigma2", sigma2)


@dataclass(frozen=True, eq=False)
class GmrfState:
    """Nonlinearity scales S and auxiliary matrix W of the gamma MRF."""

    S: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        S = _as_array("GmrfState.S", self.S, 2)
        W = _as_array("GmrfState.W", self.W, 2)
        if W.shape != (S.shape[0] + 1, S.shape[1] + 1):
            raise DimensionError(
                f"W must have shape {(S.shape[0] + 1, S.shape[1] + 1)}, got {W.shape}"
            )
        if np.any(S <= 0) or np.any(W <= 0):
            raise DomainError("GMRF entries must be strictly positive")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "W", W)

    @classmethod
    def constant(cls, n_row: int, n_col: int, s: float = 1.0, w: float = 1.0):
        return cls(np.full((n_row, n_col), s), np.full((n_row + 1, n_col + 1), w))


@dataclass(frozen=True, eq=False)
class GmrfParam:
    """Regularisation parameter of the gamma MRF and its projection bound."""

    alpha3: float
    a_max: float = 20.0

    def __post_init__(self):
        if not 0 < self.alpha3 <= self.a_max:
            raise DomainError(f"alpha3 must lie in (0, {self.a_max}], got {self.alpha3}")


@dataclass
class ChainConfig:
    """Settings of one sampler run."""

    n_mc: int = 800
    n_bi: int = 600
    a_max: float = 20.0
    sign_mode: SignMode = SignMode.POSITIVE_ONLY
    alpha1: float = 1.0
    alpha2: float = 2.0
    seed: int = 0
    thinning: int = 1
    hmc_trajectories: int = 1
    alpha3_init: float = 1.0
    adapt_alpha3: bool = True
    log_every: int = 100
    # IG(shape, rate) prior on each sigma2; 0, 0 is the Jeffreys prior.
    noise_prior_shape: float = 0.0
    noise_prior_rate: float = 0.0

    def __post_init__(self):
        if self.seed < 0:
            raise DomainError(f"seed must be >= 0, got {self.seed}")
        if self.noise_prior_shape < 0 or self.noise_prior_rate < 0:
            raise DomainError("noise prior shape and rate must be >= 0")
        if not 0 < self.n_bi < self.n_mc:
            raise DomainError(f"Need 0 < n_bi < n_mc, got n_bi={self.n_bi}, n_mc={self.n_mc}")
        if self.a_max <= 0 or self.alpha1 <= 0 or self.alpha2 <= 0:
            raise DomainError("a_max, alpha1 and alpha2 must be > 0")
        if self.thinning < 1 or self.hmc_trajectories < 1:
            raise DomainError("thinning and hmc_trajectories must be >= 1")
        if not 0 < self.alpha3_init <= self.a_max:
            raise DomainError(f"alpha3_init must lie in (0, {self.a_max}]")

    @property
    def n_retained(self) -> int:
        return (self.n_mc - self.n_bi) // self.thinning


@dataclass
class ChainState:
    """Every latent variable of the posterior, as raw arrays.

    A is (R, N_row, N_col), gamma is (K, N_row, N_col), sigma2 is (L,),
    beta is (R,).
    """

    A: np.ndarray
    gamma: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    gmrf: GmrfState
    alpha3: float
    t: int = 0


@dataclass(frozen=True, eq=False)
class ChainSample:
    """One retained draw of (A, Gamma, S)."""

    t: int
    A: np.ndarray
    gamma: np.ndarray
    S: np.ndarray


@dataclass
class ChainOutput:
    """Retained samples plus per-iteration traces."""

    samples: List[ChainSample]
    alpha3_trace: np.ndarray
    loglik_trace: np.ndarray
    sign_mode: SignMode = SignMode.POSITIVE_ONLY
    final_state: Optional[ChainState] = None

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Nonlinearity probability map and the thresholded decisions."""

    prob_map: np.ndarray
    decision_map: np.ndarray
    eta: float
    a0: float
    a1: float

    @property
    def threshold(self) -> float:
        return self.a1 / (self.a0 + self.a1)


@dataclass(frozen=True, eq=False)
class LsqSolution:
    """Constrained least-squares solution for one pixel."""

    abundances: np.ndarray
    residual_norm: float


@dataclass
class SceneSpec:
    """Synthetic scene description."""

    n_row: int = 30
    n_col: int = 30
    n_bands: int = 64
    n_endmembers: int = 3
    sigma2: Optional[float] = 3e-4
    snr_db: Optional[float] = None
    class_models: List[MixingClass] = field(default_factory=lambda: list(MixingClass))
    potts_beta: float = 1.6
    potts_sweeps: int = 200
    ppnm_b: float = 0.2
    rca_variance: float = 0.1
    abundance_scale: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if min(self.n_row, self.n_col, self.n_bands, self.n_endmembers) < 1:
            raise DomainError("Scene dimensions must be >= 1")
        if self.n_bands < self.n_endmembers:
            raise DomainError("Scene needs at least as many bands as endmembers")
        if (self.sigma2 is None) == (self.snr_db is None):
            raise DomainError("Exactly one of sigma2 and snr_db must be given")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise DomainError(f"sigma2 must be > 0, got {self.sigma2}")
        if not self.class_models:
            raise DomainError("Scene needs at least one mixing class")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Quantities the synthetic scene was generated from."""

    A_true: AbundanceField
    class_map: np.ndarray
    phi_true: np.ndarray
    nonlin_mask: np.ndarray
    class_models: Tuple[MixingClass, ...] = ()

    @property
    def phi_energy(self) -> np.ndarray:
        return np.sum(self.phi_true**2, axis=0)


@dataclass
class MetricReport:
    """Abundance, reconstruction and detection metrics of one run."""

    rnmse_global: Optional[float] = None
    rnmse_per_class: Dict[int, float] = field(default_factory=dict)
    re_global: Optional[float] = None
    re_per_class: Dict[int, float] = field(default_factory=dict)
    p_fa: Optional[float] = None
    p_d: Optional[float] = None

    def as_flat_dict(self, class_names: Optional[Dict[int, str]] = None) -> Dict[str, float]:
        names = class_names or {}
        flat: Dict[str, float] = {}
        for key in ("rnmse_global", "re_global", "p_fa", "p_d"):
            value = getattr(self, key)
            if value is not None:
                flat[key] = value
        for label, value in sorted(self.rnmse_per_class.items()):
            flat[f"rnmse.{names.get(label, label)}"] = value
        for label, value in sorted(self.re_per_class.items()):
            flat[f"re.{names.get(label, label)}"] = value
        return flat


class RunMode(Enum):
    """CLI sub-command a configuration is meant for."""

    GENERATE = "generate"
    UNMIX = "unmix"
    EVALUATE = "evaluate"
    DETECT = "detect"


class UnmixMethod(Enum):
    """Estimator run by the unmix command."""

    GRCA_PLUS = "grca+"
    GRCA = "grca"
    NCLS = "ncls"
    FCLS = "fcls"
    NM = "nm"

    @property
    def uses_sampler(self) -> bool:
        return self in (UnmixMethod.GRCA_PLUS, UnmixMethod.GRCA)


@dataclass
class PathsConfig:
    """Input and output locations."""

    truth: str = "scene"
    estimates: str = "estimates"
    output: str = "out"


@dataclass
class UnmixConfig:
    """Unmixing method and detection settings."""

    method: UnmixMethod = UnmixMethod.GRCA_PLUS
    eta: float = 2.0
    eta_sweep: List[float] = field(default_factory=list)
    a0: float = 1.0
    a1: float = 1.0

    def __post_init__(self):
        if self.eta <= 0 or any(e <= 0 for e in self.eta_sweep):
            raise DomainError("eta must be > 0")
        if self.a0 <= 0 or self.a1 <= 0:
            raise DomainError("a0 and a1 must be > 0")


@dataclass
class EvaluateConfig:
    """Acceptance thresholds; None disables a check."""

    rnmse_max: Optional[float] = None
    re_max: Optional[float] = None
    p_fa_max: Optional[float] = None
    p_d_min: Optional[float] = None


@dataclass
class RunConfig:
    """Main configuration."""

    version: str = "1"
    mode: RunMode = RunMode.UNMIX
    paths: PathsConfig = field(default_factory=PathsConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    chain: ChainConfig = field(default_factory=ChainConfig)
    unmix: UnmixConfig = field(default_factory=UnmixConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
