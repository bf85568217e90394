"""
Synthetic scene generation.

A scene is built from smooth synthetic endmembers, a Potts class map and one
forward mixing model per class, then corrupted by Gaussian noise.
"""

from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from grca.errors import DimensionError, DomainError
from grca.logger import Logger
from grca.mixing import build_interaction_basis
from grca.models import (
    AbundanceField,
    EndmemberSet,
    GroundTruth,
    HyperCube,
    InteractionBasis,
    MixingClass,
    SceneSpec,
)

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]

MAX_CORRELATION = 0.98
_ENDMEMBER_ATTEMPTS = 200

SCENE_PRESETS: Dict[str, Dict] = {
    "scenario1": {
        "n_row": 30,
        "n_col": 30,
        "n_bands": 64,
        "n_endmembers": 3,
        "sigma2": 3e-4,
        "class_models": [MixingClass.LMM_WSTO],
    },
    "scenario2": {
        "n_row": 30,
        "n_col": 30,
        "n_bands": 64,
        "n_endmembers": 3,
        "sigma2": 3e-4,
        "class_models": list(MixingClass),
        "potts_beta": 1.6,
    },
}


def scene_preset(name: str, **overrides) -> SceneSpec:
    """SceneSpec of a named preset, with field overrides."""
    if name not in SCENE_PRESETS:
        raise DomainError(f"Unknown scene preset '{name}', expected one of {sorted(SCENE_PRESETS)}")
    fields = dict(SCENE_PRESETS[name])
    fields.update(overrides)
    return SceneSpec(**fields)


def _spectrum(grid: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n_bumps = rng.integers(3, 7)
    centers = rng.uniform(0.0, 1.0, n_bumps)
    widths = rng.uniform(0.03, 0.2, n_bumps)
    heights = rng.uniform(0.2, 1.0, n_bumps)
    bumps = heights[:, None] * np.exp(-0.5 * ((grid[None, :] - centers[:, None]) / widths[:, None]) ** 2)
    spectrum = bumps.sum(axis=0)
    return 0.05 + 0.95 * spectrum / spectrum.max()


def _max_correlation(M: np.ndarray) -> float:
    if M.shape[1] < 2 or M.shape[0] < 3:
        return 0.0
    corr = np.corrcoef(M.T)
    off_diagonal = corr[~np.eye(M.shape[1], dtype=bool)]
    return float(np.nanmax(np.abs(off_diagonal)))


def gen_endmembers(n_endmembers: int, n_bands: int, seed: SeedLike = 0) -> EndmemberSet:
    """Smooth spectra in [0, 1], each a sum of 3 to 6 Gaussian bumps.

    Candidate sets are redrawn until no two spectra correlate above 0.98.
    """
    if n_endmembers < 1 or n_bands < n_endmembers:
        raise DomainError(f"Need 1 <= R <= L, got R={n_endmembers}, L={n_bands}")
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, n_bands)

    for _ in range(_ENDMEMBER_ATTEMPTS):
        M = np.column_stack([_spectrum(grid, rng) for _ in range(n_endmembers)])
        if _max_correlation(M) < MAX_CORRELATION and np.linalg.matrix_rank(M) == n_endmembers:
            break
    else:
        Logger.warning(
            f"No endmember set with correlation below {MAX_CORRELATION} after "
            f"{_ENDMEMBER_ATTEMPTS} attempts; keeping the last one"
        )

    Logger.info(f"Endmembers: R={n_endmembers}, L={n_bands}, cond(M^T M)={np.linalg.cond(M.T @ M):.3e}")
    return EndmemberSet(M)


def _same_label_counts(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Number of 4-neighbours carrying each label, shape (n_classes, rows, cols)."""
    padded = np.full((labels.shape[0] + 2, labels.shape[1] + 2), -1)
    padded[1:-1, 1:-1] = labels
    neighbours = (
        padded[:-2, 1:-1],
        padded[2:, 1:-1],
        padded[1:-1, :-2],
        padded[1:-1, 2:],
    )
    classes = np.arange(n_classes)[:, None, None]
    return sum((n[None] == classes).astype(np.float64) for n in neighbours)


def gen_potts_map(
    n_row: int,
    n_col: int,
    n_classes: int,
    beta: float,
    n_sweeps: int = 200,
    seed: SeedLike = 0,
) -> np.ndarray:
    """Labels in {0, ..., n_classes - 1} drawn by Gibbs sweeps of a 4-neighbour Potts model.

    Sites are updated in two checkerboard half-sweeps, which are exact
    single-site Gibbs updates because same-colour sites share no edge.
    """
    if n_classes < 2:
        raise DomainError(f"Potts map needs at least 2 classes, got {n_classes}")
    if beta < 0:
        raise DomainError(f"Potts beta must be >= 0, got {beta}")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=(n_row, n_col))
    parity = np.add.outer(np.arange(n_row), np.arange(n_col)) % 2

    for _ in range(n_sweeps):
        for colour in (0, 1):
            logits = beta * _same_label_counts(labels, n_classes)
            logits -= logits.max(axis=0, keepdims=True)
            probs = np.exp(logits)
            cdf = np.cumsum(probs / probs.sum(axis=0, keepdims=True), axis=0)
            u = rng.uniform(size=(n_row, n_col))
            draws = np.minimum(np.sum(u[None] > cdf, axis=0), n_classes - 1)
            labels = np.where(parity == colour, draws, labels)
    return labels


def uniform_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw on the probability simplex from the gaps of sorted uniforms."""
    cuts = np.sort(rng.uniform(size=n - 1))
    return np.diff(np.concatenate([[0.0], cuts, [1.0]]))


def _n_cross(n_endmembers: int) -> int:
    return n_endmembers * (n_endmembers - 1) // 2


def draw_coefficients(
    mixing_class: MixingClass, spec: SceneSpec, rng: np.random.Generator
) -> np.ndarray:
    """Mixing coefficients of one pixel.

    Length R for every class except NM, whose R + R(R-1)/2 weights cover the
    endmembers and their cross products.
    """
    R = spec.n_endmembers
    if mixing_class is MixingClass.NM:
        return uniform_simplex(R + _n_cross(R), rng)
    if mixing_class.sum_to_one:
        return uniform_simplex(R, rng)
    return np.abs(rng.normal(0.0, np.sqrt(spec.abundance_scale), R))


def _scene_coefficients(
    class_map: np.ndarray, spec: SceneSpec, rng: np.random.Generator
) -> List[List[np.ndarray]]:
    models = spec.class_models
    return [
        [draw_coefficients(models[label], spec, rng) for label in row]
        for row in class_map
    ]


def gen_abundances(class_map: np.ndarray, spec: SceneSpec, rng: np.random.Generator) -> AbundanceField:
    """Abundances of every pixel given its class; labels index spec.class_models."""
    if class_map.max(initial=0) >= len(spec.class_models):
        raise DomainError("Class map uses labels beyond spec.class_models")
    coefficients = _scene_coefficients(class_map, spec, rng)
    A = np.array([[c[: spec.n_endmembers] for c in row] for row in coefficients])
    return AbundanceField(A.transpose(2, 0, 1))


def gen_pixel(
    mixing_class: MixingClass,
    coefficients: np.ndarray,
    M: np.ndarray,
    basis: InteractionBasis,
    spec: SceneSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noise-free pixel under one forward mixing model."""
    R = M.shape[1]
    a = coefficients[:R]
    linear = M @ a
    pairs = list(combinations(range(R), 2))

    if mixing_class in (MixingClass.LMM_WSTO, MixingClass.LMM_STO):
        return linear
    if mixing_class is MixingClass.GBM_FAN:
        return linear + sum(
            (a[k] * a[kp] * M[:, k] * M[:, kp] for k, kp in pairs), np.zeros(M.shape[0])
        )
    if mixing_class is MixingClass.PPNM:
        return linear + spec.ppnm_b * linear * linear
    if mixing_class is MixingClass.NM:
        if coefficients.shape != (R + len(pairs),):
            raise DimensionError(f"NM needs {R + len(pairs)} coefficients, got {coefficients.shape}")
        cross = coefficients[R:]
        return linear + sum(
            (c * M[:, k] * M[:, kp] for c, (k, kp) in zip(cross, pairs)), np.zeros(M.shape[0])
        )
    if mixing_class is MixingClass.RCA_GEN:
        gamma = rng.normal(0.0, np.sqrt(spec.rca_variance), basis.n_interactions)
        return linear + basis.nonlinear @ gamma
    raise DomainError(f"Unknown mixing class {mixing_class}")


def add_noise(
    cube: Union[HyperCube, np.ndarray],
    rng: np.random.Generator,
    sigma2: Optional[Union[float, np.ndarray]] = None,
    snr_db: Optional[float] = None,
) -> HyperCube:
    """Add zero-mean Gaussian noise, white or with one variance per band.

    With snr_db, sigma2 = mean over pixels of ||x||^2 / L, divided by 10^(snr/10).
    """
    data = cube.data if isinstance(cube, HyperCube) else np.asarray(cube, dtype=np.float64)
    if (sigma2 is None) == (snr_db is None):
        raise DomainError("Exactly one of sigma2 and snr_db must be given")
    if snr_db is not None:
        signal_power = np.mean(np.sum(data**2, axis=0)) / data.shape[0]
        sigma2 = signal_power / 10.0 ** (snr_db / 10.0)
    variances = np.broadcast_to(np.asarray(sigma2, dtype=np.float64), (data.shape[0],))
    if np.any(variances < 0):
        raise DomainError("Noise variances must be >= 0")
    noise = rng.standard_normal(data.shape) * np.sqrt(variances)[:, None, None]
    return HyperCube(data + noise)


def generate_scene(spec: SceneSpec) -> Tuple[HyperCube, EndmemberSet, GroundTruth]:
    """Endmembers, class map, abundances, forward models and noise for one scene."""
    endmember_seed, potts_seed, abundance_seed, noise_seed = np.random.SeedSequence(spec.seed).spawn(4)
    endmembers = gen_endmembers(spec.n_endmembers, spec.n_bands, endmember_seed)
    basis = build_interaction_basis(endmembers)
    M = endmembers.M

    n_classes = len(spec.class_models)
    if n_classes == 1:
        class_map = np.zeros((spec.n_row, spec.n_col), dtype=int)
    else:
        class_map = gen_potts_map(
            spec.n_row, spec.n_col, n_classes, spec.potts_beta, spec.potts_sweeps, potts_seed
        )

    rng = np.random.default_rng(abundance_seed)
    coefficients = _scene_coefficients(class_map, spec, rng)
    X = np.empty((spec.n_bands, spec.n_row, spec.n_col))
    A = np.empty((spec.n_endmembers, spec.n_row, spec.n_col))
    for i in range(spec.n_row):
        for j in range(spec.n_col):
            mixing_class = spec.class_models[class_map[i, j]]
            c = coefficients[i][j]
            X[:, i, j] = gen_pixel(mixing_class, c, M, basis, spec, rng)
            A[:, i, j] = c[: spec.n_endmembers]

    nonlinear_class = np.array([m.is_nonlinear for m in spec.class_models])[class_map]
    phi_true = X - np.einsum("lr,rij->lij", M, A)
    phi_true[:, ~nonlinear_class] = 0.0
    nonlin_mask = nonlinear_class & (np.sum(phi_true**2, axis=0) > 0)

    Y = add_noise(X, np.random.default_rng(noise_seed), sigma2=spec.sigma2, snr_db=spec.snr_db)
    Logger.info(
        f"Generated {spec.n_row}x{spec.n_col} scene, L={spec.n_bands}, R={spec.n_endmembers}, "
        f"{n_classes} class(es), {int(nonlin_mask.sum())} nonlinear pixels"
    )
    truth = GroundTruth(
        A_true=AbundanceField(A),
        class_map=class_map,
        phi_true=phi_true,
        nonlin_mask=nonlin_mask,
        class_models=tuple(spec.class_models),
    )
    return Y, endmembers, truth
