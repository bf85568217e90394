"""
Truncated Gaussian sampling.

Univariate draws use the minimax-tilting generator of Botev (2016): Rayleigh
rejection in the tails, inverse transform on short intervals, plain
rejection otherwise. Multivariate draws on the positive orthant use exact
rejection when it is cheap and exact Hamiltonian Monte Carlo (Pakman and
Paninski, 2014) otherwise.
"""

from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.special import erfc, erfcinv

from grca.errors import DimensionError, SingularSystemError
from grca.logger import Logger

_TAIL_THRESHOLD = 0.66
_INTERVAL_TOL = 2.0
_TRAJECTORY_TIME = np.pi / 2
_MAX_BOUNCES = 500
_WALL_TOL = 1e-10


class Support(Enum):
    """Support of a truncated Gaussian."""

    POSITIVE_ORTHANT = "positive_orthant"
    FULL = "full"


def _ntail(l: np.ndarray, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard normal on [l, u] with l > 0, by Rayleigh rejection."""
    c = l**2 / 2
    f = np.expm1(c - u**2 / 2)
    x = c - np.log1p(rng.uniform(size=len(l)) * f)
    rejected = rng.uniform(size=len(l)) ** 2 * x > c
    while np.any(rejected):
        cy = c[rejected]
        y = cy - np.log1p(rng.uniform(size=len(cy)) * f[rejected])
        accepted = rng.uniform(size=len(cy)) ** 2 * y < cy
        idx = np.flatnonzero(rejected)
        x[idx[accepted]] = y[accepted]
        rejected[idx[accepted]] = False
    return np.sqrt(2 * x)


def _trnd(l: np.ndarray, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard normal on [l, u] by plain rejection."""
    x = rng.standard_normal(len(l))
    rejected = (x < l) | (x > u)
    while np.any(rejected):
        idx = np.flatnonzero(rejected)
        y = rng.standard_normal(len(idx))
        accepted = (y > l[idx]) & (y < u[idx])
        x[idx[accepted]] = y[accepted]
        rejected[idx[accepted]] = False
    return x


def _tn(l: np.ndarray, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard normal on [l, u] with -a < l < u < a."""
    x = np.empty_like(l)
    wide = np.abs(u - l) > _INTERVAL_TOL
    if np.any(wide):
        x[wide] = _trnd(l[wide], u[wide], rng)
    narrow = ~wide
    if np.any(narrow):
        tl, tu = l[narrow], u[narrow]
        pl = erfc(tl / np.sqrt(2)) / 2
        pu = erfc(tu / np.sqrt(2)) / 2
        x[narrow] = np.sqrt(2) * erfcinv(2 * (pl - (pl - pu) * rng.uniform(size=len(tl))))
    return x


def truncated_standard_normal(lower, upper, rng: np.random.Generator) -> np.ndarray:
    """Vector of standard normal draws truncated to [lower, upper]."""
    l = np.atleast_1d(np.asarray(lower, dtype=np.float64)).ravel()
    u = np.atleast_1d(np.asarray(upper, dtype=np.float64)).ravel()
    if l.shape != u.shape:
        raise DimensionError("Truncation limits must have the same length")
    x = np.empty(len(l))
    upper_tail = l > _TAIL_THRESHOLD
    if np.any(upper_tail):
        x[upper_tail] = _ntail(l[upper_tail], u[upper_tail], rng)
    lower_tail = u < -_TAIL_THRESHOLD
    if np.any(lower_tail):
        x[lower_tail] = -_ntail(-u[lower_tail], -l[lower_tail], rng)
    middle = ~(upper_tail | lower_tail)
    if np.any(middle):
        x[middle] = _tn(l[middle], u[middle], rng)
    return x


def _trajectory(
    z: np.ndarray,
    walls: np.ndarray,
    offsets: np.ndarray,
    rng: np.random.Generator,
    max_bounces: int,
) -> np.ndarray:
    """One quarter-period trajectory in whitened coordinates.

    The walls are f_j . z + g_j >= 0 with f_j = walls[:, j] and g_j = offsets[:, j].
    Pixels that exceed `max_bounces` keep their starting point.
    """
    n, d = z.shape
    v = rng.standard_normal((n, d))
    if walls.shape[1] == 0:
        return v * np.sin(_TRAJECTORY_TIME) + z * np.cos(_TRAJECTORY_TIME)

    start = z.copy()
    z = z.copy()
    norms = np.einsum("nmd,nmd->nm", walls, walls)
    remaining = np.full(n, _TRAJECTORY_TIME)
    active = np.ones(n, dtype=bool)
    for _ in range(max_bounces):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        zi, vi, fi, gi = z[idx], v[idx], walls[idx], offsets[idx]
        a = np.einsum("nmd,nd->nm", fi, vi)
        b = np.einsum("nmd,nd->nm", fi, zi)
        u = np.hypot(a, b)
        crosses = u > np.abs(gi)
        ratio = np.clip(-gi / np.where(crosses, u, 1.0), -1.0, 1.0)
        t = np.arctan2(a, b) + np.arccos(ratio)
        t = np.where(t < 0, t + 2 * np.pi, t)
        on_wall = np.abs(b + gi) <= _WALL_TOL * (u + np.abs(gi))
        t = np.where(on_wall & (a < 0), 0.0, t)
        t = np.where(on_wall & (a >= 0) & (t < _WALL_TOL), np.inf, t)
        t = np.where(crosses, t, np.inf)

        hit = np.argmin(t, axis=1)
        rows = np.arange(idx.size)
        t_hit = t[rows, hit]
        done = t_hit >= remaining[idx]
        step = np.where(done, remaining[idx], t_hit)[:, None]
        z_new = vi * np.sin(step) + zi * np.cos(step)
        v_new = vi * np.cos(step) - zi * np.sin(step)

        bounced = np.flatnonzero(~done)
        if bounced.size:
            f = fi[bounced, hit[bounced]]
            dot = np.einsum("nd,nd->n", f, v_new[bounced])
            v_new[bounced] -= (2 * dot / norms[idx[bounced], hit[bounced]])[:, None] * f

        z[idx] = z_new
        v[idx] = v_new
        remaining[idx] -= step[:, 0]
        active[idx[done]] = False

    if np.any(active):
        Logger.debug(f"{int(active.sum())} trajectories exceeded {max_bounces} bounces")
        z[active] = start[active]
    return z


def exact_hmc(
    x: np.ndarray,
    mu: np.ndarray,
    Q: np.ndarray,
    constrained: np.ndarray,
    rng: np.random.Generator,
    n_trajectories: int = 1,
    max_bounces: int = _MAX_BOUNCES,
) -> np.ndarray:
    """Exact Hamiltonian Monte Carlo over a batch of truncated Gaussians.

    The Gaussian is whitened, x = mu + L^-T z with Q = L L^T, so the motion
    z(t) = v sin t + z cos t is solved in closed form and the walls x_k = 0
    of the constrained coordinates become hyperplanes. Each trajectory runs
    for pi/2 and reflects the velocity at every wall it hits.

    Args:
        x: (n, d) current points, inside the support.
        mu: (n, d) untruncated means.
        Q: (n, d, d) precision matrices.
        constrained: (d,) booleans, True where the coordinate is >= 0.
        rng: random generator.
        n_trajectories: number of independent-velocity trajectories.
        max_bounces: bounce limit of one trajectory.

    Returns:
        Updated (n, d) points.
    """
    x = np.array(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    constrained = np.asarray(constrained, dtype=bool)
    try:
        chol = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Precision is not positive definite: {e}") from e
    whitening = np.linalg.inv(chol).transpose(0, 2, 1)
    walls = whitening[:, constrained, :]
    offsets = mu[:, constrained]

    x[:, constrained] = np.maximum(x[:, constrained], 0.0)
    z = np.einsum("nji,nj->ni", chol, x - mu)
    for _ in range(n_trajectories):
        z = _trajectory(z, walls, offsets, rng, max_bounces)
    x = mu + np.einsum("nij,nj->ni", whitening, z)
    x[:, constrained] = np.maximum(x[:, constrained], 0.0)
    return x


def _constrained_mask(support: Union[Support, np.ndarray], d: int) -> np.ndarray:
    if isinstance(support, Support):
        return np.full(d, support is Support.POSITIVE_ORTHANT)
    mask = np.asarray(support, dtype=bool)
    if mask.shape != (d,):
        raise DimensionError(f"Support mask must have length {d}")
    return mask


def sample_trunc_mvn(
    mu: np.ndarray,
    Sigma: np.ndarray,
    support: Union[Support, np.ndarray],
    rng: np.random.Generator,
    initial: Optional[np.ndarray] = None,
    max_rejection_tries: int = 64,
    n_trajectories: int = 20,
) -> np.ndarray:
    """One draw from N(mu, Sigma) restricted to `support`.

    `support` is a Support value or a boolean mask of coordinates that must be
    nonnegative. A diagonal Sigma is drawn coordinate by coordinate. Otherwise
    rejection from the untruncated Gaussian is tried first; if it keeps
    failing the draw falls back to `n_trajectories` exact HMC trajectories
    started at `initial` (or at the projected mean).
    """
    mu = np.asarray(mu, dtype=np.float64)
    Sigma = np.asarray(Sigma, dtype=np.float64)
    d = mu.shape[0]
    if Sigma.shape != (d, d):
        raise DimensionError(f"Sigma must be {d}x{d}, got {Sigma.shape}")
    try:
        chol = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Covariance is not positive definite: {e}") from e

    constrained = _constrained_mask(support, d)
    if not np.any(constrained):
        return mu + chol @ rng.standard_normal(d)

    if np.count_nonzero(Sigma - np.diag(np.diag(Sigma))) == 0:
        sd = np.sqrt(np.diag(Sigma))
        lower = np.where(constrained, -mu / sd, -np.inf)
        x = mu + sd * truncated_standard_normal(lower, np.full(d, np.inf), rng)
        x[constrained] = np.maximum(x[constrained], 0.0)
        return x

    draws = mu + rng.standard_normal((max_rejection_tries, d)) @ chol.T
    inside = np.all(draws[:, constrained] >= 0, axis=1)
    if np.any(inside):
        return draws[np.argmax(inside)]

    Q = np.linalg.inv(Sigma)
    start = np.array(initial if initial is not None else mu, dtype=np.float64)
    x = exact_hmc(start[None, :], mu[None, :], Q[None, :, :], constrained, rng, n_trajectories)
    return x[0]
