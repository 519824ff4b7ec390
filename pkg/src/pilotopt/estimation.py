"""Channel-estimation statistics for the three channel models.

Every function returns per-antenna scalars: the estimator is
``h_hat = coef * y_{l,k}`` with ``y_{l,k} = Y_l psi_{l,k}`` and the estimate and
error covariances are multiples of the identity (diagonal only, for the
correlated model).  Users with zero pilot energy raise
:class:`DegeneratePilotError` from the per-user functions; the array helpers
map them to ``coef = gamma = 0`` instead so that optimizers never see NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pilots import PilotAllocation, PilotAssignment, inner_products

__all__ = [
    "DegeneratePilotError",
    "EstimationStats",
    "HardwareConfig",
    "contamination_sums",
    "elementwise_mmse_coef_corr",
    "hardware_kappa",
    "lmmse_stats_hw",
    "mmse_stats",
    "mmse_stats_all",
    "mmse_stats_assignment",
]


class DegeneratePilotError(ValueError):
    """The user sends no pilot energy, so its estimator is undefined."""


@dataclass(frozen=True)
class EstimationStats:
    coef: float
    gamma: float
    err_var: float


@dataclass(frozen=True)
class HardwareConfig:
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("impairment level must lie in [0, 1]")


def contamination_sums(beta: np.ndarray, alloc: PilotAllocation, sigma2: float) -> np.ndarray:
    """Denominator of the MMSE coefficient for every user, shape ``(L, K)``.

    ``D[l, k] = sum_{i,t} beta[l, i, t] * G[l, k, i, t]**2 + sigma2 * E[l, k]``
    where ``G`` are pilot inner products and ``E`` the pilot energy.
    """
    L, K, _ = alloc.shape
    g2 = inner_products(alloc) ** 2
    terms = beta[:, None, :, :] * g2
    # contiguous last-axis reduction: numpy uses pairwise summation here
    return terms.reshape(L, K, L * K).sum(axis=2) + sigma2 * alloc.energy()


def mmse_stats_all(beta: np.ndarray, alloc: PilotAllocation, sigma2: float):
    """Vectorized ``(coef, gamma)`` for all users, zero for silent users."""
    L, K, _ = alloc.shape
    energy = alloc.energy()
    home = beta[np.arange(L), np.arange(L), :]
    den = contamination_sums(beta, alloc, sigma2)
    ok = energy > 0
    coef = np.where(ok, home * energy / np.where(ok, den, 1.0), 0.0)
    gamma = coef * home * energy
    return coef, gamma


def _stats_from(beta_home: float, energy: float, den: float) -> EstimationStats:
    coef = beta_home * energy / den
    gamma = coef * beta_home * energy
    return EstimationStats(coef=coef, gamma=gamma, err_var=beta_home - gamma)


def mmse_stats(beta: np.ndarray, alloc: PilotAllocation, sigma2: float, l: int, k: int) -> EstimationStats:
    """MMSE estimator statistics for user ``(l, k)`` at its home BS."""
    energy = float(alloc.powers[l, k].sum())
    if energy <= 0:
        raise DegeneratePilotError(f"user ({l}, {k}) has zero pilot power")
    den = contamination_sums(beta, alloc, sigma2)[l, k]
    return _stats_from(float(beta[l, l, k]), energy, float(den))


def mmse_stats_assignment(beta: np.ndarray, assignment: PilotAssignment, sigma2: float,
                          l: int, k: int) -> EstimationStats:
    """Same statistics written with the reuse set of an orthogonal assignment.

    With scalar pilot power ``p~`` the coefficient becomes
    ``beta / (sum_{reuse set} beta p~ + sigma2)``.
    """
    pt = assignment.scalar_powers
    if pt[l, k] <= 0:
        raise DegeneratePilotError(f"user ({l}, {k}) has zero pilot power")
    mask = assignment.indices == assignment.indices[l, k]
    den = float(np.sum(beta[l][mask] * pt[mask])) + sigma2
    b = float(beta[l, l, k])
    coef = b / den
    gamma = b * b * pt[l, k] / den
    return EstimationStats(coef=coef, gamma=gamma, err_var=b - gamma)


def hardware_kappa(alloc: PilotAllocation, epsilon: float) -> np.ndarray:
    """``kappa[l, k, i, t]``: effective squared pilot overlap under impairments."""
    L, K, tau = alloc.shape
    p = alloc.powers.reshape(L * K, tau)
    g2 = inner_products(alloc) ** 2
    cross = (p @ p.T).reshape(L, K, L, K)
    e2 = epsilon * epsilon
    return (1.0 - e2) * g2 + e2 * cross


def lmmse_stats_hw(beta: np.ndarray, alloc: PilotAllocation, sigma2: float, hw: HardwareConfig,
                   l: int, k: int) -> tuple[EstimationStats, np.ndarray]:
    """LMMSE estimator under transceiver impairments.

    Returns the statistics and ``kappa[i, t]`` for the user.  The estimate and
    the error are uncorrelated but *not* independent; ``err_var`` includes the
    user's own pilot distortion and equals ``beta - gamma``.
    """
    eps = hw.epsilon
    p = alloc.powers
    energy = float(p[l, k].sum())
    if energy <= 0:
        raise DegeneratePilotError(f"user ({l}, {k}) has zero pilot power")
    kappa = hardware_kappa(alloc, eps)[l, k]
    weighted = beta[l] * kappa
    den = float(weighted.sum()) + sigma2 * energy
    b = float(beta[l, l, k])
    e2 = eps * eps
    coef = np.sqrt(1.0 - e2) * b * energy / den
    gamma = (1.0 - e2) * b * b * energy * energy / den
    # uncorrelated estimate and error: the variances add up to beta
    others = float(weighted.sum() - weighted[l, k])
    err_var = b * (others + sigma2 * energy + e2 * b * float(np.sum(p[l, k] ** 2))) / den
    return EstimationStats(coef=float(coef), gamma=gamma, err_var=err_var), kappa


def elementwise_mmse_coef_corr(beta_diag: np.ndarray, alloc: PilotAllocation, sigma2: float,
                               l: int, k: int) -> float:
    """Element-wise MMSE coefficient for correlated fading.

    Only the diagonals of the covariance matrices enter, so this equals the
    uncorrelated MMSE coefficient evaluated with those diagonals.
    """
    return mmse_stats(beta_diag, alloc, sigma2, l, k).coef
