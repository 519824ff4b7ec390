"""Closed-form uplink SINR and spectral efficiency with MR combining.

All ``*_all`` functions return an ``(L, K)`` array for every user at once; the
per-user functions are thin wrappers kept for readability in tests and
scripts.  Arguments follow one convention throughout:

``beta``    gain tensor ``beta[l, i, t]`` (user ``(i, t)`` to BS ``l``)
``alloc``   :class:`~pilotopt.pilots.PilotAllocation`
``data_p``  data powers, shape ``(L, K)``
``sigma2``  noise power (mW)
``M``       BS antennas
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .estimation import contamination_sums, hardware_kappa
from .pilots import PilotAllocation, PilotAssignment, inner_products

__all__ = [
    "CorrelationModel",
    "SinrReport",
    "correlation_matrix",
    "se_from_sinr",
    "sinr_approx",
    "sinr_approx_all",
    "sinr_assignment",
    "sinr_assignment_all",
    "sinr_asymptotic",
    "sinr_asymptotic_all",
    "sinr_corr",
    "sinr_corr_all",
    "sinr_hw",
    "sinr_hw_all",
    "sinr_proposed",
    "sinr_proposed_all",
    "trace_products",
    "trace_product_dense",
]

VARIANTS = ("proposed", "assignment", "approx", "hardware", "correlated", "asymptotic")


def _home(beta: np.ndarray) -> np.ndarray:
    L = beta.shape[0]
    return beta[np.arange(L), np.arange(L), :]


def _others_mask(L: int, K: int) -> np.ndarray:
    """``mask[l, k, i, t]`` true for ``(i, t) != (l, k)``."""
    return ~np.eye(L * K, dtype=bool).reshape(L, K, L, K)


def _received_power(beta: np.ndarray, data_p: np.ndarray, sigma2: float) -> np.ndarray:
    """``sum_{i,t} p_{i,t} beta[l, i, t] + sigma2`` per BS, broadcast to users."""
    L = beta.shape[0]
    per_bs = (beta * data_p[None]).reshape(L, -1).sum(axis=1) + sigma2
    return per_bs[:, None]


def _coherent(beta: np.ndarray, data_p: np.ndarray, overlap: np.ndarray, M: int) -> np.ndarray:
    """``M sum_{(i,t) != (l,k)} p beta^2 overlap`` for every user."""
    L, K = data_p.shape
    terms = (data_p * beta**2)[:, None, :, :] * overlap * _others_mask(L, K)
    return M * terms.reshape(L, K, L * K).sum(axis=2)


def sinr_proposed_all(beta, alloc: PilotAllocation, data_p, sigma2: float, M: int) -> np.ndarray:
    data_p = np.asarray(data_p, float)
    energy = alloc.energy()
    home = _home(beta)
    g2 = inner_products(alloc) ** 2
    num = M * home**2 * data_p * energy**2
    den = contamination_sums(beta, alloc, sigma2) * _received_power(beta, data_p, sigma2)
    den = den + _coherent(beta, data_p, g2, M)
    return np.where(energy > 0, num / den, 0.0)


def sinr_proposed(beta, alloc, data_p, sigma2, M, l, k) -> float:
    """SINR of user ``(l, k)`` with arbitrary pilots, ideal hardware."""
    return float(sinr_proposed_all(beta, alloc, data_p, sigma2, M)[l, k])


def sinr_assignment_all(beta, assignment: PilotAssignment, data_p, sigma2: float, M: int) -> np.ndarray:
    """SINR for orthogonal-within-cell pilots written with reuse sets."""
    data_p = np.asarray(data_p, float)
    L, K = assignment.shape
    pt = assignment.scalar_powers
    home = _home(beta)
    mask = assignment.co_pilot_mask()
    contam = (beta[:, None, :, :] * pt[None, None] * mask).reshape(L, K, -1).sum(axis=2) + sigma2
    coh = (data_p * pt * beta**2)[:, None, :, :] * mask * _others_mask(L, K)
    coh = M * coh.reshape(L, K, -1).sum(axis=2)
    num = M * home**2 * data_p * pt
    den = contam * _received_power(beta, data_p, sigma2) + coh
    return np.where(pt > 0, num / den, 0.0)


def sinr_assignment(beta, assignment, data_p, sigma2, M, l, k) -> float:
    return float(sinr_assignment_all(beta, assignment, data_p, sigma2, M)[l, k])


def _check_weights(weights: np.ndarray, shape) -> np.ndarray:
    w = np.asarray(weights, float)
    if w.shape != shape:
        raise ValueError(f"weights must have shape {shape}")
    if np.any(w < 0) or np.any(np.abs(w.sum(axis=2) - 1.0) > 1e-9):
        raise ValueError("weights must be non-negative and sum to one per user")
    return w


def amgm_energy_bound(powers: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Monomial lower bound ``prod_b (p_b / a_b)^{a_b}`` of the pilot energy.

    Zero weights contribute a factor one (the limit of ``(p/a)^a`` as
    ``a -> 0``).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(weights > 0, weights * (np.log(powers) - np.log(weights)), 0.0)
    return np.exp(logs.sum(axis=2))


def sinr_approx_all(beta, alloc: PilotAllocation, data_p, sigma2: float, M: int, weights) -> np.ndarray:
    """SINR with the squared pilot energy in the numerator replaced by its
    AM-GM monomial bound.  Never exceeds :func:`sinr_proposed_all`."""
    data_p = np.asarray(data_p, float)
    w = _check_weights(weights, alloc.shape)
    bound = amgm_energy_bound(alloc.powers, w)
    home = _home(beta)
    g2 = inner_products(alloc) ** 2
    num = M * home**2 * data_p * bound**2
    den = contamination_sums(beta, alloc, sigma2) * _received_power(beta, data_p, sigma2)
    den = den + _coherent(beta, data_p, g2, M)
    return np.where(alloc.energy() > 0, num / den, 0.0)


def sinr_approx(beta, alloc, data_p, sigma2, M, weights, l, k) -> float:
    return float(sinr_approx_all(beta, alloc, data_p, sigma2, M, weights)[l, k])


def sinr_hw_all(beta, alloc: PilotAllocation, data_p, sigma2: float, M: int, epsilon: float) -> np.ndarray:
    """SINR under transceiver impairments of level ``epsilon``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    data_p = np.asarray(data_p, float)
    L, K, _ = alloc.shape
    e2 = epsilon * epsilon
    energy = alloc.energy()
    home = _home(beta)
    kappa = hardware_kappa(alloc, epsilon)
    d_kappa = (beta[:, None, :, :] * kappa).reshape(L, K, -1).sum(axis=2) + sigma2 * energy
    self_sq = np.sum(alloc.powers**2, axis=2)
    eta = (_coherent(beta, data_p, kappa, M)
           + M * e2 * data_p * home**2 * self_sq
           + M * e2 * (1.0 - e2) * energy**2 * data_p * home**2)
    num = M * (1.0 - e2) ** 2 * data_p * home**2 * energy**2
    den = d_kappa * _received_power(beta, data_p, sigma2) + eta
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where((energy > 0) & (num > 0), out, 0.0)


def sinr_hw(beta, alloc, data_p, sigma2, M, epsilon, l, k) -> float:
    return float(sinr_hw_all(beta, alloc, data_p, sigma2, M, epsilon)[l, k])


@dataclass(frozen=True)
class CorrelationModel:
    """Exponential antenna correlation ``r = rho * exp(j theta)`` per link.

    ``magnitude`` and ``angle`` broadcast to the gain-tensor shape
    ``(L, L, K)``.
    """

    magnitude: float | np.ndarray = 0.5
    angle: float | np.ndarray = 0.0

    def __post_init__(self):
        rho = np.asarray(self.magnitude, float)
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError("correlation magnitude must lie in [0, 1]")

    def coefficients(self, shape) -> np.ndarray:
        rho = np.broadcast_to(np.asarray(self.magnitude, float), shape)
        theta = np.broadcast_to(np.asarray(self.angle, float), shape)
        return rho * np.exp(1j * theta)


def correlation_matrix(beta: float, r: complex, M: int) -> np.ndarray:
    """Dense ``beta * [r^(m-n) below the diagonal, conj(r)^(n-m) above]``."""
    m = np.arange(M)
    d = m[:, None] - m[None, :]
    lower = np.power(r, np.abs(d))
    R = np.where(d >= 0, lower, np.conj(lower))
    return beta * R


def trace_products(beta_a, r_a, beta_b, r_b, M: int) -> np.ndarray:
    """``tr(R_a R_b)`` for exponential-correlation matrices, O(M) per pair.

    ``tr(R_a R_b) = beta_a beta_b [M + 2 Re sum_{d=1}^{M-1} (M - d) (r_a conj(r_b))^d]``.
    Inputs broadcast against each other.
    """
    z = np.asarray(r_a) * np.conj(np.asarray(r_b))
    d = np.arange(1, M)
    series = np.sum((M - d) * np.power(z[..., None], d), axis=-1) if M > 1 else 0.0
    return np.asarray(beta_a) * np.asarray(beta_b) * (M + 2.0 * np.real(series))


def trace_product_dense(beta_a, r_a, beta_b, r_b, M: int) -> float:
    Ra = correlation_matrix(beta_a, r_a, M)
    Rb = correlation_matrix(beta_b, r_b, M)
    return float(np.real(np.trace(Ra @ Rb)))


def link_trace_products(beta: np.ndarray, corr: CorrelationModel, M: int) -> np.ndarray:
    """``T[l, i, t, i', t'] = tr(R^l_{i,t} R^l_{i',t'})`` for every BS."""
    r = corr.coefficients(beta.shape)
    L, _, K = beta.shape
    out = np.empty((L, L, K, L, K))
    for l in range(L):
        out[l] = trace_products(beta[l][:, :, None, None], r[l][:, :, None, None],
                                beta[l][None, None], r[l][None, None], M)
    return out


def sinr_corr_all(beta, corr: CorrelationModel, alloc: PilotAllocation, data_p, sigma2: float,
                  M: int, traces: np.ndarray | None = None) -> np.ndarray:
    """SINR with exponentially correlated Rayleigh fading and element-wise
    MMSE estimation.  ``beta`` holds the covariance diagonals.

    Only the non-coherent part of the interference changes with respect to
    uncorrelated fading.  ``traces`` may be supplied to reuse
    :func:`link_trace_products`.
    """
    data_p = np.asarray(data_p, float)
    L, K, _ = alloc.shape
    energy = alloc.energy()
    home = _home(beta)
    g2 = inner_products(alloc) ** 2
    T = link_trace_products(beta, corr, M) if traces is None else traces
    # sum_{i',t'} T[l, i, t, i', t'] g2[l, k, i', t'] -> [l, k, i, t]
    weighted = np.einsum("lituv,lkuv->lkit", T, g2)
    noncoh = ((data_p[None, None] / M) * weighted).reshape(L, K, -1).sum(axis=2)
    d = contamination_sums(beta, alloc, sigma2)
    rx = (beta * data_p[None]).reshape(L, -1).sum(axis=1)[:, None]
    noncoh = noncoh + sigma2 * energy * rx + sigma2 * d
    coh = _coherent(beta, data_p, g2, M)
    num = M * home**2 * data_p * energy**2
    return np.where(energy > 0, num / (noncoh + coh), 0.0)


def sinr_corr(beta, corr, alloc, data_p, sigma2, M, l, k) -> float:
    return float(sinr_corr_all(beta, corr, alloc, data_p, sigma2, M)[l, k])


def sinr_asymptotic_all(beta, alloc: PilotAllocation, data_p) -> np.ndarray:
    """Large-antenna limit; ``math.inf`` where no coherent interference exists."""
    data_p = np.asarray(data_p, float)
    energy = alloc.energy()
    home = _home(beta)
    g2 = inner_products(alloc) ** 2
    den = _coherent(beta, data_p, g2, 1)
    num = home**2 * data_p * energy**2
    out = np.full(den.shape, math.inf)
    np.divide(num, den, out=out, where=den > 0)
    return np.where(num > 0, out, 0.0)


def sinr_asymptotic(beta, alloc, data_p, l, k) -> float:
    return float(sinr_asymptotic_all(beta, alloc, data_p)[l, k])


def se_from_sinr(sinr, pilot_len: int, coherence_len: int):
    """Spectral efficiency [b/s/Hz] with the pilot-overhead prelog."""
    if not pilot_len < coherence_len:
        raise ValueError("pilot_len must be shorter than the coherence interval")
    out = (1.0 - pilot_len / coherence_len) * np.log2(1.0 + np.asarray(sinr, float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SinrReport:
    sinr: np.ndarray
    se: np.ndarray
    variant: str
    metadata: dict | None = None

    @classmethod
    def build(cls, sinr, pilot_len: int, coherence_len: int, variant: str,
              metadata: dict | None = None) -> "SinrReport":
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        sinr = np.asarray(sinr, float)
        return cls(sinr=sinr, se=se_from_sinr(sinr, pilot_len, coherence_len),
                   variant=variant, metadata=metadata)

    @property
    def min_user(self) -> tuple[int, int]:
        idx = np.unravel_index(int(np.argmin(self.sinr)), self.sinr.shape)
        return int(idx[0]), int(idx[1])

    @property
    def min_sinr(self) -> float:
        return float(self.sinr.min())

    @property
    def min_se(self) -> float:
        return float(self.se.min())

    @property
    def unbounded(self) -> np.ndarray:
        return np.isinf(self.sinr)

    def rows(self):
        L, K = self.sinr.shape
        for l in range(L):
            for k in range(K):
                yield l, k, self.variant, float(self.sinr[l, k]), float(self.se[l, k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "k", "variant", "sinr", "se"])
        for l, k, v, s, r in self.rows():
            w.writerow([l, k, v, f"{s:.17g}", f"{r:.17g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "variant": self.variant,
            "sinr": [[_json_float(x) for x in row] for row in self.sinr.tolist()],
            "se": [[_json_float(x) for x in row] for row in self.se.tolist()],
            "min_user": list(self.min_user),
            "metadata": self.metadata or {},
        })


def _json_float(x: float):
    return "inf" if math.isinf(x) else x
