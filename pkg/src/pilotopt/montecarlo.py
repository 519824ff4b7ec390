"""Monte Carlo oracle for the closed-form SINR expressions.

Channels, pilot noise and (in hardware mode) pilot distortion are drawn
explicitly; estimates are formed with the same linear estimators the closed
forms assume and MR combining is applied.  The use-and-then-forget SINR

    s p |E{v^H h}|^2 / (sum_{i,t} p_{i,t} E{|v^H h_{i,t}|^2} - s p |E{v^H h}|^2 + sigma2 E{||v||^2})

is assembled from sample means (``s = 1 - eps^2`` under impairments, 1
otherwise).  Data symbols and data-phase distortion are independent of the
combiner and enter only through these second moments, so they are integrated
analytically instead of sampled.

Draws are generated in fixed-size chunks.  Chunk ``c`` uses the seed
sequence ``(seed, c, stream)`` with one stream per random quantity, and chunk
statistics are merged in chunk order; the result therefore does not depend
on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkRealization
from .pilots import PilotAllocation, inner_products
from .se import (CorrelationModel, correlation_matrix, sinr_corr_all, sinr_hw_all,
                 sinr_proposed_all)

__all__ = [
    "ComparisonReport",
    "EstimatorCheck",
    "McConfig",
    "McEstimate",
    "MomentReport",
    "closed_form_sinr",
    "estimate_channel_moments",
    "estimator_statistics",
    "simulate_sinr",
    "verify_closed_form",
]

MODES = ("ideal", "hardware", "correlated")
CHUNK = 2000
EIG_CLIP = 1e-12

_STREAM_CHANNEL = 0
_STREAM_NOISE = 1
_STREAM_DISTORTION = 2


class CovarianceError(ValueError):
    """A channel covariance matrix is not positive semidefinite."""


@dataclass(frozen=True)
class McConfig:
    n_realizations: int = 100_000
    seed: int = 0
    mode: str = "ideal"
    epsilon: float = 0.0
    rho: float = 0.5
    antennas: int | None = None
    workers: int = 1
    chunk_size: int = CHUNK

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.n_realizations < 2 or self.chunk_size < 2 or self.workers < 1:
            raise ValueError("need at least two realizations, chunks of two and one worker")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def chunks(self) -> list[int]:
        full, rest = divmod(self.n_realizations, self.chunk_size)
        sizes = [self.chunk_size] * full
        if rest:
            sizes.append(rest)
        return sizes


@dataclass
class McEstimate:
    """Per-user results, every array shaped ``(L, K)``.

    ``signal`` is ``|E{v^H h}|^2``, ``interference`` is
    ``sum p E{|v^H h|^2}`` over all users (the own user included) and
    ``noise`` is ``E{||v||^2}``.
    """

    sinr: np.ndarray
    standard_error: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    zero_pilot: np.ndarray
    n: int


# ---------------------------------------------------------------------------
# draws


class _Context:
    def __init__(self, net: NetworkRealization, alloc: PilotAllocation, data_p, mc: McConfig):
        c = net.config
        self.L, self.K = c.shape
        self.tau = alloc.pilot_len
        self.M = mc.antennas or c.bs_antennas
        self.beta = net.beta
        self.sigma2 = c.noise_power
        self.mc = mc
        self.alloc = alloc
        self.data_p = np.asarray(data_p, float)
        self.amp = alloc.amplitudes()
        g = inner_products(alloc)
        self.energy = alloc.energy()
        eps2 = mc.epsilon**2 if mc.mode == "hardware" else 0.0
        self.eps2 = eps2
        self.scale = 1.0 - eps2
        self.g_det = math.sqrt(1.0 - eps2) * g
        L, K = self.L, self.K
        if mc.mode == "hardware":
            p = alloc.powers.reshape(L * K, -1)
            cross = (p @ p.T).reshape(L, K, L, K)
            kappa = (1.0 - eps2) * g**2 + eps2 * cross
        else:
            kappa = g**2
        home = self.beta[np.arange(L), np.arange(L), :]
        den = (self.beta[:, None, :, :] * kappa).reshape(L, K, -1).sum(axis=2) + self.sigma2 * self.energy
        ok = self.energy > 0
        self.zero_pilot = ~ok
        self.coef = np.where(ok, math.sqrt(1.0 - eps2) * home * self.energy / np.where(ok, den, 1.0), 0.0)
        self.gamma = self.coef * math.sqrt(1.0 - eps2) * home * self.energy
        self.sqrt_r = None
        if mc.mode == "correlated":
            corr = CorrelationModel(magnitude=mc.rho, angle=net.bs_user_angles())
            self.sqrt_r = _sqrt_covariances(self.beta, corr.coefficients(self.beta.shape), self.M)

    def rng(self, chunk: int, stream: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.mc.seed, spawn_key=(chunk, stream)))

    def draw(self, chunk: int, n: int):
        """Channels ``h[n, l, i, t, m]`` and MR combiners ``v[n, l, k, m]``."""
        L, K, M, tau = self.L, self.K, self.M, self.tau
        rng = self.rng(chunk, _STREAM_CHANNEL)
        w = _cn(rng, (n, L, L, K, M), 1.0)
        if self.sqrt_r is None:
            h = w * np.sqrt(self.beta)[None, :, :, :, None]
        else:
            h = np.einsum("litmj,nlitj->nlitm", self.sqrt_r, w)
        noise = _cn(self.rng(chunk, _STREAM_NOISE), (n, L, M, tau), self.sigma2)
        if self.mc.mode == "hardware":
            # distortion of each transmitted pilot, shared by all receiving BSs
            var = self.eps2 * self.alloc.powers
            eta = _cn(self.rng(chunk, _STREAM_DISTORTION), (n, L, K, tau), 1.0) * np.sqrt(var)[None]
            g = self.g_det[None] + np.einsum("nitb,lkb->nlkit", eta, self.amp)
            y = np.einsum("nlitm,nlkit->nlkm", h, g)
        else:
            y = np.einsum("nlitm,lkit->nlkm", h, self.g_det)
        y = y + np.einsum("nlmb,lkb->nlkm", noise, self.amp)
        v = self.coef[None, :, :, None] * y
        return h, v


def _cn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(var / 2.0)


def _sqrt_covariances(beta: np.ndarray, r: np.ndarray, M: int) -> np.ndarray:
    """Hermitian square roots ``S`` with ``S S^H = R`` for every link."""
    L, _, K = beta.shape
    out = np.empty((L, L, K, M, M), dtype=complex)
    for idx in np.ndindex(L, L, K):
        R = correlation_matrix(beta[idx], r[idx], M)
        vals, vecs = np.linalg.eigh(R)
        top = max(vals.max(), 0.0)
        if vals.min() < -1e-9 * max(top, 1e-300):
            raise CovarianceError(f"covariance of link {idx} is not positive semidefinite")
        vals = np.where(vals < EIG_CLIP * top, 0.0, vals)
        out[idx] = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return out


# ---------------------------------------------------------------------------
# running moments


@dataclass
class _Moments:
    """Mean and centered co-moment of a vector-valued sample."""

    n: int
    mean: np.ndarray
    comoment: np.ndarray

    @classmethod
    def of(cls, X: np.ndarray) -> "_Moments":
        """``X`` has the sample axis first and the vector axis last."""
        mean = X.mean(axis=0)
        d = X - mean
        return cls(X.shape[0], mean, np.einsum("n...i,n...j->...ij", d, d))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        outer = delta[..., :, None] * delta[..., None, :]
        com = self.comoment + other.comoment + outer * (self.n * other.n / n)
        return _Moments(n, mean, com)

    def covariance_of_mean(self) -> np.ndarray:
        return self.comoment / (self.n - 1) / self.n


def _run_chunks(ctx: _Context, fn) -> _Moments:
    sizes = ctx.mc.chunks()

    def job(i):
        return fn(*ctx.draw(i, sizes[i]))

    if ctx.mc.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=ctx.mc.workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total


# ---------------------------------------------------------------------------
# SINR


def simulate_sinr(net: NetworkRealization, alloc: PilotAllocation, data_p, mc: McConfig) -> McEstimate:
    ctx = _Context(net, alloc, data_p, mc)
    L, K = ctx.L, ctx.K
    p = ctx.data_p
    ll, kk = np.arange(L)[:, None], np.arange(K)[None, :]

    def stats(h, v):
        B = np.einsum("nlkm,nlitm->nlkit", v.conj(), h)
        A = B[:, ll, kk, ll, kk]
        Q = np.sum(p[None, None, None] * np.abs(B) ** 2, axis=(3, 4))
        N = np.sum(np.abs(v) ** 2, axis=3)
        X = np.stack([A.real, A.imag, Q, N], axis=-1)
        return _Moments.of(X)

    mom = _run_chunks(ctx, stats)
    mu = mom.mean
    cov = mom.covariance_of_mean()
    s = ctx.scale
    sig_mean = mu[..., 0] ** 2 + mu[..., 1] ** 2
    S = s * p * sig_mean
    Dn = mu[..., 2] - S + ctx.sigma2 * mu[..., 3]
    ok = ~ctx.zero_pilot
    safe = np.where(ok, Dn, 1.0)
    sinr = np.where(ok, S / safe, 0.0)
    dS = (Dn + S) / safe**2
    grad = np.stack([
        dS * 2 * s * p * mu[..., 0],
        dS * 2 * s * p * mu[..., 1],
        -S / safe**2,
        -ctx.sigma2 * S / safe**2,
    ], axis=-1)
    var = np.einsum("lki,lkij,lkj->lk", grad, cov, grad)
    se = np.where(ok, np.sqrt(np.maximum(var, 0.0)), np.nan)
    return McEstimate(sinr=sinr, standard_error=se, signal=sig_mean, interference=mu[..., 2],
                      noise=mu[..., 3], zero_pilot=ctx.zero_pilot, n=mom.n)


def closed_form_sinr(net: NetworkRealization, alloc: PilotAllocation, data_p, mc: McConfig) -> np.ndarray:
    c = net.config
    M = mc.antennas or c.bs_antennas
    if mc.mode == "hardware":
        return sinr_hw_all(net.beta, alloc, data_p, c.noise_power, M, mc.epsilon)
    if mc.mode == "correlated":
        corr = CorrelationModel(magnitude=mc.rho, angle=net.bs_user_angles())
        return sinr_corr_all(net.beta, corr, alloc, data_p, c.noise_power, M)
    return sinr_proposed_all(net.beta, alloc, data_p, c.noise_power, M)


@dataclass
class ComparisonReport:
    variant: str
    closed_form: np.ndarray
    empirical: np.ndarray
    std_err: np.ndarray
    z: np.ndarray
    pass_fraction_required: float = 0.95

    @property
    def within(self) -> np.ndarray:
        return np.abs(self.z) <= 3.0

    @property
    def passed(self) -> bool:
        return bool(np.mean(self.within) >= self.pass_fraction_required)

    def rows(self):
        L, K = self.z.shape
        for l in range(L):
            for k in range(K):
                yield (l, k, self.variant, float(self.closed_form[l, k]), float(self.empirical[l, k]),
                       float(self.std_err[l, k]), float(self.z[l, k]))

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["l", "k", "variant", "closed_form", "empirical", "std_err", "z"])
        for l, k, v, cf, em, se, z in self.rows():
            w.writerow([l, k, v] + [f"{x:.17g}" for x in (cf, em, se, z)])
        return buf.getvalue()


def verify_closed_form(net: NetworkRealization, alloc: PilotAllocation, data_p, mc: McConfig,
                       closed_form=None) -> ComparisonReport:
    """Compare closed-form and simulated SINR per user.

    ``closed_form`` overrides the expression under test (an ``(L, K)`` array
    or a callable with the signature of :func:`closed_form_sinr`).
    """
    est = simulate_sinr(net, alloc, data_p, mc)
    if closed_form is None:
        cf = closed_form_sinr(net, alloc, data_p, mc)
    elif callable(closed_form):
        cf = np.asarray(closed_form(net, alloc, data_p, mc), float)
    else:
        cf = np.asarray(closed_form, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(est.zero_pilot, 0.0, (est.sinr - cf) / est.standard_error)
    return ComparisonReport(variant=mc.mode, closed_form=cf, empirical=est.sinr,
                            std_err=est.standard_error, z=z)


# ---------------------------------------------------------------------------
# estimator statistics


@dataclass
class EstimatorCheck:
    """Per-user sample statistics of the channel estimate at the home BS.

    ``variance`` is the per-antenna variance of the estimate (compare with
    ``gamma``); ``cross`` is the per-antenna ``E{conj(h_hat) e}`` with
    ``e = h - h_hat``, which must vanish.
    """

    gamma: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    cross: np.ndarray
    cross_se: np.ndarray = field(repr=False)

    @property
    def variance_z(self) -> np.ndarray:
        return (self.variance - self.gamma) / self.variance_se

    @property
    def cross_z(self) -> np.ndarray:
        """Largest of the real/imaginary z-scores of ``cross``."""
        return np.maximum(np.abs(self.cross.real) / self.cross_se[..., 0],
                          np.abs(self.cross.imag) / self.cross_se[..., 1])


def estimator_statistics(net: NetworkRealization, alloc: PilotAllocation, mc: McConfig) -> EstimatorCheck:
    ctx = _Context(net, alloc, np.ones(net.config.shape), mc)
    L, K = ctx.L, ctx.K
    ll, kk = np.arange(L)[:, None], np.arange(K)[None, :]

    def stats(h, v):
        own = h[:, ll, ll, kk]
        e = own - v
        var = np.mean(np.abs(v) ** 2, axis=3)
        cross = np.mean(v.conj() * e, axis=3)
        X = np.stack([var, cross.real, cross.imag], axis=-1)
        return _Moments.of(X)

    mom = _run_chunks(ctx, stats)
    se = np.sqrt(np.diagonal(mom.covariance_of_mean(), axis1=-2, axis2=-1))
    return EstimatorCheck(gamma=ctx.gamma, variance=mom.mean[..., 0], variance_se=se[..., 0],
                          cross=mom.mean[..., 1] + 1j * mom.mean[..., 2], cross_se=se[..., 1:])


@dataclass
class MomentReport:
    M: int
    beta: float
    n: int
    second: float
    second_se: float
    fourth: float
    fourth_se: float

    @property
    def second_expected(self) -> float:
        return self.M * self.beta

    @property
    def fourth_expected(self) -> float:
        return self.M * (self.M + 1) * self.beta**2

    @property
    def second_z(self) -> float:
        return (self.second - self.second_expected) / self.second_se

    @property
    def fourth_z(self) -> float:
        return (self.fourth - self.fourth_expected) / self.fourth_se


def estimate_channel_moments(M: int, beta: float, n: int, seed: int = 0) -> MomentReport:
    """Empirical ``E{||h||^2}`` and ``E{||h||^4}`` for ``h ~ CN(0, beta I_M)``."""
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    h = _cn(rng, (n, M), beta)
    sq = np.sum(np.abs(h) ** 2, axis=1)
    q = sq**2
    root = math.sqrt(n)
    return MomentReport(M=M, beta=beta, n=n, second=float(sq.mean()),
                        second_se=float(sq.std(ddof=1) / root),
                        fourth=float(q.mean()), fourth_se=float(q.std(ddof=1) / root))
