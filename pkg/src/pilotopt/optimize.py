"""Max-min SINR optimization of pilot and data powers.

Two global structures are supported:

* exhaustive search over orthogonal pilot reuse patterns, one GP per pattern;
* successive approximation for arbitrary (non-orthogonal) pilots, where the
  squared pilot energy in each SINR numerator is replaced by its AM-GM
  monomial bound so that every iteration is a GP.

All SINR denominators are built once per network as posynomials in the full
variable space ``(xi, p_hat[l, k, b], p[l, k])``.  The assignment problems are
obtained from them by zeroing unused pilot bases and renaming columns.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .gp import GPProblem, Monomial, Posynomial
from .network import NetworkRealization
from .pilots import (PilotAllocation, PilotAssignment, UnsupportedStructureError,
                     assignment_count, EnumerationCapError, enumerate_assignments,
                     from_assignment)
from .se import (CorrelationModel, SinrReport, link_trace_products, sinr_assignment_all,
                 sinr_corr_all, sinr_hw_all, sinr_proposed_all)

__all__ = [
    "OptConfig",
    "OptResult",
    "OptimizationError",
    "baseline_random",
    "baseline_smart",
    "build_maxmin_gp_assignment",
    "build_maxmin_gp_sca",
    "exact_sinr",
    "solve_exhaustive",
    "solve_sca",
]

MODES = ("ideal", "hardware", "correlated")
POWER_MODES = ("joint_pilot_data", "pilot_only_full_data")
INIT_FLOOR = 1e-6


class OptimizationError(RuntimeError):
    """No sub-problem could be solved."""


@dataclass(frozen=True)
class OptConfig:
    objective_mode: str = "ideal"
    epsilon: float = 0.0
    rho: float = 0.5
    power_mode: str = "joint_pilot_data"
    sca_max_iters: int = 15
    sca_rel_tol: float = 1e-4
    init_seed: int = 0
    enumeration_cap: int = 10**6
    workers: int = 1
    tolerances: gp.Tolerances = field(default_factory=gp.Tolerances)

    def __post_init__(self):
        if self.objective_mode not in MODES:
            raise ValueError(f"objective_mode must be one of {MODES}")
        if self.power_mode not in POWER_MODES:
            raise ValueError(f"power_mode must be one of {POWER_MODES}")
        if self.sca_max_iters < 1:
            raise ValueError("sca_max_iters must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.enumeration_cap < 1 or self.sca_rel_tol < 0 or self.workers < 1:
            raise ValueError("caps and tolerances must be positive")

    @property
    def pilot_only(self) -> bool:
        return self.power_mode == "pilot_only_full_data"

    def to_dict(self) -> dict:
        return {
            "objective_mode": self.objective_mode, "epsilon": self.epsilon, "rho": self.rho,
            "power_mode": self.power_mode, "sca_max_iters": self.sca_max_iters,
            "sca_rel_tol": self.sca_rel_tol, "init_seed": self.init_seed,
            "enumeration_cap": self.enumeration_cap,
        }


@dataclass
class OptResult:
    """Outcome of one optimization.

    ``xi`` is always the exact minimum SINR at the returned powers.  ``trace``
    holds one value per SCA iteration (exact min SINR after the iteration) or
    one per enumerated assignment (GP optimum, ``nan`` if that solve failed).
    """

    xi: float
    pilot_alloc: PilotAllocation
    data_p: np.ndarray
    trace: list[float]
    sinr: np.ndarray
    method: str
    assignment: np.ndarray | None = None
    solver_statuses: list[str] = field(default_factory=list)
    solve_seconds: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def report(self, net: NetworkRealization, variant: str | None = None) -> SinrReport:
        cfg = net.config
        variant = variant or _variant_for(self.metadata.get("objective_mode", "ideal"))
        return SinrReport.build(self.sinr, self.pilot_alloc.pilot_len, cfg.coherence_len,
                                variant, metadata={"method": self.method})

    def to_json(self) -> str:
        return json.dumps({
            "method": self.method,
            "xi": self.xi,
            "pilot_powers": self.pilot_alloc.powers.tolist(),
            "data_powers": np.asarray(self.data_p).tolist(),
            "assignment": None if self.assignment is None else self.assignment.tolist(),
            "trace": [None if math.isnan(v) else v for v in self.trace],
            "solver_statuses": self.solver_statuses,
            "solve_seconds": self.solve_seconds,
            "metadata": self.metadata,
        })


def _variant_for(mode: str) -> str:
    return {"ideal": "proposed", "hardware": "hardware", "correlated": "correlated"}[mode]


def correlation_for(net: NetworkRealization, cfg: OptConfig) -> CorrelationModel:
    """Magnitude from the config, phase from the BS-user geometry."""
    return CorrelationModel(magnitude=cfg.rho, angle=net.bs_user_angles())


def exact_sinr(net: NetworkRealization, alloc: PilotAllocation, data_p, cfg: OptConfig) -> np.ndarray:
    c = net.config
    if cfg.objective_mode == "hardware":
        return sinr_hw_all(net.beta, alloc, data_p, c.noise_power, c.bs_antennas, cfg.epsilon)
    if cfg.objective_mode == "correlated":
        return sinr_corr_all(net.beta, correlation_for(net, cfg), alloc, data_p,
                             c.noise_power, c.bs_antennas)
    return sinr_proposed_all(net.beta, alloc, data_p, c.noise_power, c.bs_antennas)


# ---------------------------------------------------------------------------
# posynomial model in the full variable space


class _Layout:
    def __init__(self, L: int, K: int, tau: int):
        self.L, self.K, self.tau = L, K, tau
        self.nvars = 1 + L * K * tau + L * K

    def ph(self, l, k, b) -> int:
        return 1 + (l * self.K + k) * self.tau + b

    def pd(self, l, k) -> int:
        return 1 + self.L * self.K * self.tau + l * self.K + k

    def names(self) -> list[str]:
        out = ["xi"]
        out += [f"phat_{l}_{k}_{b}" for l in range(self.L) for k in range(self.K) for b in range(self.tau)]
        out += [f"p_{l}_{k}" for l in range(self.L) for k in range(self.K)]
        return out


def _add(*items) -> Posynomial:
    return Posynomial.sum([p for p in items if p is not None]).merged()


class _DenominatorModel:
    """Exact SINR denominators (and numerator constants) for every user."""

    def __init__(self, net: NetworkRealization, cfg: OptConfig, tau: int):
        c = net.config
        L, K = c.shape
        self.net, self.cfg = net, cfg
        self.lay = lay = _Layout(L, K, tau)
        n = lay.nvars
        beta = net.beta
        M = c.bs_antennas
        s2 = c.noise_power
        e2 = cfg.epsilon**2 if cfg.objective_mode == "hardware" else 0.0
        users = [(l, k) for l in range(L) for k in range(K)]

        g2 = {}
        cross = {}
        for a in users:
            for b_ in users:
                if (b_, a) in g2:
                    g2[a, b_] = g2[b_, a]
                    cross[a, b_] = cross[b_, a]
                    continue
                rows = np.zeros((tau, n))
                for b in range(tau):
                    rows[b, lay.ph(*a, b)] += 0.5
                    rows[b, lay.ph(*b_, b)] += 0.5
                G = Posynomial(np.ones(tau), rows)
                g2[a, b_] = G * G
                cross[a, b_] = Posynomial(np.ones(tau), 2.0 * rows)

        self.energy = {}
        for a in users:
            rows = np.zeros((tau, n))
            for b in range(tau):
                rows[b, lay.ph(*a, b)] = 1.0
            self.energy[a] = Posynomial(np.ones(tau), rows)

        def pvar(u, coeff):
            row = np.zeros(n)
            row[lay.pd(*u)] = 1.0
            return Monomial(coeff, row)

        rx = {}
        for l in range(L):
            rows = np.zeros((len(users) + 1, n))
            coeffs = np.empty(len(users) + 1)
            for j, u in enumerate(users):
                rows[j, lay.pd(*u)] = 1.0
                coeffs[j] = beta[l][u]
            coeffs[-1] = s2
            rx[l] = Posynomial(coeffs, rows)

        if cfg.objective_mode == "correlated":
            T = link_trace_products(beta, correlation_for(net, cfg), M)

        self.den = {}
        self.num_coeff = {}
        for (l, k) in users:
            me = (l, k)
            overlap = {}
            for u in users:
                if e2 > 0:
                    overlap[u] = _add(g2[me, u] * (1.0 - e2), cross[me, u] * e2)
                else:
                    overlap[u] = g2[me, u]
            contam = _add(*[overlap[u] * beta[l][u] for u in users], self.energy[me] * s2)
            coh = [overlap[u] * pvar(u, M * beta[l][u] ** 2) for u in users if u != me]
            home = beta[l, l, k]
            if cfg.objective_mode == "correlated":
                plain = _add(*[g2[me, u] * beta[l][u] for u in users])
                noncoh = []
                for u in users:
                    acc = _add(*[g2[me, v] * float(T[l][u][v]) for v in users if T[l][u][v] > 0])
                    noncoh.append(acc * pvar(u, 1.0 / M))
                # sigma2 * (E * sum p beta + D) with D = plain + sigma2 * E
                rx_data = _add(*[pvar(u, beta[l][u]) for u in users])
                extra = [self.energy[me] * rx_data * s2, plain * s2, self.energy[me] * (s2 * s2)]
                den = _add(*noncoh, *extra, *coh)
            else:
                den = _add(contam * rx[l], *coh)
            if e2 > 0:
                self_sq = cross[me, me] * pvar(me, M * e2 * home**2)
                e_sq = (self.energy[me] * self.energy[me]) * pvar(me, M * e2 * (1.0 - e2) * home**2)
                den = _add(den, self_sq, e_sq)
            self.den[me] = den
            self.num_coeff[me] = M * (1.0 - e2) ** 2 * home**2

    def caps(self):
        c = self.net.config
        return c.pilot_caps(), c.data_caps()


def _sinr_constraint(model: _DenominatorModel, user, numerator: Monomial) -> Posynomial:
    """``xi * den / numerator <= 1``."""
    n = model.lay.nvars
    xi = Monomial.from_dict(n, 1.0, {0: 1.0})
    return model.den[user] * xi / numerator


def _pilot_only(problem_parts, lay: _Layout, data_caps):
    """Fix data powers at their caps and drop their columns."""
    values = {lay.pd(l, k): data_caps[l, k] for l in range(lay.L) for k in range(lay.K)}
    keep = np.ones(lay.nvars, dtype=bool)
    keep[list(values)] = False
    mapping = np.where(keep, np.cumsum(keep) - 1, -1)
    n = int(keep.sum())
    return [p.substitute(values).remap(mapping, n) for p in problem_parts], mapping, n


# ---------------------------------------------------------------------------
# restricted structure: orthogonal pilots with reuse


def _assignment_space(model: _DenominatorModel, indices: np.ndarray):
    """Column mapping that turns the full space into ``(xi, p_tilde, p)``."""
    lay = model.lay
    L, K, tau = lay.L, lay.K, lay.tau
    mapping = np.full(lay.nvars, -1)
    zero_cols = []
    mapping[0] = 0
    for l in range(L):
        for k in range(K):
            for b in range(tau):
                if b == indices[l, k]:
                    mapping[lay.ph(l, k, b)] = 1 + l * K + k
                else:
                    zero_cols.append(lay.ph(l, k, b))
            mapping[lay.pd(l, k)] = 1 + L * K + l * K + k
    return mapping, zero_cols, 1 + 2 * L * K


def build_maxmin_gp_assignment(net: NetworkRealization, indices, cfg: OptConfig,
                               model: _DenominatorModel | None = None) -> GPProblem:
    """GP over ``(xi, p_tilde, p)`` for one reuse pattern.

    ``p_tilde`` is the full pilot energy of a user; its cap is ``tau_p`` times
    the mean-power cap.
    """
    c = net.config
    L, K = c.shape
    indices = np.asarray(indices, dtype=int)
    PilotAssignment(indices, 1.0)  # validates the permutations
    if c.pilot_len != K:
        raise UnsupportedStructureError(f"assignment structure needs tau_p == K ({K}), got {c.pilot_len}")
    model = model or _DenominatorModel(net, cfg, K)
    mapping, zero_cols, n = _assignment_space(model, indices)
    pcap, dcap = model.caps()

    cons = []
    for l in range(L):
        for k in range(K):
            den = model.den[l, k].drop_zero_variables(zero_cols).remap(mapping, n)
            num = Monomial.from_dict(n, model.num_coeff[l, k],
                                     {1 + l * K + k: 2.0, 1 + L * K + l * K + k: 1.0})
            xi = Monomial.from_dict(n, 1.0, {0: 1.0})
            cons.append(den * xi / num)
    for l in range(L):
        for k in range(K):
            cons.append(Monomial.from_dict(n, 1.0 / (K * pcap[l, k]), {1 + l * K + k: 1.0}).as_posynomial())
    for l in range(L):
        for k in range(K):
            cons.append(Monomial.from_dict(n, 1.0 / dcap[l, k], {1 + L * K + l * K + k: 1.0}).as_posynomial())
    names = ["xi"] + [f"ptilde_{l}_{k}" for l in range(L) for k in range(K)] \
        + [f"p_{l}_{k}" for l in range(L) for k in range(K)]
    objective = Monomial.from_dict(n, 1.0, {0: -1.0})

    if cfg.pilot_only:
        parts, m2, n2 = _pilot_only(cons[:2 * L * K] + [objective.as_posynomial()],
                                    _AssignLay(L, K), dcap)
        keep = [nm for j, nm in enumerate(names) if m2[j] >= 0]
        obj = parts[-1]
        return GPProblem(keep, Monomial(float(obj.coeffs[0]), obj.exponents[0]), parts[:-1])
    return GPProblem(names, objective, cons)


class _AssignLay:
    """Just enough of :class:`_Layout` for :func:`_pilot_only` in assignment space."""

    def __init__(self, L, K):
        self.L, self.K = L, K
        self.nvars = 1 + 2 * L * K

    def pd(self, l, k):
        return 1 + self.L * self.K + l * self.K + k


def _solve_timed(problem: GPProblem, tol, x0=None):
    t0 = time.perf_counter()
    sol = gp.solve(problem, tol, x0=x0)
    return sol, time.perf_counter() - t0


def _unpack_assignment(sol: gp.GPSolution, L, K, pilot_only, dcap):
    x = sol.point
    pt = x[1:1 + L * K].reshape(L, K)
    if pilot_only:
        p = dcap.copy()
    else:
        p = x[1 + L * K:1 + 2 * L * K].reshape(L, K)
    return pt, p


def solve_exhaustive(net: NetworkRealization, cfg: OptConfig) -> OptResult:
    """Best reuse pattern and powers by enumerating every pattern.

    Failed sub-solves are recorded with a ``nan`` trace entry and skipped.
    Ties (within 1e-9 relative) go to the earliest pattern.
    """
    c = net.config
    L, K = c.shape
    if c.pilot_len != K:
        raise UnsupportedStructureError(f"assignment structure needs tau_p == K ({K}), got {c.pilot_len}")
    required = assignment_count(L, K)
    if required > cfg.enumeration_cap:
        raise EnumerationCapError(required, cfg.enumeration_cap)
    model = _DenominatorModel(net, cfg, K)
    _, dcap = model.caps()
    patterns = list(enumerate_assignments(L, K, cfg.enumeration_cap))

    def run(indices):
        problem = build_maxmin_gp_assignment(net, indices, cfg, model)
        return _solve_timed(problem, cfg.tolerances)

    if cfg.workers > 1 and len(patterns) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(run, patterns))
    else:
        outcomes = [run(a) for a in patterns]

    trace, statuses, seconds = [], [], []
    best = None
    for indices, (sol, dt) in zip(patterns, outcomes):
        statuses.append(sol.status)
        seconds.append(dt)
        if not sol.optimal:
            trace.append(math.nan)
            continue
        pt, p = _unpack_assignment(sol, L, K, cfg.pilot_only, dcap)
        alloc = from_assignment(PilotAssignment(indices, pt))
        sinr = exact_sinr(net, alloc, p, cfg)
        xi = float(sinr.min())
        trace.append(xi)
        if best is None or xi > best[0] * (1.0 + 1e-9):
            best = (xi, indices, alloc, p, sinr)
    if best is None:
        raise OptimizationError(f"all {len(patterns)} assignment GPs failed: {sorted(set(statuses))}")
    xi, indices, alloc, p, sinr = best
    return OptResult(xi=xi, pilot_alloc=alloc, data_p=p, trace=trace, sinr=sinr,
                     method="exhaustive_pilot_only" if cfg.pilot_only else "exhaustive_joint",
                     assignment=indices, solver_statuses=statuses, solve_seconds=seconds,
                     metadata={**cfg.to_dict(), "assignments": len(patterns)})


# ---------------------------------------------------------------------------
# successive approximation


def _amgm_weights(powers: np.ndarray) -> np.ndarray:
    return powers / powers.sum(axis=2, keepdims=True)


def build_maxmin_gp_sca(net: NetworkRealization, alloc: PilotAllocation, data_p, cfg: OptConfig,
                        model: _DenominatorModel | None = None) -> tuple[GPProblem, np.ndarray]:
    """GP whose SINR numerators use the AM-GM bound of the pilot energy,
    expanded at ``alloc``.  Returns the problem and the weights used."""
    c = net.config
    L, K = c.shape
    tau = alloc.pilot_len
    if tau != c.pilot_len:
        raise ValueError("allocation and network disagree on the pilot length")
    if np.any(alloc.powers <= 0):
        raise ValueError("expansion point must be strictly positive")
    data_p = np.asarray(data_p, float)
    model = model or _DenominatorModel(net, cfg, tau)
    lay = model.lay
    n = lay.nvars
    pcap, dcap = model.caps()
    tol = 1e-9
    if np.any(alloc.powers.mean(axis=2) > pcap * (1 + tol)) or np.any(data_p > dcap * (1 + tol)):
        raise ValueError("expansion point violates the power caps")
    alpha = _amgm_weights(alloc.powers)

    cons = []
    for l in range(L):
        for k in range(K):
            a = alpha[l, k]
            coeff = model.num_coeff[l, k] * float(np.prod(a ** (-2.0 * a)))
            powers = {lay.ph(l, k, b): 2.0 * a[b] for b in range(tau)}
            powers[lay.pd(l, k)] = 1.0
            cons.append(_sinr_constraint(model, (l, k), Monomial.from_dict(n, coeff, powers)))
    for l in range(L):
        for k in range(K):
            rows = np.zeros((tau, n))
            for b in range(tau):
                rows[b, lay.ph(l, k, b)] = 1.0
            cons.append(Posynomial(np.full(tau, 1.0 / (tau * pcap[l, k])), rows))
    for l in range(L):
        for k in range(K):
            cons.append(Monomial.from_dict(n, 1.0 / dcap[l, k], {lay.pd(l, k): 1.0}).as_posynomial())
    names = lay.names()
    objective = Monomial.from_dict(n, 1.0, {0: -1.0})
    if cfg.pilot_only:
        parts, mapping, n2 = _pilot_only(cons[:2 * L * K] + [objective.as_posynomial()], lay, dcap)
        keep = [nm for j, nm in enumerate(names) if mapping[j] >= 0]
        obj = parts[-1]
        return GPProblem(keep, Monomial(float(obj.coeffs[0]), obj.exponents[0]), parts[:-1]), alpha
    return GPProblem(names, objective, cons), alpha


def _sca_start(net: NetworkRealization, tau: int, seed: int):
    c = net.config
    L, K = c.shape
    pcap = c.pilot_caps()
    rng = np.random.default_rng(seed)
    u = rng.uniform(INIT_FLOOR, 1.0, size=(L, K, tau))
    return u * pcap[:, :, None], c.data_caps()


def _warm_point(powers, data_p, xi, pilot_only):
    shrink = 1.0 - 1e-6
    parts = [np.array([xi]), (powers * shrink).reshape(-1)]
    if not pilot_only:
        parts.append((data_p * shrink).reshape(-1))
    return np.concatenate(parts)


def solve_sca(net: NetworkRealization, cfg: OptConfig) -> OptResult:
    """Successive approximation from a random feasible start.

    Each iteration expands the AM-GM bound at the current point and solves
    the resulting GP; the bound is tight there, so the exact min SINR can
    only go up (up to solver tolerance).
    """
    c = net.config
    L, K = c.shape
    tau = c.pilot_len
    model = _DenominatorModel(net, cfg, tau)
    _, dcap = model.caps()
    powers, data_p = _sca_start(net, tau, cfg.init_seed)
    alloc = PilotAllocation(powers)
    start_sinr = exact_sinr(net, alloc, data_p, cfg)
    trace, statuses, seconds, gp_xi = [], [], [], []
    prev = float(start_sinr.min())
    best = None
    for it in range(cfg.sca_max_iters):
        problem, _ = build_maxmin_gp_sca(net, alloc, data_p, cfg, model)
        warm = PilotAllocation(alloc.powers * (1.0 - 1e-6))
        w_sinr = exact_sinr(net, warm, data_p * (1.0 - 1e-6), cfg)
        x0 = _warm_point(alloc.powers, data_p, 0.5 * float(w_sinr.min()), cfg.pilot_only)
        sol, dt = _solve_timed(problem, cfg.tolerances, x0=x0)
        statuses.append(sol.status)
        seconds.append(dt)
        if not sol.optimal:
            break
        x = sol.point
        powers = x[1:1 + L * K * tau].reshape(L, K, tau)
        if not cfg.pilot_only:
            data_p = x[1 + L * K * tau:].reshape(L, K)
        alloc = PilotAllocation(powers)
        sinr = exact_sinr(net, alloc, data_p, cfg)
        xi = float(sinr.min())
        trace.append(xi)
        gp_xi.append(float(x[0]))
        best = (xi, alloc, data_p, sinr)
        if abs(xi - prev) <= cfg.sca_rel_tol * abs(prev):
            break
        prev = xi
    if best is None:
        raise OptimizationError(f"successive approximation failed at the first GP: {statuses}")
    xi, alloc, data_p, sinr = best
    return OptResult(xi=xi, pilot_alloc=alloc, data_p=np.asarray(data_p), trace=trace, sinr=sinr,
                     method="sca_pilot_only" if cfg.pilot_only else "sca_joint",
                     solver_statuses=statuses, solve_seconds=seconds,
                     metadata={**cfg.to_dict(), "initial_xi": float(start_sinr.min()),
                               "gp_xi": gp_xi})


# ---------------------------------------------------------------------------
# baselines


def _full_power_report(net: NetworkRealization, indices: np.ndarray, cfg: OptConfig,
                       metadata: dict) -> SinrReport:
    c = net.config
    K = c.users_per_cell
    assignment = PilotAssignment(indices, K * c.pilot_caps())
    data_p = c.data_caps()
    if cfg.objective_mode == "ideal":
        sinr = sinr_assignment_all(net.beta, assignment, data_p, c.noise_power, c.bs_antennas)
        variant = "assignment"
    else:
        sinr = exact_sinr(net, from_assignment(assignment), data_p, cfg)
        variant = _variant_for(cfg.objective_mode)
    metadata = {**metadata, "assignment": indices.tolist()}
    return SinrReport.build(sinr, c.pilot_len, c.coherence_len, variant, metadata=metadata)


def _require_orthogonal(net: NetworkRealization):
    c = net.config
    if c.pilot_len != c.users_per_cell:
        raise UnsupportedStructureError(
            f"assignment structure needs tau_p == K ({c.users_per_cell}), got {c.pilot_len}")


def baseline_random(net: NetworkRealization, cfg: OptConfig, seed: int) -> SinrReport:
    """Uniformly random pilot permutation in every cell, full powers."""
    _require_orthogonal(net)
    L, K = net.config.shape
    rng = np.random.default_rng(seed)
    indices = np.stack([rng.permutation(K) for _ in range(L)])
    return _full_power_report(net, indices, cfg, {"method": "random", "seed": seed})


def smart_assignment(beta: np.ndarray) -> np.ndarray:
    """Greedy reuse pattern from cross-gain products.

    Cells in index order; inside a cell, users with the weakest home gain
    choose first (they set the max-min objective) and take the free pilot
    whose current co-pilot users ``(i, t)`` minimize
    ``sum beta[l, i, t] * beta[i, l, k]``.  Ties go to the lowest pilot index.
    """
    L, _, K = beta.shape
    indices = np.full((L, K), -1)
    for l in range(L):
        order = sorted(range(K), key=lambda k: (beta[l, l, k], k))
        free = list(range(K))
        for k in order:
            best_pilot, best_cost = None, math.inf
            for pilot in free:
                cost = 0.0
                for i in range(l):
                    t = int(np.flatnonzero(indices[i] == pilot)[0])
                    cost += beta[l, i, t] * beta[i, l, k]
                if cost < best_cost:
                    best_pilot, best_cost = pilot, cost
            indices[l, k] = best_pilot
            free.remove(best_pilot)
    return indices


def baseline_smart(net: NetworkRealization, cfg: OptConfig) -> SinrReport:
    """Interference-aware greedy assignment with full powers (approximate
    stand-in for a mutual-interference based scheme)."""
    _require_orthogonal(net)
    indices = smart_assignment(net.beta)
    return _full_power_report(net, indices, cfg, {"method": "smart", "approximate": True})
