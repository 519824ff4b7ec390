"""Geometric programming: posynomial algebra and a log-space barrier solver.

A GP in standard form is

    minimize    f0(x)                  (monomial)
    subject to  f_i(x) <= 1            (posynomials)

over strictly positive ``x``.  With ``x = exp(y)`` every ``log f_i`` becomes a
convex log-sum-exp of affine functions and ``log f0`` is affine, so the
problem is solved with a standard path-following barrier method (damped
Newton steps, backtracking line search).  A phase-I problem supplies a
strictly feasible start when none is given.

Posynomials are stored as a coefficient vector plus an exponent matrix with
one column per problem variable, which keeps evaluation and derivatives
fully vectorized.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GPProblem",
    "GPSolution",
    "Monomial",
    "Posynomial",
    "Tolerances",
    "amgm_monomial_bound",
    "evaluate",
    "solve",
]


@dataclass(frozen=True)
class Monomial:
    coeff: float
    exponents: np.ndarray

    def __post_init__(self):
        if not self.coeff > 0:
            raise ValueError("monomial coefficient must be positive")
        object.__setattr__(self, "exponents", np.asarray(self.exponents, dtype=float))

    @classmethod
    def from_dict(cls, nvars: int, coeff: float, powers: dict[int, float] | None = None) -> "Monomial":
        e = np.zeros(nvars)
        for j, a in (powers or {}).items():
            e[j] += a
        return cls(coeff, e)

    @property
    def nvars(self) -> int:
        return self.exponents.shape[0]

    def evaluate(self, x) -> float:
        x = _positive_point(x)
        return float(self.coeff * np.prod(x**self.exponents))

    def inverse(self) -> "Monomial":
        return Monomial(1.0 / self.coeff, -self.exponents)

    def as_posynomial(self) -> "Posynomial":
        return Posynomial(np.array([self.coeff]), self.exponents[None, :])

    def __mul__(self, other):
        if isinstance(other, Monomial):
            return Monomial(self.coeff * other.coeff, self.exponents + other.exponents)
        if np.isscalar(other):
            return Monomial(self.coeff * float(other), self.exponents)
        return NotImplemented

    __rmul__ = __mul__

    def __add__(self, other):
        return self.as_posynomial() + other

    __radd__ = __add__


@dataclass(frozen=True)
class Posynomial:
    coeffs: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        e = np.asarray(self.exponents, dtype=float)
        if e.ndim != 2 or e.shape[0] != c.shape[0]:
            raise ValueError("exponents must be (terms, variables)")
        if c.size == 0:
            raise ValueError("a posynomial needs at least one term")
        if np.any(c <= 0):
            raise ValueError("posynomial coefficients must be positive")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "exponents", e)

    @classmethod
    def from_monomials(cls, terms) -> "Posynomial":
        terms = list(terms)
        return cls(np.array([t.coeff for t in terms]), np.stack([t.exponents for t in terms]))

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Posynomial":
        return cls(np.array([value]), np.zeros((1, nvars)))

    @classmethod
    def sum(cls, items) -> "Posynomial":
        items = [p.as_posynomial() if isinstance(p, Monomial) else p for p in items]
        return cls(np.concatenate([p.coeffs for p in items]),
                   np.concatenate([p.exponents for p in items]))

    @property
    def nvars(self) -> int:
        return self.exponents.shape[1]

    @property
    def nterms(self) -> int:
        return self.coeffs.shape[0]

    def terms(self) -> list[Monomial]:
        return [Monomial(c, e) for c, e in zip(self.coeffs, self.exponents)]

    def __add__(self, other):
        if isinstance(other, (Posynomial, Monomial)):
            return Posynomial.sum([self, other])
        if np.isscalar(other):
            return Posynomial.sum([self, Posynomial.constant(self.nvars, float(other))])
        return NotImplemented

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            return Posynomial(self.coeffs * float(other), self.exponents)
        if isinstance(other, Monomial):
            return Posynomial(self.coeffs * other.coeff, self.exponents + other.exponents)
        if isinstance(other, Posynomial):
            c = np.multiply.outer(self.coeffs, other.coeffs).reshape(-1)
            e = (self.exponents[:, None, :] + other.exponents[None, :, :]).reshape(-1, self.nvars)
            return Posynomial(c, e).merged()
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Monomial):
            return self * other.inverse()
        if np.isscalar(other):
            return self * (1.0 / float(other))
        return NotImplemented

    def merged(self) -> "Posynomial":
        """Combine terms with identical exponent rows."""
        rows, inverse = np.unique(self.exponents, axis=0, return_inverse=True)
        if rows.shape[0] == self.nterms:
            return self
        c = np.zeros(rows.shape[0])
        np.add.at(c, inverse.reshape(-1), self.coeffs)
        return Posynomial(c, rows)

    def evaluate(self, x) -> float:
        x = _positive_point(x)
        return float(np.sum(self.coeffs * np.prod(x[None, :] ** self.exponents, axis=1)))

    def log_evaluate(self, y) -> float:
        """``log f(exp(y))`` computed as a stable log-sum-exp."""
        z = self.exponents @ np.asarray(y, float) + np.log(self.coeffs)
        zmax = z.max()
        return float(zmax + np.log(np.sum(np.exp(z - zmax))))

    def drop_zero_variables(self, columns) -> "Posynomial | None":
        """Set the listed variables to zero: terms with a positive exponent on
        any of them vanish.  Returns ``None`` if nothing is left."""
        columns = np.asarray(list(columns), dtype=int)
        if columns.size == 0:
            return self
        sub = self.exponents[:, columns]
        if np.any(sub < 0):
            raise ValueError("cannot zero a variable that appears with a negative exponent")
        keep = np.all(sub == 0, axis=1)
        if not np.any(keep):
            return None
        return Posynomial(self.coeffs[keep], self.exponents[keep])

    def substitute(self, values: dict[int, float]) -> "Posynomial":
        """Fix variables to positive constants (columns are kept, set to zero)."""
        c = self.coeffs.copy()
        e = self.exponents.copy()
        for j, v in values.items():
            c = c * float(v) ** e[:, j]
            e[:, j] = 0.0
        return Posynomial(c, e)

    def remap(self, mapping: np.ndarray, nvars: int) -> "Posynomial":
        """Move column ``j`` to ``mapping[j]`` (``-1`` drops a column that must
        be unused).  Columns mapped to the same target are added."""
        mapping = np.asarray(mapping, dtype=int)
        dropped = mapping < 0
        if np.any(self.exponents[:, dropped] != 0):
            raise ValueError("dropping a variable that is still in use")
        e = np.zeros((self.nterms, nvars))
        for j in np.flatnonzero(~dropped):
            e[:, mapping[j]] += self.exponents[:, j]
        return Posynomial(self.coeffs, e).merged()


def remap_monomial(m: Monomial, mapping: np.ndarray, nvars: int) -> Monomial:
    p = m.as_posynomial().remap(mapping, nvars)
    return Monomial(float(p.coeffs[0]), p.exponents[0])


def _positive_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("posynomials are only defined at strictly positive points")
    return x


def evaluate(p: Posynomial | Monomial, point) -> float:
    return p.evaluate(point)


def amgm_monomial_bound(p: Posynomial, x0) -> tuple[Monomial, np.ndarray]:
    """Best local monomial under-estimator of ``p`` at ``x0``.

    Weighted AM-GM with weights ``a_n = u_n(x0) / p(x0)`` gives
    ``p(x) >= prod_n (u_n(x) / a_n)^{a_n}`` for all positive ``x``, with
    equality (and matching gradient) at ``x0``.
    """
    x0 = _positive_point(x0)
    u = p.coeffs * np.prod(x0[None, :] ** p.exponents, axis=1)
    alpha = u / u.sum()
    coeff = float(np.exp(np.sum(alpha * (np.log(p.coeffs) - np.log(alpha)))))
    exps = alpha @ p.exponents
    return Monomial(coeff, exps), alpha


@dataclass
class GPProblem:
    """``minimize objective`` s.t. ``constraint <= 1`` for every constraint.

    ``upper_bounds`` maps a variable index to its cap; it is turned into a
    single-term constraint ``x_j / cap <= 1`` when solving.
    """

    names: list[str]
    objective: Monomial
    constraints: list[Posynomial]
    upper_bounds: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.names)
        if self.objective.nvars != n or any(c.nvars != n for c in self.constraints):
            raise ValueError("all functions must share the problem's variable space")
        for j, cap in self.upper_bounds.items():
            if not cap > 0:
                raise ValueError(f"upper bound of {self.names[j]} must be positive")
        used = np.abs(self.objective.exponents) > 0
        for c in self.constraints:
            used |= np.any(c.exponents != 0, axis=0)
        for j in self.upper_bounds:
            used[j] = True
        if not np.all(used):
            unused = [self.names[j] for j in np.flatnonzero(~used)]
            raise ValueError(f"variables never referenced: {unused}")

    @property
    def nvars(self) -> int:
        return len(self.names)

    def all_constraints(self) -> list[Posynomial]:
        out = list(self.constraints)
        n = self.nvars
        for j, cap in sorted(self.upper_bounds.items()):
            out.append(Monomial.from_dict(n, 1.0 / cap, {j: 1.0}).as_posynomial())
        return out

    def max_violation(self, x) -> float:
        """``max_i f_i(x) - 1``; non-positive at feasible points."""
        return max(c.evaluate(x) for c in self.all_constraints()) - 1.0

    def dump(self) -> str:
        """Plain-text canonical form: one monomial per line, coefficient then
        exponents; blocks introduced by ``objective`` / ``constraint i``."""
        buf = io.StringIO()
        buf.write("variables " + " ".join(self.names) + "\n")
        buf.write("objective\n")
        _dump_terms(buf, [self.objective])
        for i, c in enumerate(self.all_constraints()):
            buf.write(f"constraint {i}\n")
            _dump_terms(buf, c.terms())
        return buf.getvalue()


def _dump_terms(buf, terms):
    for t in terms:
        buf.write(" ".join([f"{t.coeff:.17g}"] + [f"{a:.17g}" for a in t.exponents]) + "\n")


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-8
    gap: float = 1e-7
    newton_max: int = 200
    barrier_growth: float = 10.0
    log_floor: float = -40.0
    log_ceiling: float = 40.0
    max_stages: int = 40


@dataclass
class GPSolution:
    point: np.ndarray
    objective_value: float
    status: str
    kkt_residual: float
    newton_steps: int = 0
    names: list[str] = field(default_factory=list)

    def value(self, name: str) -> float:
        return float(self.point[self.names.index(name)])

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _LogSumExpSet:
    """All constraints ``log sum exp(A y + b) <= 0`` stacked for vectorized
    evaluation; terms of constraint ``i`` occupy ``starts[i]:starts[i+1]``."""

    def __init__(self, posys: list[Posynomial], extra_column: bool = False):
        A = np.concatenate([p.exponents for p in posys])
        if extra_column:
            A = np.hstack([A, -np.ones((A.shape[0], 1))])
        self.A = A
        self.b = np.concatenate([np.log(p.coeffs) for p in posys])
        sizes = np.array([p.nterms for p in posys])
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.owner = np.repeat(np.arange(len(posys)), sizes)
        self.m = len(posys)

    def values(self, y: np.ndarray) -> np.ndarray:
        z = self.A @ y + self.b
        zmax = np.maximum.reduceat(z, self.starts)
        s = np.add.reduceat(np.exp(z - zmax[self.owner]), self.starts)
        return zmax + np.log(s)

    def derivatives(self, y: np.ndarray):
        z = self.A @ y + self.b
        zmax = np.maximum.reduceat(z, self.starts)
        e = np.exp(z - zmax[self.owner])
        s = np.add.reduceat(e, self.starts)
        F = zmax + np.log(s)
        pi = e / s[self.owner]
        G = np.add.reduceat(pi[:, None] * self.A, self.starts, axis=0)
        return F, pi, G


class _Barrier:
    """Centering problem ``t * c.y - sum log(-F_i) - sum log(box slack)``."""

    def __init__(self, cons: _LogSumExpSet, c: np.ndarray, lo: np.ndarray, hi: np.ndarray):
        self.cons = cons
        self.c = c
        self.lo = lo
        self.hi = hi
        self.has_lo = np.isfinite(lo)
        self.has_hi = np.isfinite(hi)
        self.m_total = cons.m + int(self.has_lo.sum()) + int(self.has_hi.sum())

    def strictly_feasible(self, y) -> bool:
        if np.any(y[self.has_lo] <= self.lo[self.has_lo]) or np.any(y[self.has_hi] >= self.hi[self.has_hi]):
            return False
        return bool(np.all(self.cons.values(y) < 0))

    def value(self, y, t) -> float:
        F = self.cons.values(y)
        if np.any(F >= 0):
            return math.inf
        dl = y[self.has_lo] - self.lo[self.has_lo]
        dh = self.hi[self.has_hi] - y[self.has_hi]
        if np.any(dl <= 0) or np.any(dh <= 0):
            return math.inf
        return float(t * self.c @ y - np.sum(np.log(-F)) - np.sum(np.log(dl)) - np.sum(np.log(dh)))

    def newton_system(self, y, t):
        F, pi, G = self.cons.derivatives(y)
        u = -F
        grad = t * self.c + G.T @ (1.0 / u)
        w = pi / u[self.cons.owner]
        A = self.cons.A
        H = (A * w[:, None]).T @ A + (G * (1.0 / u**2 - 1.0 / u)[:, None]).T @ G
        n = y.shape[0]
        dl = np.where(self.has_lo, y - self.lo, np.inf)
        dh = np.where(self.has_hi, self.hi - y, np.inf)
        grad = grad - 1.0 / dl + 1.0 / dh
        H[np.diag_indices(n)] += 1.0 / dl**2 + 1.0 / dh**2
        return grad, H, u, G

    def center(self, y, t, tol: Tolerances, early_stop=None):
        steps = 0
        for _ in range(tol.newton_max):
            grad, H, _, _ = self.newton_system(y, t)
            dx = _solve_psd(H, -grad)
            lam2 = float(-grad @ dx)
            # gradient rounding grows with t; the centering error lam2 / t stays tiny
            if lam2 / 2.0 <= max(1e-9, 1e-11 * t):
                return y, steps, True
            phi0 = self.value(y, t)
            # phi grows like t, so decreases below its rounding level are noise
            slack = 1e-13 * (1.0 + abs(phi0))
            s = 1.0
            while s > 1e-16:
                cand = y + s * dx
                phi = self.value(cand, t)
                if phi <= phi0 + 0.25 * s * float(grad @ dx) + slack:
                    break
                s *= 0.5
            else:
                return y, steps, True  # no further progress at machine precision
            y = cand
            steps += 1
            if early_stop is not None and early_stop(y):
                return y, steps, True
        return y, steps, False


def _solve_psd(H, rhs):
    try:
        c = np.linalg.cholesky(H)
        z = np.linalg.solve(c, rhs)
        return np.linalg.solve(c.T, z)
    except np.linalg.LinAlgError:
        reg = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(H)))))
        return np.linalg.lstsq(H + reg * np.eye(H.shape[0]), rhs, rcond=None)[0]


def _box(problem: GPProblem, tol: Tolerances):
    n = problem.nvars
    lo = np.full(n, tol.log_floor)
    hi = np.full(n, tol.log_ceiling)
    return lo, hi


def _initial_log_point(problem: GPProblem, tol: Tolerances, lo, hi) -> np.ndarray:
    """Midpoint in log space of each variable's range (its geometric mean)."""
    y = 0.5 * (lo + hi)
    for j, cap in problem.upper_bounds.items():
        y[j] = 0.5 * (tol.log_floor + math.log(cap))
    return y


def _phase_one(cons_list, lo, hi, y0, tol: Tolerances):
    """Find ``y`` with every constraint strictly negative, or report failure.

    Solves ``min s`` s.t. ``F_i(y) <= s`` and stops as soon as ``s`` drops
    below zero with some margin.
    """
    cons = _LogSumExpSet(cons_list, extra_column=True)
    n = y0.shape[0]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    lo1 = np.append(lo, -np.inf)
    hi1 = np.append(hi, np.inf)
    F0 = _LogSumExpSet(cons_list).values(y0)
    z = np.append(y0, max(float(F0.max()), 0.0) + 1.0)
    barrier = _Barrier(cons, c, lo1, hi1)
    plain = _LogSumExpSet(cons_list)

    def done(zz):
        return float(plain.values(zz[:-1]).max()) < -1e-6

    t = 1.0
    steps = 0
    for _ in range(tol.max_stages):
        z, k, _ = barrier.center(z, t, tol, early_stop=done)
        steps += k
        if done(z):
            return z[:-1], steps, True
        if barrier.m_total / t < tol.gap:
            break
        t *= tol.barrier_growth
    return z[:-1], steps, bool(done(z))


def solve(problem: GPProblem, tol: Tolerances | None = None, x0=None) -> GPSolution:
    """Solve a GP; ``x0`` is an optional warm start (used if strictly feasible).

    Status is ``optimal``, ``infeasible``, ``unbounded`` (the objective runs
    into the ``exp(+-40)`` box) or ``max_iter``.
    """
    tol = tol or Tolerances()
    cons_list = problem.all_constraints()
    lo, hi = _box(problem, tol)
    names = list(problem.names)

    y = None
    if x0 is not None:
        cand = np.clip(np.log(np.asarray(x0, dtype=float)), lo + 1e-6, hi - 1e-6)
        if np.all(_LogSumExpSet(cons_list).values(cand) < 0):
            y = cand
    steps = 0
    if y is None:
        start = _initial_log_point(problem, tol, lo, hi)
        if x0 is not None:
            start = np.clip(np.log(np.asarray(x0, dtype=float)), lo + 1e-6, hi - 1e-6)
        y, steps, ok = _phase_one(cons_list, lo, hi, start, tol)
        if not ok:
            x = np.exp(y)
            return GPSolution(point=x, objective_value=problem.objective.evaluate(x),
                              status="infeasible", kkt_residual=math.inf,
                              newton_steps=steps, names=names)

    cons = _LogSumExpSet(cons_list)
    c = problem.objective.exponents.astype(float)
    barrier = _Barrier(cons, c, lo, hi)
    t = 1.0
    status = "max_iter"
    residual = math.inf
    for _ in range(tol.max_stages):
        y, k, converged = barrier.center(y, t, tol)
        steps += k
        if not converged:
            status = "max_iter"
            break
        gap = barrier.m_total / t
        if gap < tol.gap:
            residual = gap + _stationarity(barrier, y, t)
            if residual <= tol.gap:
                status = "optimal"
                break
        t *= tol.barrier_growth

    x = np.exp(y)
    if status == "optimal":
        if problem.max_violation(x) > tol.feasibility:
            status = "max_iter"
        near_box = (np.abs(y - hi) < 1e-3) | (np.abs(y - lo) < 1e-3)
        if np.any(near_box & (np.abs(c) > 0)):
            status = "unbounded"
    return GPSolution(point=x, objective_value=problem.objective.evaluate(x), status=status,
                      kkt_residual=residual, newton_steps=steps, names=names)


def _stationarity(barrier: _Barrier, y, t) -> float:
    """Centering error of the final iterate, ``lambda^2 / t`` with the Newton
    decrement ``lambda``; adds to the duality-gap bound ``m / t`` to give a
    bound on the log-objective suboptimality."""
    grad, H, _, _ = barrier.newton_system(y, t)
    lam2 = max(float(-grad @ _solve_psd(H, -grad)), 0.0)
    return lam2 / t
