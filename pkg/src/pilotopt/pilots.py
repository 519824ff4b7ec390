"""Pilot structures.

Two representations are used:

* :class:`PilotAllocation` -- the continuous design where every user spreads
  power over the ``tau_p`` canonical basis vectors.  Powers (not their square
  roots) are stored; ``powers[l, k, b]`` is the power user ``(l, k)`` puts on
  basis vector ``b``.
* :class:`PilotAssignment` -- orthogonal pilots inside each cell, reused across
  cells, with one scalar power per user (``tau_p == K``).

User ids are ``(cell, user)`` tuples and pilot indices are 0-based.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "EnumerationCapError",
    "PilotAllocation",
    "PilotAssignment",
    "UnsupportedStructureError",
    "assignment_count",
    "check_power_constraint",
    "enumerate_assignments",
    "from_assignment",
    "inner_products",
    "pilot_inner",
    "reuse_set",
]

SUPPORT_FLOOR = 1e-12


class UnsupportedStructureError(ValueError):
    pass


class EnumerationCapError(ValueError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"enumeration needs {required} assignments, cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass(frozen=True)
class PilotAllocation:
    powers: np.ndarray

    def __post_init__(self):
        p = np.array(self.powers, dtype=float)
        if p.ndim != 3:
            raise ValueError("powers must be indexed [cell][user][basis]")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("pilot powers must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "powers", p)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.powers.shape

    @property
    def pilot_len(self) -> int:
        return self.powers.shape[2]

    def energy(self) -> np.ndarray:
        """Total pilot energy ``||psi_{l,k}||^2`` per user."""
        return self.powers.sum(axis=2)

    def amplitudes(self) -> np.ndarray:
        """Pilot sequences ``psi_{l,k}`` (real, non-negative), shape ``(L, K, tau_p)``."""
        return np.sqrt(self.powers)

    def support(self, p_max: float | np.ndarray) -> np.ndarray:
        """Boolean mask of basis entries that carry non-negligible power."""
        cap = np.broadcast_to(np.asarray(p_max, float), self.powers.shape[:2])
        return self.powers >= SUPPORT_FLOOR * cap[:, :, None]

    def to_json(self) -> str:
        return json.dumps(self.powers.tolist())

    @classmethod
    def from_json(cls, text: str) -> "PilotAllocation":
        return cls(np.asarray(json.loads(text), dtype=float))


@dataclass(frozen=True)
class PilotAssignment:
    """Pilot index matrix ``indices[l, k]`` plus scalar pilot powers."""

    indices: np.ndarray
    scalar_powers: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=int)
        powers = np.array(self.scalar_powers, dtype=float)
        if idx.ndim != 2:
            raise ValueError("indices must be an L x K matrix")
        L, K = idx.shape
        powers = np.broadcast_to(powers, (L, K)).copy()
        for l in range(L):
            if sorted(idx[l]) != list(range(K)):
                raise ValueError(f"cell {l} does not use a permutation of 0..{K - 1}")
        if np.any(powers < 0):
            raise ValueError("scalar pilot powers must be non-negative")
        idx.setflags(write=False)
        powers.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scalar_powers", powers)

    @property
    def shape(self) -> tuple[int, int]:
        return self.indices.shape

    def with_powers(self, scalar_powers) -> "PilotAssignment":
        return PilotAssignment(self.indices, scalar_powers)

    def co_pilot_mask(self) -> np.ndarray:
        """``mask[l, k, i, t]`` is true iff ``(i, t)`` reuses the pilot of ``(l, k)``."""
        idx = self.indices
        return idx[:, :, None, None] == idx[None, None, :, :]

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.indices.tolist())
        return buf.getvalue()

    @staticmethod
    def indices_from_csv(text: str) -> np.ndarray:
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        return np.array([[int(v) for v in r] for r in rows], dtype=int)


def inner_products(alloc: PilotAllocation) -> np.ndarray:
    """All pilot inner products, ``G[l, k, i, t] = psi_{l,k}^H psi_{i,t}``."""
    L, K, tau = alloc.shape
    s = alloc.amplitudes().reshape(L * K, tau)
    return (s @ s.T).reshape(L, K, L, K)


def pilot_inner(alloc: PilotAllocation, a: tuple[int, int], b: tuple[int, int]) -> float:
    """Inner product of the pilots of users ``a`` and ``b``."""
    pa = alloc.powers[a]
    pb = alloc.powers[b]
    return float(np.sum(np.sqrt(pa * pb)))


def check_power_constraint(alloc: PilotAllocation, p_max: float | np.ndarray,
                           rtol: float = 1e-9) -> np.ndarray:
    """Per-user pass mask for the mean-pilot-power cap."""
    cap = np.broadcast_to(np.asarray(p_max, float), alloc.shape[:2])
    mean = alloc.powers.mean(axis=2)
    return mean <= cap * (1.0 + rtol)


def from_assignment(assignment: PilotAssignment, pilot_len: int | None = None) -> PilotAllocation:
    """Embed an orthogonal assignment in the continuous pilot structure."""
    L, K = assignment.shape
    tau = K if pilot_len is None else pilot_len
    if tau != K:
        raise UnsupportedStructureError(f"assignment structure needs tau_p == K ({K}), got {tau}")
    powers = np.zeros((L, K, tau))
    ll, kk = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    powers[ll, kk, assignment.indices] = assignment.scalar_powers
    return PilotAllocation(powers)


def reuse_set(assignment: PilotAssignment, l: int, k: int) -> set[tuple[int, int]]:
    target = assignment.indices[l, k]
    L, K = assignment.shape
    return {(i, t) for i in range(L) for t in range(K) if assignment.indices[i, t] == target}


def assignment_count(L: int, K: int) -> int:
    return math.factorial(K) ** (L - 1)


def enumerate_assignments(L: int, K: int, cap: int = 10**6) -> Iterator[np.ndarray]:
    """Yield every distinct collection of reuse sets once.

    Cell 0 is pinned to the identity permutation (relabelling pilots does not
    change the reuse sets); the remaining cells run over all ``K!``
    permutations in lexicographic order.
    """
    required = assignment_count(L, K)
    if required > cap:
        raise EnumerationCapError(required, cap)
    first = tuple(range(K))
    perms = list(itertools.permutations(range(K)))
    for rest in itertools.product(perms, repeat=L - 1):
        yield np.array((first,) + rest, dtype=int)
