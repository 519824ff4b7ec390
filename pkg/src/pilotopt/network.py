"""Multi-cell layouts, pathloss and shadow fading.

The coverage area is a square of side ``area_side`` km split into a grid of
equally sized cells with one BS at each cell center.  Distances are measured
on the torus (wrap-around) so that every cell sees the same interference
environment.  All gains are kept in linear scale; dB only appears at the
config boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

__all__ = [
    "LayoutError",
    "NetworkConfig",
    "NetworkRealization",
    "dbm_to_mw",
    "generate_layout",
    "grid_shape",
    "pathloss_db",
    "wraparound_distance",
    "wraparound_offset",
]

MAX_SHADOW_ATTEMPTS = 1000
MAX_PLACEMENT_DRAWS = 10**6

_STREAM_POSITION = 0
_STREAM_SHADOW = 1


class LayoutError(RuntimeError):
    """Raised when a user cannot be placed or given a dominant home BS."""


def dbm_to_mw(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """System dimensions and propagation constants.

    Powers are linear mW per symbol.  ``max_pilot_power`` and
    ``max_data_power`` are per-user caps; scalars apply to every user, arrays
    of shape ``(L, K)`` give non-uniform caps.
    """

    num_cells: int = 4
    users_per_cell: int = 2
    bs_antennas: int = 300
    pilot_len: int = 2
    coherence_len: int = 200
    noise_power: float = dbm_to_mw(-96.0)
    max_pilot_power: float = 200.0
    max_data_power: float = 200.0
    area_side: float = 1.0
    min_bs_distance: float = 0.035
    shadow_std: float = 7.0
    pathloss_intercept: float = -148.1
    pathloss_exponent_coeff: float = 37.6

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise ValueError("invalid NetworkConfig: " + "; ".join(errors))

    def validation_errors(self) -> list[str]:
        errors = []
        for name in ("num_cells", "users_per_cell", "bs_antennas"):
            if int(getattr(self, name)) < 1:
                errors.append(f"{name} must be >= 1")
        if not 1 <= self.pilot_len < self.coherence_len:
            errors.append("need 1 <= pilot_len < coherence_len")
        if self.noise_power <= 0:
            errors.append("noise_power must be positive")
        if np.any(np.asarray(self.max_pilot_power) <= 0):
            errors.append("max_pilot_power must be positive")
        if np.any(np.asarray(self.max_data_power) <= 0):
            errors.append("max_data_power must be positive")
        if self.area_side <= 0:
            errors.append("area_side must be positive")
        if not 0 <= self.min_bs_distance < self.area_side / 2:
            errors.append("need 0 <= min_bs_distance < area_side / 2")
        if self.shadow_std < 0:
            errors.append("shadow_std must be non-negative")
        return errors

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_cells, self.users_per_cell

    def pilot_caps(self) -> np.ndarray:
        """Per-user cap on the *mean* pilot power, shape ``(L, K)``."""
        return np.broadcast_to(np.asarray(self.max_pilot_power, float), self.shape).copy()

    def data_caps(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.max_data_power, float), self.shape).copy()

    def prelog(self) -> float:
        return 1.0 - self.pilot_len / self.coherence_len

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("max_pilot_power", "max_data_power"):
            value = out[key]
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
        return out


@dataclass(frozen=True)
class NetworkRealization:
    """One drop of users plus the large-scale fading it induces.

    ``beta[l, i, t]`` is the linear gain from user ``t`` of cell ``i`` to BS
    ``l``; ``distances`` and ``shadow`` (dB) use the same indexing.  Geometry
    fields are ``None`` for hand-built realizations.
    """

    config: NetworkConfig
    beta: np.ndarray
    bs_positions: np.ndarray | None = None
    user_positions: np.ndarray | None = None
    distances: np.ndarray | None = None
    shadow: np.ndarray | None = None
    seed: int | None = None
    angles: np.ndarray | None = field(default=None)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        L, K = self.config.shape
        if beta.shape != (L, L, K):
            raise ValueError(f"beta must have shape {(L, L, K)}, got {beta.shape}")
        if not np.all(beta > 0):
            raise ValueError("beta must be strictly positive")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_beta(cls, beta, **config_fields) -> "NetworkRealization":
        """Wrap a hand-made gain tensor; ``L`` and ``K`` are read off its shape."""
        beta = np.asarray(beta, dtype=float)
        L, _, K = beta.shape
        config_fields.setdefault("pilot_len", K)
        config_fields.setdefault("area_side", 1.0)
        config = NetworkConfig(num_cells=L, users_per_cell=K, **config_fields)
        return cls(config=config, beta=beta)

    def with_config(self, **changes) -> "NetworkRealization":
        """Same drop, different system parameters (e.g. antenna count)."""
        return replace(self, config=replace(self.config, **changes))

    def home_gains(self) -> np.ndarray:
        """``beta[l, l, k]`` as an ``(L, K)`` array."""
        L = self.config.num_cells
        return self.beta[np.arange(L), np.arange(L), :]

    def bs_user_angles(self) -> np.ndarray:
        """Angle of the (wrapped) BS-to-user vector w.r.t. the horizontal axis.

        Falls back to zeros for realizations without geometry.
        """
        if self.angles is not None:
            return np.asarray(self.angles, dtype=float)
        if self.bs_positions is None or self.user_positions is None:
            return np.zeros_like(self.beta)
        L, K = self.config.shape
        out = np.empty((L, L, K))
        for l in range(L):
            for i in range(L):
                for t in range(K):
                    dx, dy = wraparound_offset(self.bs_positions[l], self.user_positions[i, t],
                                               self.config.area_side)
                    out[l, i, t] = math.atan2(dy, dx)
        return out

    def to_json(self) -> str:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()

        return json.dumps({
            "config": self.config.to_dict(),
            "beta": arr(self.beta),
            "bs_positions": arr(self.bs_positions),
            "user_positions": arr(self.user_positions),
            "distances": arr(self.distances),
            "shadow": arr(self.shadow),
            "seed": self.seed,
            "angles": arr(self.angles),
        })

    @classmethod
    def from_json(cls, text: str) -> "NetworkRealization":
        data = json.loads(text)
        config = NetworkConfig(**data["config"])

        def arr(key):
            value = data.get(key)
            return None if value is None else np.asarray(value, dtype=float)

        return cls(config=config, beta=arr("beta"), bs_positions=arr("bs_positions"),
                   user_positions=arr("user_positions"), distances=arr("distances"),
                   shadow=arr("shadow"), seed=data.get("seed"), angles=arr("angles"))


def pathloss_db(distance: float | np.ndarray, intercept: float = -148.1,
                slope: float = 37.6) -> float | np.ndarray:
    """3GPP LTE macro pathloss in dB for a distance in km (no shadowing)."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = intercept - slope * np.log10(d)
    return float(out) if out.ndim == 0 else out


def wraparound_offset(p_a, p_b, area_side: float) -> tuple[float, float]:
    """Shortest displacement from ``p_a`` to ``p_b`` on the torus."""
    d = np.asarray(p_b, dtype=float) - np.asarray(p_a, dtype=float)
    d = d - area_side * np.round(d / area_side)
    return float(d[0]), float(d[1])


def wraparound_distance(p_a, p_b, area_side: float) -> float:
    """Minimum Euclidean distance over the nine toroidal images of ``p_b``."""
    a = np.asarray(p_a, dtype=float)
    b = np.asarray(p_b, dtype=float)
    shifts = area_side * np.array([-1.0, 0.0, 1.0])
    best = math.inf
    for sx in shifts:
        for sy in shifts:
            best = min(best, math.hypot(b[0] + sx - a[0], b[1] + sy - a[1]))
    return best


def grid_shape(num_cells: int) -> tuple[int, int]:
    """(rows, cols) of the cell grid; square when ``num_cells`` is a square."""
    rows = int(math.isqrt(num_cells))
    while num_cells % rows:
        rows -= 1
    return rows, num_cells // rows


def _bs_positions(config: NetworkConfig) -> tuple[np.ndarray, float, float]:
    rows, cols = grid_shape(config.num_cells)
    w = config.area_side / cols
    h = config.area_side / rows
    pos = np.array([[(c + 0.5) * w, (r + 0.5) * h] for r in range(rows) for c in range(cols)])
    return pos, w, h


def _user_rng(seed: int, l: int, k: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(l, k, stream)))


def generate_layout(config: NetworkConfig, seed: int) -> NetworkRealization:
    """Drop users and draw shadow fading.

    Each user gets its own position and shadowing streams derived from
    ``(seed, l, k)``, so the result does not depend on generation order.
    Shadowing of a user is redrawn until its home BS has the largest gain.
    """
    L, K = config.shape
    bs_pos, w, h = _bs_positions(config)
    users = np.empty((L, K, 2))
    dist = np.empty((L, L, K))
    shadow = np.empty((L, L, K))
    beta = np.empty((L, L, K))

    for l in range(L):
        for k in range(K):
            rng = _user_rng(seed, l, k, _STREAM_POSITION)
            for _ in range(MAX_PLACEMENT_DRAWS):
                offset = rng.uniform([-w / 2, -h / 2], [w / 2, h / 2])
                if math.hypot(*offset) >= config.min_bs_distance:
                    break
            else:
                raise LayoutError(f"could not place user ({l}, {k}) outside the exclusion zone")
            users[l, k] = np.mod(bs_pos[l] + offset, config.area_side)
            d = np.array([wraparound_distance(bs_pos[i], users[l, k], config.area_side)
                          for i in range(L)])
            # a user sitting exactly on a foreign BS is impossible in practice
            d = np.maximum(d, 1e-9)
            pl = pathloss_db(d, config.pathloss_intercept, config.pathloss_exponent_coeff)

            rng = _user_rng(seed, l, k, _STREAM_SHADOW)
            for _ in range(MAX_SHADOW_ATTEMPTS):
                z = rng.normal(0.0, config.shadow_std, size=L)
                gains_db = pl + z
                if np.argmax(gains_db) == l:
                    break
            else:
                raise LayoutError(
                    f"user ({l}, {k}) never had its home BS dominant after "
                    f"{MAX_SHADOW_ATTEMPTS} shadowing draws")
            dist[:, l, k] = d
            shadow[:, l, k] = z
            beta[:, l, k] = 10.0 ** (gains_db / 10.0)

    return NetworkRealization(config=config, beta=beta, bs_positions=bs_pos,
                              user_positions=users, distances=dist, shadow=shadow, seed=seed)
