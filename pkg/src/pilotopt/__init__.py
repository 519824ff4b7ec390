"""Pilot and data power design for multi-cell massive MIMO uplink."""

from .network import NetworkConfig, NetworkRealization, generate_layout
from .pilots import PilotAllocation, PilotAssignment
from .optimize import OptConfig, OptResult, solve_exhaustive, solve_sca

__all__ = [
    "NetworkConfig",
    "NetworkRealization",
    "OptConfig",
    "OptResult",
    "PilotAllocation",
    "PilotAssignment",
    "generate_layout",
    "solve_exhaustive",
    "solve_sca",
]

__version__ = "0.1.0"
