"""Polarforming with movable antennas: channel model, SCA solver, benchmarks and sweeps."""

from .channel import (
    AntennaState,
    ChannelInstance,
    ChannelSpec,
    LinkBudget,
    MovingRegion,
    PathGeometry,
    RxState,
    TxState,
    achievable_rate,
    effective_channel,
    sample_instance,
)
from .sca import ScaConfig, SolveReport, solve

__all__ = [
    "AntennaState",
    "ChannelInstance",
    "ChannelSpec",
    "LinkBudget",
    "MovingRegion",
    "PathGeometry",
    "RxState",
    "ScaConfig",
    "SolveReport",
    "TxState",
    "achievable_rate",
    "effective_channel",
    "sample_instance",
    "solve",
]
