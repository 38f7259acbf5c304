"""Reduced-order visco-elasto-plastic foot-mud resistive force model."""

from .dynamics import ForceTrace, MudState, simulate, step
from .params import IntruderGeometry, MudParameters, Regime, StressComponents, load_parameters, load_preset
from .trajectory import ProtocolSpec, TrialRecord, Trajectory, generate_protocol, load_trial

__version__ = "0.1.0"

__all__ = [
    "ForceTrace",
    "IntruderGeometry",
    "MudParameters",
    "MudState",
    "ProtocolSpec",
    "Regime",
    "StressComponents",
    "TrialRecord",
    "Trajectory",
    "generate_protocol",
    "load_parameters",
    "load_preset",
    "load_trial",
    "simulate",
    "step",
]
