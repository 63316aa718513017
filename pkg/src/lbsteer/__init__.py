"""Interactive lattice-Boltzmann flow simulator with live computational steering."""

from .core import FluidParams, Simulation, StepDiagnostics
from .engine import (CmdConfigure, CmdControl, CmdMoveRegion, CmdReset,
                     CmdSetCells, CmdSetParam, CmdSubscribe, CmdUnsubscribe,
                     Phase, RecordingSink, SteeringEngine)
from .errors import (CommandError, ConfigError, DivergenceError, LbsteerError,
                     ProtocolError, ScenarioError)
from .lattice import D2Q9, D3Q19, LatticeModel, equilibrium, viscosity

__version__ = "0.1.0"

__all__ = [
    "CmdConfigure", "CmdControl", "CmdMoveRegion", "CmdReset", "CmdSetCells",
    "CmdSetParam", "CmdSubscribe", "CmdUnsubscribe", "CommandError",
    "ConfigError", "D2Q9", "D3Q19", "DivergenceError", "FluidParams",
    "LatticeModel", "LbsteerError", "Phase", "ProtocolError", "RecordingSink",
    "ScenarioError", "Simulation", "StepDiagnostics", "SteeringEngine",
    "equilibrium", "viscosity", "__version__",
]
