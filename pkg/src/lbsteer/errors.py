"""Exception hierarchy shared across the simulator, protocol and server."""

from __future__ import annotations


class LbsteerError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LbsteerError):
    """Invalid geometry, flags or simulation configuration."""


class DivergenceError(LbsteerError):
    """The solver produced a non-finite or non-physical state.

    The simulation keeps the last committed (good) state; the failing
    candidate step is discarded.
    """

    def __init__(self, reason: str, cell: tuple | None = None, iteration: int = 0):
        self.reason = reason
        self.cell = cell
        self.iteration = iteration
        loc = f" at cell {cell}" if cell is not None else ""
        super().__init__(f"divergence{loc} (iteration {iteration}): {reason}")


class CommandError(LbsteerError):
    """A steering command was rejected. Carries a wire error code."""

    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


class ProtocolError(LbsteerError):
    """Malformed bytes on the wire. `offset` is the absolute stream offset."""

    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ScenarioError(LbsteerError):
    """Scenario file rejected; `line` is the 1-based source line."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")
