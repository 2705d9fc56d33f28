"""Exception types shared by the simulator modules."""

from __future__ import annotations


class LssimError(Exception):
    """Base class for every error raised by lssim."""


class ConfigError(LssimError, ValueError):
    """Invalid configuration: unknown names, infeasible parameters, bad shapes."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ValidationError(LssimError, ValueError):
    """A program or grid violates a structural rule."""


class TraceSyntaxError(ValidationError):
    """Malformed line in a trace document."""

    def __init__(self, message: str, line: int, col: int = 1):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


class ContractError(LssimError, ValueError):
    """A caller broke a function precondition (e.g. operand not on the plane)."""


class SimulationError(LssimError, RuntimeError):
    """The simulation could not finish (deadlock watchdog, capacity overflow)."""

    def __init__(self, message: str, blocked: list[int] | None = None):
        self.blocked = blocked or []
        super().__init__(message)
