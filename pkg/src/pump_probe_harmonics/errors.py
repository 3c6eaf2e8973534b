"""Exception hierarchy shared by the solver, the oracles and the CLI."""

from typing import Any, Optional, Sequence


class PumpProbeError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(PumpProbeError, ValueError):
    """An index, coupling entry or unknown id does not fit the system shape."""


class SpecValidationError(PumpProbeError, ValueError):
    """A SystemSpec field violates a physical invariant."""


class SingularSystemError(PumpProbeError, ArithmeticError):
    """The reduced system M' is singular or too ill-conditioned to trust."""

    def __init__(self, message: str, condition: float, threshold: float):
        super().__init__(message)
        self.condition = condition
        self.threshold = threshold


class IntegrationError(PumpProbeError, RuntimeError):
    """The time-domain integration produced non-finite values."""


class NotSettledError(IntegrationError):
    """The trajectory did not reach its periodic steady state."""

    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = drift


class DipoleTableError(PumpProbeError, ValueError):
    """The dipole table is missing a transition or is inconsistent."""


class ConfigFileError(PumpProbeError, ValueError):
    """A system/config file could not be parsed or validated."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
        field: Optional[str] = None,
    ):
        location = path or "<config>"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        if field:
            location += f" [{field}]"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.column = column
        self.field = field


class SweepError(PumpProbeError, RuntimeError):
    """Too many detuning points failed during a sweep."""

    def __init__(self, message: str, result: Any, failed_points: Sequence[int]):
        super().__init__(message)
        self.result = result
        self.failed_points = list(failed_points)
