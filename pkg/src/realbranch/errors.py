"""Exception hierarchy."""


class RealBranchError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(RealBranchError, ValueError):
    """Operands live on incompatible spaces."""


class InvalidStateError(RealBranchError, ValueError):
    """An input violates a state, projector or operator invariant."""


class ScheduleError(RealBranchError, ValueError):
    """Bad Hamiltonian schedule or a time outside it."""


class NumericalError(RealBranchError, ArithmeticError):
    """A computation produced a result that fails its own postconditions."""

    def __init__(self, operation: str, message: str):
        super().__init__(f"{operation}: {message}")
        self.operation = operation


class ConfigError(RealBranchError, ValueError):
    """Run configuration failed validation."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
