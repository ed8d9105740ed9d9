"""Exception types shared across the package."""


class BatteryError(Exception):
    """Base class for all package errors."""


class ConfigError(BatteryError, ValueError):
    """Invalid parameters or configuration."""


class DomainError(BatteryError, ValueError):
    """Argument outside the domain of a function."""


class ValidationError(BatteryError, ValueError):
    """Input object violates a structural invariant (non-unitary gate, bad trace, ...)."""


class CapacityError(BatteryError, MemoryError):
    """Requested Hilbert-space dimension exceeds what can be represented."""


class ConvergenceError(BatteryError, RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepSizeError(ConvergenceError):
    """Time step too large for the Krylov propagator to meet its tolerance."""


class ConsistencyError(BatteryError, RuntimeError):
    """An internal invariant (for example variational monotonicity) was violated."""
