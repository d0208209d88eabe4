"""Exception types shared across the package."""


class PMRError(Exception):
    """Base class for all errors raised by pmrsim."""


class DimensionError(PMRError, ValueError):
    """Operands act on different numbers of sites."""


class ValidationError(PMRError, ValueError):
    """Input violates a documented precondition (e.g. non-Hermitian)."""


class CapacityError(PMRError, RuntimeError):
    """A desk-scale limit (dense size, path budget) would be exceeded."""

    def __init__(self, message: str, requested: int | None = None, limit: int | None = None):
        super().__init__(message)
        self.requested = requested
        self.limit = limit


class DDRangeError(PMRError, OverflowError):
    """Divided-difference arguments are too large to evaluate safely."""


class ConvergenceError(PMRError, RuntimeError):
    """An iterative reference computation failed to converge."""
