"""Exception types shared across the package."""


class TorusflowError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(TorusflowError):
    """Operands live on different grids or have incompatible ranks."""


class PreconditionError(TorusflowError):
    """An operation's stated precondition was violated."""


class ValidationError(TorusflowError):
    """Configuration or input data failed validation."""


class StabilityError(TorusflowError):
    """An explicit time step violated its stability guard."""


class SteepeningError(TorusflowError):
    """A transported label field exceeded its gradient bound."""


class LoopResolutionError(TorusflowError):
    """A material loop's point spacing became too uneven."""
