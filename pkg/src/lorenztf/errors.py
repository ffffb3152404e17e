"""Exception types shared across the toolkit."""


class LorenzError(ValueError):
    """Base class for all toolkit errors."""


class DiscontinuityError(LorenzError):
    """A point sits on the discontinuity and no side was supplied."""


class DomainError(LorenzError):
    """Argument outside [0, 1] or outside a branch image."""


class AdmissibilityError(LorenzError):
    """An itinerary does not correspond to a nonempty cylinder."""


class ConvergenceError(LorenzError):
    """An iterative solver ran out of budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DepthCapError(LorenzError):
    """Requested depth exceeds the configured enumeration cap."""


class PreconditionError(LorenzError):
    """Inputs violate a documented precondition."""
