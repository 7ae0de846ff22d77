"""Exception types shared across the package."""


class BilliardError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BilliardError, ValueError):
    """A configuration or geometric validity check failed."""


class UnknownObstacleError(ValidationError):
    """Obstacle index outside 1..m."""


class AlphaRangeError(ValidationError):
    """Deformation parameter outside the table's configured interval."""


class JetOrderError(ValidationError):
    """Requested derivative order beyond the supported smoothness."""


class DegenerateObstacleError(ValidationError):
    """An obstacle encloses no area."""


class InadmissibleWordError(ValidationError):
    """Symbol sequence repeats a symbol at adjacent positions."""


class InadmissibleClosureError(ValidationError):
    """Periodic closure of a prefix repeats its first symbol at the seam.

    Callers truncating a one-sided sequence recover by extending the
    truncation length by one.
    """


class DegenerateConfigurationError(BilliardError):
    """Consecutive reflection points coincide."""


class DominanceError(BilliardError):
    """A matrix expected to be strictly diagonally dominant is not."""


class OrbitConvergenceError(BilliardError):
    """The orbit solver failed to reach the gradient tolerance."""

    def __init__(self, message, last_u=None, grad_inf=None):
        super().__init__(message)
        self.last_u = last_u
        self.grad_inf = grad_inf


class NumericalError(BilliardError):
    """An internal numerical consistency check failed."""
