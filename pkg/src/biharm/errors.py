"""Exception hierarchy for biharm."""


class BiharmError(Exception):
    """Base class for all biharm errors."""


class InvalidParams(BiharmError):
    """Input violates a precondition (dimension, exponent range, grid, ...)."""


class SubcriticalInput(BiharmError):
    """Exponent lies below the critical threshold; the real spectrum does not exist."""


class NoPcValue(BiharmError):
    """No finite critical exponent exists for this dimension (n <= 12)."""


class LadderMismatch(BiharmError):
    """Computed ladder structure disagrees with the closed-form prediction."""


class BracketNotFound(BiharmError):
    """Shooting probe found no (blow-up, sign-loss) bracket."""


class NoConvergence(BiharmError):
    """Bisection exhausted without an acceptable trajectory."""


class StepFailure(BiharmError):
    """Adaptive integrator could not meet its tolerance."""


class GridTooCoarse(BiharmError):
    """Grid has too few interior points for the requested stencil."""


class IllConditioned(BiharmError):
    """Design matrix condition number exceeds the safe threshold."""


class WindowTooShort(BiharmError):
    """Fit window contains too few points to resolve the basis."""


class DomainError(BiharmError):
    """Argument outside the mathematical domain of the function."""
