"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match the grid."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class FluxError(ValueError):
    """Curvature flux is not an integer multiple of 2*pi within tolerance."""


class InfeasibleError(ValueError):
    """No vortex exists for the requested data (area <= 4*pi*d)."""


class ResolutionError(ValueError):
    """Requested configuration is not resolved by the grid."""


class ConvergenceError(RuntimeError):
    """Iteration did not reach tolerance; ``history`` holds the residuals."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class DivergenceError(RuntimeError):
    """Time stepping produced non-finite values; ``last_state`` is the last good state."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConditioningError(RuntimeError):
    """Moduli-space metric is too close to singular."""
