"""Exception types shared across the package."""


class HelmLayerError(Exception):
    """Base class for all package errors."""


class OverflowRangeError(HelmLayerError):
    """Argument outside the validity radius of a special-function routine.

    Raised instead of returning inf/nan so that quadrature drivers can
    detect the condition and shrink their steps.
    """


class DomainError(HelmLayerError):
    """Argument outside the mathematical domain of an operation."""


class BoundaryTieError(DomainError):
    """A y-coordinate coincides exactly with an interface depth."""


class InadmissibleComponentError(DomainError):
    """A (layer, direction) pair that would radiate in from infinity."""


class BranchPointError(DomainError):
    """Spectral point coincides with a branch point +-k_l."""


class SingularSystemError(HelmLayerError):
    """Interface system is singular (spectral point at or near a pole)."""


class PoleOrderError(HelmLayerError):
    """A root of det A appears to have order > 1 (ill-posed medium)."""


class FarFieldError(DomainError):
    """A far-field separation condition is violated."""


class ToleranceNotReachedError(HelmLayerError):
    """Adaptive quadrature exhausted its panel budget."""

    def __init__(self, message, value=None, err=None):
        super().__init__(message)
        self.value = value
        self.err = err


class CoincidentPointsError(DomainError):
    """Source and target coincide."""


class ValidationError(HelmLayerError):
    """Configuration or input validation failure."""
