"""Exception and warning types raised across the package."""


class PinscanError(Exception):
    """Base class for all package errors."""


class NonIntegrable(PinscanError):
    """A Gaussian integral was requested for a form with Re(a) >= 0."""


class DegenerateDistance(PinscanError):
    """A propagation distance is zero or negative where a proper leg is required."""


class DegenerateCurvature(PinscanError):
    """A quadratic form with zero curvature cannot be written as alpha*(x - s)**2 + c."""


class DegeneratePhase(PinscanError):
    """The perturbative field has no oscillating phase (Im alpha_chi == 0)."""


class BranchError(PinscanError):
    """A square-root branch guard failed."""


class NoRootInUnitInterval(PinscanError):
    """The envelope-maximum cubic has no sign change inside (0, 1)."""


class ToleranceNotMet(PinscanError):
    """Adaptive quadrature hit its panel cap before reaching the tolerance.

    The best estimate and its error bound are attached.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class NonConvergent(PinscanError):
    """Richardson extrapolation of a finite-difference sequence did not settle."""


class SetupError(PinscanError, ValueError):
    """Invalid experiment geometry or run configuration."""


class ApproximationDomain(UserWarning):
    """A small-slit approximation was evaluated outside its validity range."""


class AccuracyWarning(UserWarning):
    """Numerical result whose accuracy is below the requested level."""
