"""Paraxial slit-to-slit propagation and the pin-perturbation field."""

from .errors import (
    AccuracyWarning,
    ApproximationDomain,
    BranchError,
    DegenerateCurvature,
    DegenerateDistance,
    DegeneratePhase,
    NoRootInUnitInterval,
    NonConvergent,
    NonIntegrable,
    PinscanError,
    SetupError,
    ToleranceNotMet,
)
from .propagate import ExperimentSetup, ScaledParams, SlitSpec, detection_probability
from .perturb import PerturbativeKernel, PinSpec, field, kernel_at, pin_blocking
from .analytics import SpindleAnalytics, spindle_at
from .interference import CompositeKernel, double_slit_kernel, pattern

__version__ = "0.1.0"


def reference_setup(s2: float = 3e-3) -> ExperimentSetup:
    """Reference geometry: 0.5 um light, 2 m flight, 50 um entrance, 4 um exit."""
    return ExperimentSetup.single(0.5e-6, 2.0, 0.0, 50e-6, s2, 4e-6)
