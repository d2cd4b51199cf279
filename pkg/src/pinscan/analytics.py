"""Observables derived from the perturbative field.

Centroid of the slow-phase lobe, fringe spacing, envelope peak and width,
their small-aperture limits, the position of the widest envelope, and the
counting-statistics error budget for a pin measurement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ApproximationDomain, DegeneratePhase, NoRootInUnitInterval
from .perturb import PerturbativeKernel, PinSpec, pin_blocking, pin_window_stats
from .propagate import ScaledParams


@dataclass(frozen=True)
class SpindleAnalytics:
    """Geometry of the field at one ``z``.

    ``phase_sign`` is the sign of ``Im alpha_chi``; ``x_pi`` uses its magnitude.
    """

    x_c0: float
    x_pi: float
    x_max: float
    sigma_w: float
    z: float
    phase_sign: int = -1


def spindle_at(kernel: PerturbativeKernel) -> SpindleAnalytics:
    ar, ai = kernel.alpha_chi.real, kernel.alpha_chi.imag
    xr, xi = kernel.x_c.real, kernel.x_c.imag
    if abs(ai) < 1e-30:
        raise DegeneratePhase("Im alpha_chi vanishes; the field has no fringes")
    return SpindleAnalytics(
        x_c0=xr + (ar / ai) * xi,
        x_pi=math.sqrt(math.pi / abs(ai)),
        x_max=(ar * xr - ai * xi) / ar,
        sigma_w=math.sqrt(-1.0 / (2 * ar)),
        z=kernel.z,
        phase_sign=1 if ai > 0 else -1,
    )


def field_phase(kernel: PerturbativeKernel, x):
    """``Im(alpha_chi (x - x_c)**2)``, the x-dependent phase of the field's complex half."""
    u = np.asarray(x, dtype=float) - kernel.x_c
    return np.imag(kernel.alpha_chi * u * u)


def small_slit_limits(params: ScaledParams, sigma1: float, wavelength: float, length: float):
    """Leading-order ``(alpha_chi, x_pi, sigma_w)`` for apertures small against the beam.

    Warns with :class:`ApproximationDomain` when ``mu`` is not small, or when
    ``xi`` is close enough to a slit that the dropped terms compete.
    """
    mu, rho, xi = params.mu, params.rho, params.xi
    if mu > 0.1 or xi < 10 * mu or (1 - xi) < 10 * rho * mu:
        warnings.warn(
            f"small-slit limit used outside its range (mu={mu:.3g}, xi={xi:.3g})",
            ApproximationDomain,
            stacklevel=2,
        )
    s2 = sigma1**2
    q = xi * (xi - 1)
    alpha = -(mu * mu / (2 * s2)) * (rho * xi**2 + 2 * (xi - 1) ** 2) / (4 * q * q) - 1j * (
        mu / (4 * s2)
    ) / q
    x_pi = math.sqrt(wavelength * length * xi * (1 - xi))
    sigma_w = (wavelength * length / (2 * math.sqrt(2) * math.pi * sigma1)) * math.sqrt(
        q * q / ((rho / 2) * xi**2 + (xi - 1) ** 2)
    )
    return alpha, x_pi, sigma_w


class CubicRoot(NamedTuple):
    xi: float
    degenerate: bool


def envelope_cubic(rho: float, xi):
    """``(rho + 2) xi**3 - 6 xi**2 + 6 xi - 2``; its root maximises ``sigma_w``."""
    return ((rho + 2) * xi - 6) * xi * xi + 6 * xi - 2


def max_envelope_position(rho: float, eps: float = 1e-9, tol: float = 1e-12) -> CubicRoot:
    """Scaled position ``xi`` of the widest envelope, by bisection on ``(eps, 1 - eps)``.

    For ``rho == 0`` the cubic is ``2 (xi - 1)**3`` and the root sits on the
    exit slit; ``1 - eps`` is returned with ``degenerate`` set.
    """
    if rho < 0 or not math.isfinite(rho):
        raise ValueError(f"rho must be non-negative, got {rho!r}")
    lo, hi = eps, 1 - eps
    f_lo, f_hi = envelope_cubic(rho, lo), envelope_cubic(rho, hi)
    if rho == 0:
        return CubicRoot(hi, True)
    if not (f_lo < 0 < f_hi):
        raise NoRootInUnitInterval(f"no sign change for rho={rho!r}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if envelope_cubic(rho, mid) < 0:
            lo = mid
        else:
            hi = mid
    return CubicRoot(0.5 * (lo + hi), False)


@dataclass(frozen=True)
class CountingPlan:
    """Inputs to the two-term error budget of a pin measurement.

    ``expected_ratio`` is ``dP2b/P2b`` for the pin; ``field_variation`` and
    ``field_mean`` describe the field across the pin window.
    """

    n_counts: int
    pin_width: float
    expected_ratio: float
    field_variation: float
    field_mean: float

    def __post_init__(self):
        if not self.n_counts > 0:
            raise ValueError("n_counts must be positive")


def counting_error(plan: CountingPlan):
    """``(statistical, pin_width)`` relative errors on the measured field."""
    stat = (1.0 / math.sqrt(plan.n_counts)) / abs(plan.expected_ratio)
    sys = plan.field_variation / abs(plan.field_mean)
    return stat, sys


def plan_for_pin(kernel: PerturbativeKernel, pin: PinSpec, n_counts: int) -> CountingPlan:
    """Budget for a pin at ``pin.x_p``; the field spread is taken below the window mean."""
    mean, _, dip = pin_window_stats(kernel, pin.x_p, pin.width)
    return CountingPlan(
        n_counts=n_counts,
        pin_width=pin.width,
        expected_ratio=pin_blocking(kernel, pin),
        field_variation=dip,
        field_mean=mean,
    )


def envelope_width_profile(setup, z_values) -> np.ndarray:
    """Exact ``sigma_w`` at each ``z`` (single entrance slit)."""
    from .perturb import kernel_at

    return np.array([spindle_at(kernel_at(setup, z)).sigma_w for z in z_values])


__all__ = [
    "SpindleAnalytics",
    "spindle_at",
    "field_phase",
    "small_slit_limits",
    "CubicRoot",
    "envelope_cubic",
    "max_envelope_position",
    "CountingPlan",
    "counting_error",
    "plan_for_pin",
    "envelope_width_profile",
]
