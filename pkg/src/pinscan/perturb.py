"""The pin-perturbation functional derivative of the detection probability.

Blocking a thin strip at ``(x, z)`` changes the count rate by an amount set
by ``dP2b/dchi(x, z) = phi_b(x) psi(x) + c.c.``, where ``psi`` is the wave
arriving from the entrance slit and ``phi_b`` is the exit-slit-weighted wave
propagated backwards from the detector.  Both are Gaussians in ``x`` so their
product is one complex Gaussian with curvature ``alpha_chi`` and complex
centre ``x_c``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import quadform as qf
from .errors import BranchError, DegenerateDistance
from .propagate import (
    ExperimentSetup,
    _single_entrance,
    detection_probability,
    psi2b_explicit,
)

#: default guard keeping ``z`` away from the slits, as a fraction of ``L``
Z_EPS = 1e-6


@dataclass(frozen=True)
class PinSpec:
    """Absorptive Gaussian pin ``chi(x) = 1 - exp(-(x - x_p)**2 / (2 sigma_chi**2))``."""

    x_p: float
    sigma_chi: float
    z: float

    def __post_init__(self):
        if not self.sigma_chi > 0:
            raise ValueError("pin sigma_chi must be positive")

    @classmethod
    def from_width(cls, x_p: float, width: float, z: float) -> "PinSpec":
        """Pin whose equivalent hard-edge width ``sqrt(2 pi) sigma_chi`` is ``width``."""
        return cls(x_p, width / math.sqrt(2 * math.pi), z)

    @property
    def width(self) -> float:
        return math.sqrt(2 * math.pi) * self.sigma_chi

    def profile(self) -> qf.ComplexQuadratic:
        """Log of the blocked fraction ``exp(-(x - x_p)**2 / (2 sigma_chi**2))``."""
        return qf.ComplexQuadratic(-1.0 / (2 * self.sigma_chi**2), self.x_p, 0.0)


@dataclass(frozen=True)
class PerturbativeKernel:
    """``dP2b/dchi`` at fixed ``z`` for a single entrance slit."""

    p2b: float
    alpha_chi: complex
    x_c: complex
    z: float
    setup: ExperimentSetup = dc_field(repr=False, compare=False)

    @property
    def amplitude(self) -> complex:
        """``P2b * sqrt(-alpha_chi) / sqrt(pi)``; principal root."""
        return self.p2b * cmath.sqrt(-self.alpha_chi) / math.sqrt(math.pi)

    def term(self, x):
        """Complex half of the field; the field is this plus its conjugate."""
        x = np.asarray(x, dtype=float)
        u = x - self.x_c
        return self.amplitude * np.exp(self.alpha_chi * u * u)

    def form(self) -> qf.ComplexQuadratic:
        return qf.ComplexQuadratic(self.alpha_chi, self.x_c, cmath.log(self.amplitude))

    def __call__(self, x):
        return field(self, x)


def _check_z(setup: ExperimentSetup, z: float, eps: float) -> None:
    L = setup.length
    if not (eps * L <= z <= (1 - eps) * L):
        raise DegenerateDistance(f"z = {z!r} must lie in [{eps}L, (1-{eps})L]")


def alpha_chi_scaled(mu: float, rho: float, xi: float, sigma1: float) -> complex:
    num = 1j * mu * (mu * mu + rho * mu * mu + 1)
    den = (-1j * mu + xi) * (mu * (1j * xi - mu) * rho + 2 * (xi - 1) * (1j * mu + 1))
    return -num / den / (2 * sigma1**2)


def x_c_scaled(mu: float, rho: float, xi: float, s1: float, s2: float) -> complex:
    c_s1 = rho * mu * mu - (1j * mu + 1) * (xi - 1)
    c_s2 = (mu - 1j) * (mu + 1j * xi)
    return (c_s1 * s1 + c_s2 * s2) / (mu * mu + rho * mu * mu + 1)


def kernel_at(setup: ExperimentSetup, z: float, eps: float = Z_EPS) -> PerturbativeKernel:
    """Closed-form kernel from the scaled parameters ``mu``, ``rho``, ``xi``."""
    slit = _single_entrance(setup)
    _check_z(setup, z, eps)
    p = setup.scaled(z)
    return PerturbativeKernel(
        p2b=detection_probability(setup),
        alpha_chi=alpha_chi_scaled(p.mu, p.rho, p.xi, slit.sigma),
        x_c=x_c_scaled(p.mu, p.rho, p.xi, slit.center, setup.exit.center),
        z=z,
        setup=setup,
    )


def kernel_unsimplified(setup: ExperimentSetup, z: float, eps: float = Z_EPS):
    """``(alpha_chi, x_c, C)`` before simplification, in terms of ``A`` and ``beta_2``.

    ``ln(phi_b psi) = alpha_chi (x - x_c)**2 + C`` with
    ``A = 1/(alpha_f2 + i beta_2 + conj(alpha_2b))``.  Evaluated with the
    origin on the exit slit, which keeps the large ``s2**2`` terms of ``C``
    from cancelling.
    """
    _single_entrance(setup)
    _check_z(setup, z, eps)
    origin = setup.exit.center
    setup = setup.translated(-origin)
    slit = setup.entrance[0]
    s1, s2 = slit.center, setup.exit.center
    sig1sq = slit.sigma**2
    d = setup.d(z)
    d2 = setup.d(setup.length - z)
    beta2 = 1 / (4 * d2)
    delta = sig1sq + 1j * d
    alpha_f2 = -1 / (4 * setup.exit.sigma**2)
    q2b = psi2b_explicit(setup)
    a2b_bar = q2b.alpha.conjugate()
    s2b_bar = q2b.center.conjugate()
    c2b_bar = q2b.offset.conjugate()
    A = 1 / (alpha_f2 + 1j * beta2 + a2b_bar)
    K = alpha_f2 * s2 + a2b_bar * s2b_bar

    alpha = 1j * beta2 - A * (1j * beta2) ** 2 - 1 / (4 * delta)
    lin = A * 1j * beta2 * K - s1 / (4 * delta)
    x_c = lin / alpha
    C = (
        -(lin**2) / alpha
        - A * K * K
        - s1 * s1 / (4 * delta)
        + alpha_f2 * s2 * s2
        + 0.5 * cmath.log(beta2 / (1j * math.pi))
        + 0.5 * cmath.log(-math.pi * A)
        + a2b_bar * s2b_bar**2
        + c2b_bar
        + 0.25 * math.log(1 / (2 * math.pi * sig1sq))
        + 0.5 * cmath.log(sig1sq / delta)
    )
    return alpha, x_c + origin, C


def kernel_terms(setup: ExperimentSetup, z: float, eps: float = Z_EPS) -> tuple:
    """``ln(phi_b,i psi_j)`` for every pair of entrance slits, by quadratic-form algebra.

    ``psi_j`` is slit ``j`` propagated to ``z``; ``phi_b,i`` is
    ``conj(psi_2b,i) * f2`` propagated back over ``L - z``.  Amplitude
    weights ``1/sqrt(n)`` of the coherent entrance sum are folded into the
    offsets, so the field is ``sum exp(term) + c.c.``.  The algebra runs with
    the origin on the exit slit and the centres are moved back afterwards.
    """
    _check_z(setup, z, eps)
    origin = setup.exit.center
    setup = setup.translated(-origin)
    d = setup.d(z)
    d1 = setup.d1
    d2 = setup.d(setup.length - z)
    mask = setup.exit.mask()
    sources = [s.source() for s in setup.entrance]
    psis = [qf.propagate_through(src, d) for src in sources]
    phis = []
    for src in sources:
        psi2b_i = qf.multiply(qf.propagate_through(src, d1), mask)
        phis.append(qf.propagate_through(qf.multiply(psi2b_i.conj(), mask), d2))
    log_w = -math.log(len(sources))
    terms = (qf.multiply(phi, psi).shifted(log_w) for phi in phis for psi in psis)
    return tuple(qf.ComplexQuadratic(t.alpha, t.center + origin, t.offset) for t in terms)


def field(kernel: PerturbativeKernel, x):
    """``dP2b/dchi(x, z)`` in m**-1.  Real; positive where blocking lowers the count."""
    return 2.0 * np.real(kernel.term(x))


def half_integral(kernel: PerturbativeKernel) -> float:
    """``0.5 * integral field dx`` from the closed-form Gaussian integral."""
    return qf.gauss_integrate(kernel.form()).real


def integral_identity_check(setup: ExperimentSetup, z_list, method: str = "closed") -> float:
    """Largest ``|0.5*integral field dx - P2b| / P2b`` over ``z_list``.

    ``method="closed"`` integrates the Gaussian terms analytically;
    ``method="numeric"`` integrates the sampled field with adaptive quadrature.
    Double-slit setups go through the four-term composite kernel.
    """
    from .interference import composite_kernel
    from .oracle import integrate_field

    if method not in ("closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    worst = 0.0
    for z in z_list:
        if setup.is_single:
            k = kernel_at(setup, z)
            p2b = k.p2b
            forms = (k.form(),)
        else:
            k = composite_kernel(setup, z)
            p2b = k.p2b
            forms = k.terms
        if method == "closed":
            half = sum(qf.gauss_integrate(f) for f in forms).real
        else:
            half = 0.5 * integrate_field(forms)
        worst = max(worst, abs(half - p2b) / p2b)
    return worst


def pin_blocking(kernel: PerturbativeKernel, pin: PinSpec) -> float:
    """Relative count change ``dP2b/P2b`` caused by a Gaussian pin at ``pin.x_p``.

    Negative when the pin sits where the field is positive.  As the pin
    narrows this tends to ``-field(x_p) * width / P2b``.
    """
    if not math.isclose(pin.z, kernel.z, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("pin and kernel are at different z")
    a = kernel.alpha_chi
    xc = kernel.x_c
    inv = 1.0 / (2 * pin.sigma_chi**2)
    den = a - inv
    if den.real >= 0:
        raise BranchError("Re(alpha_chi - 1/(2 sigma_chi**2)) must be negative")
    x = pin.x_p
    expo = -((2 * inv * x - 2 * a * xc) ** 2) / (4 * den) + a * xc * xc - inv * x * x
    term = -cmath.sqrt(a / den) * cmath.exp(expo)
    return 2.0 * term.real


def pin_blocking_from_forms(forms, p2b: float, pin: PinSpec) -> float:
    """``-(1/P2b) * integral field * pin_profile dx`` term by term."""
    prof = pin.profile()
    total = sum(qf.gauss_integrate(qf.multiply(f, prof)) for f in forms)
    return -2.0 * total.real / p2b


def pin_window_stats(kernel: PerturbativeKernel, x_p: float, width: float, n: int = 2001):
    """Mean and spread of the field over a hard-edge window ``x_p +- width/2``.

    Returns ``(mean, std, mean - min)``.
    """
    xs = np.linspace(x_p - width / 2, x_p + width / 2, n)
    v = field(kernel, xs)
    mean = float(v.mean())
    return mean, float(v.std()), float(mean - v.min())
