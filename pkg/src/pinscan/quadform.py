"""Complex Gaussian quadratic forms.

Every wave function, slit mask and free-space propagator in this package is
the exponential of a quadratic polynomial with complex coefficients.  Such
forms are closed under multiplication and under convolution with the free
Green's function, and their integrals over the real line are known in closed
form.  This module is the algebra for that family.

Two representations are used:

* :class:`ComplexQuadratic` -- ``alpha*(x - center)**2 + offset``
* :class:`PolyCoeffs` -- ``a*x**2 + b*x + c``

The expanded form is the one that survives zero net curvature (for instance a
propagator multiplied by its own conjugate), so products that cancel the
quadratic term come back as :class:`PolyCoeffs`.

All lengths are SI metres.  Propagation distances enter only through the
distance parameter ``d = wavelength * dz / (4*pi)`` (m**2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import DegenerateCurvature, DegenerateDistance, NonIntegrable

# Re(a) must be below this (m^-2) for a form to count as integrable.
INTEGRABLE_THRESHOLD = -1e-30


def _complex(value) -> complex:
    return complex(value)


@dataclass(frozen=True)
class PolyCoeffs:
    """Expanded log-Gaussian ``a*x**2 + b*x + c``."""

    a: complex
    b: complex = 0j
    c: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "a", _complex(self.a))
        object.__setattr__(self, "b", _complex(self.b))
        object.__setattr__(self, "c", _complex(self.c))

    def __call__(self, x):
        """Log-value at ``x`` (scalar or array)."""
        return (self.a * x + self.b) * x + self.c

    def exp(self, x):
        return np.exp(self(x))

    def __add__(self, other: "Form") -> "PolyCoeffs":
        other = as_poly(other)
        return PolyCoeffs(self.a + other.a, self.b + other.b, self.c + other.c)

    def conj(self) -> "PolyCoeffs":
        return PolyCoeffs(self.a.conjugate(), self.b.conjugate(), self.c.conjugate())

    def shifted(self, log_weight: complex) -> "PolyCoeffs":
        """Multiply the Gaussian by ``exp(log_weight)``."""
        return PolyCoeffs(self.a, self.b, self.c + log_weight)

    @property
    def integrable(self) -> bool:
        return self.a.real < INTEGRABLE_THRESHOLD

    def expand(self) -> "PolyCoeffs":
        return self

    def complete_square(self) -> "ComplexQuadratic":
        if self.a == 0:
            raise DegenerateCurvature("zero curvature has no centre")
        center = -self.b / (2 * self.a)
        return ComplexQuadratic(self.a, center, self.c - self.b * self.b / (4 * self.a))


@dataclass(frozen=True)
class ComplexQuadratic:
    """Log-Gaussian ``alpha*(x - center)**2 + offset`` with complex fields.

    ``alpha`` is in m**-2, ``center`` in m, ``offset`` is dimensionless.
    """

    alpha: complex
    center: complex = 0j
    offset: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "alpha", _complex(self.alpha))
        object.__setattr__(self, "center", _complex(self.center))
        object.__setattr__(self, "offset", _complex(self.offset))

    def __call__(self, x):
        u = x - self.center
        return self.alpha * u * u + self.offset

    def exp(self, x):
        return np.exp(self(x))

    def expand(self) -> PolyCoeffs:
        a = self.alpha
        s = self.center
        return PolyCoeffs(a, -2 * a * s, a * s * s + self.offset)

    def conj(self) -> "ComplexQuadratic":
        return ComplexQuadratic(
            self.alpha.conjugate(), self.center.conjugate(), self.offset.conjugate()
        )

    def shifted(self, log_weight: complex) -> "ComplexQuadratic":
        return ComplexQuadratic(self.alpha, self.center, self.offset + log_weight)

    @property
    def integrable(self) -> bool:
        return self.alpha.real < INTEGRABLE_THRESHOLD

    def complete_square(self) -> "ComplexQuadratic":
        return self


Form = Union[PolyCoeffs, ComplexQuadratic]


def as_poly(f: Form) -> PolyCoeffs:
    return f.expand()


def expand(q: ComplexQuadratic) -> PolyCoeffs:
    return q.expand()


def complete_square(p: PolyCoeffs) -> ComplexQuadratic:
    return p.complete_square()


def log_gauss_integrate(f: Form) -> complex:
    """Log of the integral of ``exp(f)`` over the real line."""
    if isinstance(f, ComplexQuadratic):
        # centred form: no cancellation between -b**2/4a and c
        if not f.alpha.real < INTEGRABLE_THRESHOLD:
            raise NonIntegrable(f"Re(alpha) = {f.alpha.real!r} is not negative")
        return 0.5 * cmath.log(math.pi / -f.alpha) + f.offset
    p = as_poly(f)
    if not p.a.real < INTEGRABLE_THRESHOLD:
        raise NonIntegrable(f"Re(a) = {p.a.real!r} is not negative")
    # principal branch: 0.5*Log(z) is the principal square root's log
    return 0.5 * cmath.log(math.pi / -p.a) - p.b * p.b / (4 * p.a) + p.c


def gauss_integrate(f: Form) -> complex:
    """``sqrt(pi/-a) * exp(-b**2/(4a) + c)`` for ``Re(a) < 0``."""
    return cmath.exp(log_gauss_integrate(f))


def multiply(f: Form, g: Form) -> Form:
    """Product of two Gaussians.

    Returns a :class:`ComplexQuadratic` unless the curvatures cancel, in which
    case the expanded :class:`PolyCoeffs` is returned.
    """
    if isinstance(f, ComplexQuadratic) and isinstance(g, ComplexQuadratic):
        a = f.alpha + g.alpha
        if a != 0 and abs(a) > 1e-14 * (abs(f.alpha) + abs(g.alpha)):
            # weighted-centre rule keeps the centre exact when both are equal
            s = (f.alpha * f.center + g.alpha * g.center) / a
            c = (
                f.offset
                + g.offset
                + f.alpha * (s - f.center) ** 2
                + g.alpha * (s - g.center) ** 2
            )
            return ComplexQuadratic(a, s, c)
    p = as_poly(f) + as_poly(g)
    scale = abs(as_poly(f).a) + abs(as_poly(g).a)
    if p.a == 0 or abs(p.a) <= 1e-14 * scale:
        return PolyCoeffs(0j, p.b, p.c)
    return p.complete_square()


def green_factor(d: float, x0: complex = 0.0) -> ComplexQuadratic:
    """Log of the free Green's function ``G(x, x0)`` over distance parameter ``d``.

    ``G = sqrt(beta/(i*pi)) * exp(i*beta*(x - x0)**2)`` with ``beta = 1/(4d)``.
    """
    if not d > 0:
        raise DegenerateDistance(f"distance parameter must be positive, got {d!r}")
    beta = 1.0 / (4.0 * d)
    return ComplexQuadratic(1j * beta, x0, 0.5 * cmath.log(beta / (1j * math.pi)))


def propagate_through(f: Form, d: float) -> ComplexQuadratic:
    """Convolve ``exp(f)`` with the free Green's function over distance ``d``.

    The centre is preserved, ``1/alpha' = 1/alpha - 4i*d`` and the offset
    gains ``0.5*log(alpha'/alpha)``.
    """
    if d == 0:
        return f if isinstance(f, ComplexQuadratic) else f.complete_square()
    if d < 0:
        raise DegenerateDistance(f"distance parameter must be non-negative, got {d!r}")
    if as_poly(f).a.real >= INTEGRABLE_THRESHOLD:
        raise NonIntegrable("source form does not decay; convolution diverges")
    q = f.complete_square()
    alpha = 1.0 / (1.0 / q.alpha - 4j * d)
    return ComplexQuadratic(alpha, q.center, q.offset + 0.5 * cmath.log(alpha / q.alpha))


def norm_squared(f: Form) -> float:
    """``integral |exp(f)|**2 dx``."""
    return gauss_integrate(multiply(f, f.conj())).real


def evaluate_sum(terms: Iterable[Form], x):
    """Sum of ``exp(term(x))`` over a collection of forms."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    for t in terms:
        total = total + np.exp(t(x))
    return total
