"""Slit-to-slit propagation: wave functions and detection probability.

The geometry is a Gaussian entrance slit (or a coherent pair of them) at
``z = 0``, free flight over ``L``, and a Gaussian exit slit in front of the
detector.  ``z`` stands in for time throughout; the only physical constant is
the wavelength, entering via ``d = wavelength * z / (4*pi)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import quadform as qf
from .errors import DegenerateDistance, SetupError


@dataclass(frozen=True)
class SlitSpec:
    """Gaussian aperture with amplitude mask ``exp(-(x - center)**2 / (4 sigma**2))``."""

    center: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.sigma)):
            raise SetupError("slit center and sigma must be finite")
        if not self.sigma > 0:
            raise SetupError(f"slit sigma must be positive, got {self.sigma!r}")

    def mask(self) -> qf.ComplexQuadratic:
        return qf.ComplexQuadratic(-1.0 / (4 * self.sigma**2), self.center, 0.0)

    def source(self) -> qf.ComplexQuadratic:
        """Mask normalised so that the integral of ``|psi|**2`` is one."""
        log_norm = 0.25 * math.log(1.0 / (2 * math.pi * self.sigma**2))
        return self.mask().shifted(log_norm)


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless ``mu = sigma1**2/d1``, ``rho = sigma2**2/sigma1**2``, ``xi = z/L``."""

    mu: float
    rho: float
    xi: float

    def __post_init__(self):
        if not (self.mu > 0 and self.rho > 0):
            raise SetupError("mu and rho must be positive")
        if not 0 < self.xi < 1:
            raise SetupError(f"xi must lie in (0, 1), got {self.xi!r}")

    @property
    def denominator(self) -> float:
        """``mu**2 + rho*mu**2 + 1``, the common factor of every closed form."""
        return self.mu**2 + self.rho * self.mu**2 + 1.0


@dataclass(frozen=True)
class ExperimentSetup:
    """Wavelength, flight length, entrance slit(s) and exit slit (SI metres)."""

    wavelength: float
    length: float
    entrance: tuple
    exit: SlitSpec

    def __post_init__(self):
        entrance = tuple(self.entrance)
        object.__setattr__(self, "entrance", entrance)
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise SetupError(f"wavelength must be positive, got {self.wavelength!r}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise SetupError(f"length must be positive, got {self.length!r}")
        if len(entrance) not in (1, 2):
            raise SetupError("entrance must hold one or two slits")
        if not all(isinstance(s, SlitSpec) for s in entrance) or not isinstance(
            self.exit, SlitSpec
        ):
            raise SetupError("slits must be SlitSpec instances")
        if len(entrance) == 2:
            a, b = entrance
            if abs(a.center - b.center) < 6 * max(a.sigma, b.sigma):
                warnings.warn(
                    "entrance slits closer than 6 sigma; the pair is not unit-normalised",
                    stacklevel=2,
                )

    @classmethod
    def single(cls, wavelength, length, s1, sigma1, s2, sigma2) -> "ExperimentSetup":
        return cls(wavelength, length, (SlitSpec(s1, sigma1),), SlitSpec(s2, sigma2))

    @classmethod
    def double(cls, wavelength, length, s1, sigma1, s2, sigma2) -> "ExperimentSetup":
        """Two in-phase entrance slits at ``+s1`` and ``-s1``."""
        return cls(
            wavelength,
            length,
            (SlitSpec(s1, sigma1), SlitSpec(-s1, sigma1)),
            SlitSpec(s2, sigma2),
        )

    @property
    def is_single(self) -> bool:
        return len(self.entrance) == 1

    @property
    def d1(self) -> float:
        return distance_param(self.wavelength, self.length)

    def d(self, z: float) -> float:
        return distance_param(self.wavelength, z)

    def with_exit_center(self, s2: float) -> "ExperimentSetup":
        return ExperimentSetup(
            self.wavelength, self.length, self.entrance, SlitSpec(s2, self.exit.sigma)
        )

    def with_entrance(self, entrance: Sequence[SlitSpec]) -> "ExperimentSetup":
        return ExperimentSetup(self.wavelength, self.length, tuple(entrance), self.exit)

    def translated(self, dx: float) -> "ExperimentSetup":
        """Same geometry with every slit centre moved by ``dx``."""
        return ExperimentSetup(
            self.wavelength,
            self.length,
            tuple(SlitSpec(s.center + dx, s.sigma) for s in self.entrance),
            SlitSpec(self.exit.center + dx, self.exit.sigma),
        )

    def scaled(self, z: float) -> ScaledParams:
        sigma1 = _single_entrance(self).sigma
        return ScaledParams(
            mu=sigma1**2 / self.d1,
            rho=self.exit.sigma**2 / sigma1**2,
            xi=z / self.length,
        )

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "length": self.length,
            "entrance": [{"center": s.center, "sigma": s.sigma} for s in self.entrance],
            "exit": {"center": self.exit.center, "sigma": self.exit.sigma},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSetup":
        try:
            return cls(
                float(data["wavelength"]),
                float(data["length"]),
                tuple(SlitSpec(float(s["center"]), float(s["sigma"])) for s in data["entrance"]),
                SlitSpec(float(data["exit"]["center"]), float(data["exit"]["sigma"])),
            )
        except (KeyError, TypeError) as exc:
            raise SetupError(f"malformed setup: {exc}") from exc


def distance_param(wavelength: float, dz: float) -> float:
    """``wavelength * dz / (4*pi)`` in m**2."""
    return wavelength * dz / (4 * math.pi)


def _single_entrance(setup: ExperimentSetup) -> SlitSpec:
    if not setup.is_single:
        raise SetupError("operation needs a single entrance slit; see pinscan.interference")
    return setup.entrance[0]


def _amplitude_log_weight(setup: ExperimentSetup) -> float:
    # coherent sum of n unit-normalised slits, each weighted 1/sqrt(n)
    return -0.5 * math.log(len(setup.entrance))


def source_terms(setup: ExperimentSetup) -> tuple:
    """``ln psi1`` as one form per entrance slit, weights folded into offsets."""
    w = _amplitude_log_weight(setup)
    return tuple(s.source().shifted(w) for s in setup.entrance)


def entrance_norm(setup: ExperimentSetup) -> float:
    """Exact ``integral |psi1|**2``, including the overlap of a slit pair."""
    terms = source_terms(setup)
    total = 0.0
    for f in terms:
        for g in terms:
            total += qf.gauss_integrate(qf.multiply(f, g.conj())).real
    return total


def psi_at(setup: ExperimentSetup, z: float) -> tuple:
    """``ln psi(x, z)`` after free flight from the entrance, one form per slit."""
    if not z > 0:
        raise DegenerateDistance(f"z must be positive, got {z!r}")
    d = setup.d(z)
    return tuple(qf.propagate_through(t, d) for t in source_terms(setup))


def psi2a(setup: ExperimentSetup) -> tuple:
    return psi_at(setup, setup.length)


def psi2b(setup: ExperimentSetup) -> tuple:
    """``ln psi_2b`` behind the exit slit, one form per entrance slit."""
    mask = setup.exit.mask()
    return tuple(qf.multiply(t, mask) for t in psi2a(setup))


def psi2b_explicit(setup: ExperimentSetup) -> qf.ComplexQuadratic:
    """Single-slit ``ln psi_2b`` written out in terms of ``Delta_1``."""
    slit = _single_entrance(setup)
    s1, s2 = slit.center, setup.exit.center
    sig1sq, sig2sq = slit.sigma**2, setup.exit.sigma**2
    delta1 = sig1sq + 1j * setup.d1
    alpha = -(delta1 + sig2sq) / (4 * delta1 * sig2sq)
    center = (s2 - s1) * delta1 / (delta1 + sig2sq) + s1
    offset = (
        -((s1 - s2) ** 2) / (4 * (delta1 + sig2sq))
        + 0.5 * np.log(sig1sq / delta1)
        + 0.25 * math.log(1 / (2 * math.pi * sig1sq))
    )
    return qf.ComplexQuadratic(alpha, center, offset)


def rms_width(setup: ExperimentSetup, z: float) -> float:
    """RMS width of ``|psi(x, z)|**2``: ``sqrt((d**2 + sigma1**4) / sigma1**2)``."""
    sigma1 = _single_entrance(setup).sigma
    d = setup.d(z)
    return math.sqrt((d * d + sigma1**4) / sigma1**2)


def detection_probability(setup: ExperimentSetup) -> float:
    """Probability of passing the exit slit for a unit-normalised entrance wave.

    Uses the scaled closed form in ``mu`` and ``rho``.
    """
    slit = _single_entrance(setup)
    mu = slit.sigma**2 / setup.d1
    rho = setup.exit.sigma**2 / slit.sigma**2
    den = mu * mu + rho * mu * mu + 1.0
    ds = slit.center - setup.exit.center
    return math.sqrt(rho * mu * mu / den) * math.exp(-mu * mu / den * ds * ds / (2 * slit.sigma**2))


def detection_probability_from_psi2b(setup: ExperimentSetup) -> float:
    """Same probability from ``Re alpha_2b``, ``Im s_2b`` and ``Re c_2b`` directly."""
    q = psi2b_explicit(setup)
    ar = q.alpha.real
    return math.sqrt(math.pi / (-2 * ar)) * math.exp(
        -2 * abs(q.alpha) ** 2 * q.center.imag**2 / ar + 2 * q.offset.real
    )


def detection_probability_small_slit(setup: ExperimentSetup) -> float:
    """Small-aperture limit ``(sigma1*sigma2/d1) * exp(-sigma1**2 (s1-s2)**2 / (2 d1**2))``."""
    slit = _single_entrance(setup)
    d1 = setup.d1
    ds = slit.center - setup.exit.center
    return slit.sigma * setup.exit.sigma / d1 * math.exp(-(slit.sigma**2) * ds * ds / (2 * d1 * d1))


def coherent_detection_probability(setup: ExperimentSetup) -> float:
    """Exact ``integral |psi_2b|**2`` for one or two entrance slits."""
    terms = psi2b(setup)
    total = 0.0
    for f in terms:
        for g in terms:
            total += qf.gauss_integrate(qf.multiply(f, g.conj())).real
    return total


def hard_edge_pattern(setup: ExperimentSetup, s2_grid) -> list:
    """``P_2b(s2) ~ |psi_2a(s2)|**2 * sqrt(2 pi) sigma2`` on a grid of exit positions.

    Valid while the equivalent hard-edge width ``sqrt(2 pi) sigma2`` is small
    compared with the RMS width of ``|psi_2a|**2``.
    """
    width = math.sqrt(2 * math.pi) * setup.exit.sigma
    if setup.is_single and width > 0.1 * rms_width(setup, setup.length):
        warnings.warn("exit slit is not narrow compared with the diffracted beam", stacklevel=2)
    s2 = np.asarray(s2_grid, dtype=float)
    psi = qf.evaluate_sum(psi2a(setup), s2)
    values = np.abs(psi) ** 2 * width
    return list(zip(s2.tolist(), values.tolist()))


def slit_array_total(setup: ExperimentSetup, half_width: float) -> float:
    """Sum of hard-edge probabilities over contiguous exit slits of width ``sqrt(2 pi) sigma2``.

    The slits tile ``[-half_width, half_width]`` around the beam axis; the sum
    tends to one as ``sigma2 -> 0``.
    """
    width = math.sqrt(2 * math.pi) * setup.exit.sigma
    centre = float(np.mean([s.center for s in setup.entrance]))
    n = int(math.ceil(half_width / width))
    grid = centre + width * np.arange(-n, n + 1)
    return float(sum(p for _, p in hard_edge_pattern(setup, grid)))
