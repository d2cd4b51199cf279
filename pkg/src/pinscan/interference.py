"""Two coherent entrance slits: the four-term field and the pattern ``P2b(s2)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import quadform as qf
from .errors import SetupError
from .perturb import Z_EPS, kernel_terms
from .propagate import ExperimentSetup, coherent_detection_probability


@dataclass(frozen=True)
class CompositeKernel:
    """Field as ``sum_k exp(terms[k]) + c.c.``.

    For two slits the terms are ``phi_b+ psi+``, ``phi_b+ psi-``,
    ``phi_b- psi+``, ``phi_b- psi-`` with the ``1/2`` weight folded in.
    """

    terms: tuple
    z: float
    setup: ExperimentSetup = dc_field(repr=False, compare=False)

    def term_values(self, x):
        return qf.evaluate_sum(self.terms, x)

    def field(self, x):
        return 2.0 * np.real(self.term_values(x))

    __call__ = field

    @property
    def p2b(self) -> float:
        """``0.5 * integral field dx`` by closed-form integration of each term."""
        return sum(qf.gauss_integrate(t) for t in self.terms).real


def composite_kernel(setup: ExperimentSetup, z: float, eps: float = Z_EPS) -> CompositeKernel:
    """Term-sum kernel for any number of entrance slits."""
    return CompositeKernel(kernel_terms(setup, z, eps), z, setup)


def double_slit_kernel(setup: ExperimentSetup, z: float, eps: float = Z_EPS) -> CompositeKernel:
    if len(setup.entrance) != 2:
        raise SetupError("double_slit_kernel needs two entrance slits")
    a, b = setup.entrance
    if not math.isclose(a.sigma, b.sigma, rel_tol=1e-12):
        raise SetupError("entrance slits must have equal widths")
    return composite_kernel(setup, z, eps)


def lobe_centroids(kernel: CompositeKernel) -> list:
    """Stationary-phase centre of each slit's own lobe ``phi_b,i psi_i``."""
    n = len(kernel.setup.entrance)
    out = []
    for i in range(n):
        t = kernel.terms[i * n + i]
        a, c = t.alpha, t.center
        out.append(c.real + (a.real / a.imag) * c.imag)
    return out


def pattern(setup: ExperimentSetup, s2_grid, z: float | None = None) -> list:
    """``(s2, P2b)`` rows from the kernel built at ``z`` (default ``L/2``)."""
    if z is None:
        z = 0.5 * setup.length
    rows = []
    for s2 in np.asarray(s2_grid, dtype=float).tolist():
        k = composite_kernel(setup.with_exit_center(s2), z)
        rows.append((s2, k.p2b))
    return rows


def pattern_direct(setup: ExperimentSetup, s2_grid) -> list:
    """Same curve from ``integral |psi_2b|**2`` without the perturbative field."""
    return [
        (s2, coherent_detection_probability(setup.with_exit_center(s2)))
        for s2 in np.asarray(s2_grid, dtype=float).tolist()
    ]


def single_slit_open(setup: ExperimentSetup, index: int = 0) -> ExperimentSetup:
    """The setup with only one entrance slit left open."""
    return setup.with_entrance((setup.entrance[index],))
