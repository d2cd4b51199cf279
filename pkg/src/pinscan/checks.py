"""Oracle-versus-closed-form agreement suites, shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from . import oracle
from . import quadform as qf
from .analytics import spindle_at
from .interference import composite_kernel, pattern, pattern_direct
from .perturb import field as kernel_field, kernel_at, kernel_terms, kernel_unsimplified
from .propagate import (
    ExperimentSetup,
    detection_probability,
    detection_probability_from_psi2b,
    entrance_norm,
    psi_at,
    rms_width,
)

RANGES = {
    "sigma1": (5e-6, 200e-6),
    "sigma2": (1e-6, 20e-6),
    "length": (0.5, 5.0),
    "wavelength": (0.2e-6, 2e-6),
    "s1": (-1e-3, 1e-3),
    "s2": (-5e-3, 5e-3),
}

#: exit slits further than this many beam widths from the entrance axis are
#: not drawn; beyond it P2b is too small for a relative comparison to mean much
S2_REACH = 6.0


def random_setup(rng: np.random.Generator) -> ExperimentSetup:
    """A single-slit geometry drawn from the sweep ranges."""
    u = lambda key: float(rng.uniform(*RANGES[key]))  # noqa: E731
    sigma1, sigma2, length, wl, s1 = u("sigma1"), u("sigma2"), u("length"), u("wavelength"), u("s1")
    probe = ExperimentSetup.single(wl, length, s1, sigma1, 0.0, sigma2)
    w = rms_width(probe, length)
    lo = max(RANGES["s2"][0], s1 - S2_REACH * w)
    hi = min(RANGES["s2"][1], s1 + S2_REACH * w)
    return probe.with_exit_center(float(rng.uniform(lo, hi)))


def random_points(setup: ExperimentSetup, rng: np.random.Generator, n: int):
    """``(z, x)`` pairs inside the spindle: ``z`` in the middle 80 %, ``x`` within 1.5 envelope widths."""
    pts = []
    for _ in range(n):
        z = float(rng.uniform(0.1, 0.9)) * setup.length
        sp = spindle_at(kernel_at(setup, z))
        pts.append((z, sp.x_max + float(rng.uniform(-1.5, 1.5)) * sp.sigma_w))
    return pts


@dataclass
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.detail,
        }


def p2b_agreement(setup, spec=oracle.QuadratureSpec()) -> float:
    return abs(oracle.p2b_quad(setup, spec) / detection_probability(setup) - 1)


def psi_agreement(setup, z, x, spec=oracle.QuadratureSpec()) -> float:
    x = np.asarray(x, float)
    ref = qf.evaluate_sum(psi_at(setup, z), x)
    got = oracle.psi_quad(setup, z, x, spec)
    return float(np.max(np.abs(got - ref) / np.abs(ref)))


def fd_agreement(setup, z, x, spec=oracle.QuadratureSpec()) -> float:
    """FD-vs-closed-form error relative to the local field envelope ``2|phi_b psi|``."""
    k = kernel_at(setup, z)
    envelope = 2 * abs(k.term(x))
    fd = oracle.fd_functional_derivative(setup, z, x, spec=spec, scale=envelope)
    return abs(fd - float(kernel_field(k, x))) / envelope


def sweep(n_setups: int, n_points: int, seed: int, spec=oracle.QuadratureSpec(), threads: int = 1):
    """Worst P2b and FD deviations over random setups; independent of ``threads``."""
    children = np.random.SeedSequence(seed).spawn(n_setups)

    def one(i):
        rng = np.random.default_rng(children[i])
        s = random_setup(rng)
        p = p2b_agreement(s, spec)
        f = max((fd_agreement(s, z, x, spec) for z, x in random_points(s, rng, n_points)), default=0.0)
        return p, f

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            res = list(pool.map(one, range(n_setups)))
    else:
        res = [one(i) for i in range(n_setups)]
    return max(r[0] for r in res), max(r[1] for r in res)


def semigroup_agreement(setup, z_total, spec=oracle.QuadratureSpec()) -> float:
    """Two half-legs of quadrature against one leg of ``z_total``, near the beam axis."""
    src = oracle.source_plane(setup, spec)
    c = setup.entrance[0].center
    w = rms_width(setup, z_total)
    x = c + np.linspace(-w, w, 5)
    one = oracle.quad_propagate(src, [oracle.Leg(setup.d(z_total), 0, 0)], x, spec)
    half = 0.5 * z_total
    wm = spec.half_width * rms_width(setup, half)
    legs = [oracle.Leg(setup.d(half), c - wm, c + wm), oracle.Leg(setup.d(half), 0, 0)]
    two = oracle.quad_propagate(src, legs, x, spec)
    return float(np.max(np.abs(two - one) / np.abs(one)))


def verify_suite(setup: ExperimentSetup, tolerance: float = 1e-8, n_random: int = 50, seed: int = 0,
                 threads: int = 1) -> List[CheckResult]:
    """Every closed-form-vs-oracle comparison for one reference setup plus a random sweep.

    ``tolerance`` applies to the quadrature comparisons; algebraic identities
    are held to ``1e-10`` or ``tolerance``, whichever is tighter, and the
    finite-difference field to ``1e-3``.
    """
    spec = oracle.QuadratureSpec()
    alg = min(1e-10, tolerance)
    out = []
    run: List[tuple] = []
    z_list = list(np.linspace(0.05, 0.95, 20) * setup.length)

    run.append(("entrance normalisation", lambda: abs(entrance_norm(setup) - 1), min(1e-12, tolerance)))
    if setup.is_single:
        run.append(("P2b closed form vs psi_2b route",
                    lambda: abs(detection_probability_from_psi2b(setup) / detection_probability(setup) - 1), alg))
        run.append(("P2b closed form vs quadrature", lambda: p2b_agreement(setup, spec), tolerance))
        w = rms_width(setup, setup.length)
        c = setup.entrance[0].center
        run.append(("psi_2a closed form vs quadrature",
                    lambda: psi_agreement(setup, setup.length, c + np.linspace(-2 * w, 2 * w, 9), spec), tolerance))
        # the first tenth of the flight keeps the nested rule small
        run.append(("semigroup of two legs",
                    lambda: semigroup_agreement(setup, 0.1 * setup.length, spec), tolerance))

        def routes():
            worst = 0.0
            for z in z_list:
                k = kernel_at(setup, z)
                a, xc, C = kernel_unsimplified(setup, z)
                t = kernel_terms(setup, z)[0]
                p_c = (np.exp(C) * np.sqrt(math.pi / -a)).real
                worst = max(worst, abs(a / k.alpha_chi - 1), abs(xc - k.x_c) / abs(k.x_c) if k.x_c else abs(xc),
                            abs(t.alpha / k.alpha_chi - 1), abs(p_c / k.p2b - 1))
            return worst

        run.append(("alpha_chi, x_c, C: three routes", routes, alg))
        z_mid = setup.length * 0.5
        k = kernel_at(setup, z_mid)
        sp = spindle_at(k)
        run.append(("field vs finite difference",
                    lambda: max(fd_agreement(setup, z_mid, sp.x_c0 + u * sp.x_pi, spec) for u in (-0.5, 0.0, 0.5)),
                    1e-3))
    from .perturb import integral_identity_check

    run.append(("half-integral of field (closed form)",
                lambda: integral_identity_check(setup, z_list), alg))
    run.append(("half-integral of field (numeric)",
                lambda: integral_identity_check(setup, z_list, "numeric"), tolerance))
    if not setup.is_single:
        grid = np.linspace(-1e-3, 1e-3, 9)

        def pat():
            a = np.array([p for _, p in pattern(setup, grid)])
            b = np.array([p for _, p in pattern_direct(setup, grid)])
            return float(np.max(np.abs(a / b - 1)))

        run.append(("pattern from field vs direct", pat, alg))
        run.append(("P2b coherent sum vs quadrature",
                    lambda: abs(oracle.p2b_quad(setup, spec) / composite_kernel(setup, 0.5 * setup.length).p2b - 1),
                    tolerance))
    if n_random:
        def rnd_p():
            return _sweep_cache(n_random, seed, spec, threads)[0]

        def rnd_f():
            return _sweep_cache(n_random, seed, spec, threads)[1]

        run.append((f"P2b over {n_random} random setups", rnd_p, tolerance))
        run.append((f"field over {n_random} random setups", rnd_f, 1e-3))

    for name, fn, tol in run:
        out.append(CheckResult(name, float(fn()), float(tol)))
    return out


_SWEEPS: dict = {}


def _sweep_cache(n, seed, spec, threads):
    key = (n, seed, spec)
    if key not in _SWEEPS:
        _SWEEPS[key] = sweep(n, 10, seed, spec, threads)
    return _SWEEPS[key]
