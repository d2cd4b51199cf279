"""Brute-force ground truth: nested quadrature, finite differences, Monte Carlo.

Nothing here uses the closed-form propagation algebra.  Entrance slits are
written out as plain Gaussians, the free Green's function is sampled
directly, and every integral is done with an adaptive 15-point
Gauss-Kronrod rule over a truncated domain.  Panels start small enough that
the kernel phase changes by less than ``pi/4`` across each, and are halved
until the Kronrod/Gauss difference meets the tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AccuracyWarning, NonConvergent, ToleranceNotMet
from .propagate import ExperimentSetup, coherent_detection_probability

# 15-point Kronrod nodes on [0, 1] (descending) and weights; the 7-point
# Gauss rule uses the odd-indexed nodes and the centre.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[13, 11, 9]] = _WG[:3]

_EPS = np.finfo(float).eps
_CHUNK_NODES = 1 << 15
_NOISE = 1e-12


@dataclass(frozen=True)
class QuadratureSpec:
    """Domain truncation, panel budget and tolerance for every oracle integral."""

    half_width: float = 12.0
    max_panels: int = 200_000
    rtol: float = 1e-10
    probes: int = 65
    strict: bool = False

    def __post_init__(self):
        if not (self.half_width > 0 and self.rtol > 0 and self.max_panels > 0):
            raise ValueError("invalid quadrature spec")


def _kronrod_chunks(f, lo, hi):
    """Kronrod and Gauss panel sums and absolute Kronrod sums, shape (..., n_panels)."""
    per = max(1, _CHUNK_NODES // 15)
    ks, gs, abss = [], [], []
    for i in range(0, lo.size, per):
        a, b = lo[i : i + per], hi[i : i + per]
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
        v = np.asarray(f(x))
        v = v.reshape(v.shape[:-1] + (a.size, 15))
        ks.append(np.sum(v * KRONROD_WEIGHTS, axis=-1) * half)
        gs.append(np.sum(v * GAUSS_WEIGHTS, axis=-1) * half)
        abss.append(np.sum(np.abs(v) * KRONROD_WEIGHTS, axis=-1) * half)
    return np.concatenate(ks, -1), np.concatenate(gs, -1), np.concatenate(abss, -1)


def _adapt(f, a, b, rtol, atol, n0, max_panels, scale="each"):
    """Core subdivision loop.

    Returns ``(value, error, accepted_lo, accepted_hi, converged)``.  With
    ``scale="max"`` a batched integrand is judged against its largest entry,
    otherwise each entry against itself.
    """
    n0 = int(min(max(n0, 1), max_panels))
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    acc_lo, acc_hi, acc_val, acc_err = [], [], [], []
    total_len = b - a
    n_panels = n0
    converged = True
    while lo.size:
        k, g, absk = _kronrod_chunks(f, lo, hi)
        err = np.abs(k - g)
        done = sum(acc_val) if acc_val else 0.0
        estimate = np.abs(done + k.sum(axis=-1))
        if scale == "max":
            estimate = np.full_like(estimate, np.max(estimate))
        target = np.maximum(rtol * estimate, atol)[..., None] * ((hi - lo) / total_len)
        # values of exp(i*phase) carry ~phase*eps noise; allow for phases of a few thousand rad
        floor = _NOISE * absk
        ok_each = (err <= target) | (err <= floor)
        ok = ok_each.reshape(-1, lo.size).all(axis=0)
        # global test: the summed error bound already meets the tolerance
        err_done = sum(acc_err) if acc_err else 0.0
        total_err = err_done + err.sum(axis=-1)
        if np.all(total_err <= np.maximum(rtol * estimate, atol)):
            ok[:] = True
        if n_panels + int((~ok).sum()) > max_panels:
            ok[:] = True
            converged = False
        acc_lo.append(lo[ok])
        acc_hi.append(hi[ok])
        acc_val.append(k[..., ok].sum(axis=-1))
        acc_err.append(err[..., ok].sum(axis=-1))
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        n_panels += mid.size
    return (
        sum(acc_val),
        sum(acc_err),
        np.concatenate(acc_lo),
        np.concatenate(acc_hi),
        converged,
    )


def _report(converged, value, error, strict, what):
    if converged:
        return
    msg = f"{what}: panel cap reached before the tolerance"
    if strict:
        raise ToleranceNotMet(msg, value, error)
    warnings.warn(msg, AccuracyWarning, stacklevel=3)


def adaptive_quad(
    f: Callable,
    a: float,
    b: float,
    rtol: float = 1e-10,
    atol: float = 0.0,
    initial_panels: int = 1,
    max_panels: int = 200_000,
    strict: bool = False,
):
    """Integrate a vectorised ``f`` over ``[a, b]``; returns ``(value, error_bound)``.

    ``f`` maps an array of abscissae to values whose last axis runs over the
    abscissae, so batched (e.g. several targets at once) integrands work.
    """
    value, err, _, _, ok = _adapt(f, a, b, rtol, atol, initial_panels, max_panels)
    _report(ok, value, err, strict, "adaptive_quad")
    return value, err


def adaptive_rule(f, a, b, rtol=1e-10, initial_panels=1, max_panels=200_000, strict=False, atol=0.0):
    """Nodes and weights of the panelisation that integrates the batch ``f`` to ``rtol``.

    The batch is judged against its largest entry, so the rule is fit for any
    linear functional of the same family of integrands.
    """
    value, err, lo, hi, ok = _adapt(f, a, b, rtol, atol, initial_panels, max_panels, "max")
    _report(ok, value, err, strict, "adaptive_rule")
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (lo + hi))[:, None] + half[:, None] * NODES[None, :]
    weights = half[:, None] * KRONROD_WEIGHTS[None, :]
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# propagation by direct quadrature


def green(x_out, x_in, d: float):
    """Free Green's function sampled on the outer product of ``x_out`` and ``x_in``."""
    beta = 1.0 / (4.0 * d)
    u = np.subtract.outer(np.asarray(x_out, float), np.asarray(x_in, float))
    return np.sqrt(beta / (1j * np.pi)) * np.exp(1j * beta * u * u)


@dataclass(frozen=True)
class Leg:
    """Free flight over distance parameter ``d`` onto the window ``[lo, hi]``.

    ``mask`` multiplies the field on arrival (a slit or a pin); the window is
    where the result will be used next, and is what the quadrature rule for
    this leg is validated on.
    """

    d: float
    lo: float
    hi: float
    mask: Optional[Callable] = None


@dataclass(frozen=True)
class Plane:
    """A field sampled on demand over its support ``[lo, hi]``.

    ``noise`` bounds the absolute error of each sample; it is zero for fields
    written out directly and set by :func:`propagate_plane` otherwise.
    """

    func: Callable
    lo: float
    hi: float
    phase_rate: float = 0.0
    noise: float = 0.0


def _initial_panels(beta, src_lo, src_hi, dst_lo, dst_hi, src_rate):
    reach = max(abs(dst_hi - src_lo), abs(src_hi - dst_lo))
    rate = 2 * beta * reach + src_rate
    return int(math.ceil(rate * (src_hi - src_lo) / (math.pi / 4))), 2 * beta * reach


def _matvec(x, nodes, weighted, d, chunk=4096):
    x = np.asarray(x, float)
    out = np.empty(x.shape, complex)
    flat = x.ravel()
    res = out.reshape(-1)
    for i in range(0, flat.size, chunk):
        res[i : i + chunk] = green(flat[i : i + chunk], nodes, d) @ weighted
    return out


def propagate_plane(plane: Plane, leg: Leg, spec: QuadratureSpec = QuadratureSpec()) -> Plane:
    """The field one leg downstream, backed by a fixed validated quadrature rule."""
    if not leg.d > 0:
        raise ValueError("each leg needs a positive distance")
    beta = 1.0 / (4.0 * leg.d)
    probes = np.linspace(leg.lo, leg.hi, spec.probes)
    n0, out_rate = _initial_panels(beta, plane.lo, plane.hi, leg.lo, leg.hi, plane.phase_rate)

    g_max = math.sqrt(beta / math.pi)
    # input noise integrated against |G| bounds what any rule can resolve
    carried = g_max * (plane.hi - plane.lo) * plane.noise

    def integrand(xp):
        return green(probes, xp, leg.d) * plane.func(xp)[None, :]

    nodes, weights = adaptive_rule(
        integrand, plane.lo, plane.hi, spec.rtol, n0, spec.max_panels, spec.strict, atol=carried
    )
    weighted = weights * plane.func(nodes)
    mask = leg.mask
    noise = carried + (spec.rtol + _NOISE) * g_max * float(np.sum(np.abs(weighted)))

    def func(x):
        v = _matvec(x, nodes, weighted, leg.d)
        return v * mask(np.asarray(x, float)) if mask is not None else v

    return Plane(func, leg.lo, leg.hi, out_rate, noise)


def quad_propagate(source: Plane, legs: Sequence[Leg], x_eval, spec: QuadratureSpec = QuadratureSpec()):
    """Field after the chain of ``legs`` at ``x_eval``.

    The last leg's window is replaced by the span of ``x_eval``.
    """
    x_eval = np.asarray(x_eval, float)
    legs = list(legs)
    last = legs[-1]
    lo, hi = float(x_eval.min()), float(x_eval.max())
    if hi == lo:
        lo, hi = lo - 1e-9, hi + 1e-9
    legs[-1] = Leg(last.d, lo, hi, last.mask)
    plane = source
    for leg in legs:
        plane = propagate_plane(plane, leg, spec)
    return plane.func(x_eval)


def gaussian_mask(center: float, sigma: float):
    """Amplitude slit ``exp(-(x - center)**2 / (4 sigma**2))``."""
    return lambda x: np.exp(-((x - center) ** 2) / (4 * sigma * sigma))


def source_plane(setup: ExperimentSetup, spec: QuadratureSpec = QuadratureSpec()) -> Plane:
    """Unit-normalised entrance field, written out directly."""
    slits = [(s.center, s.sigma) for s in setup.entrance]
    w = 1.0 / math.sqrt(len(slits))

    def func(x):
        x = np.asarray(x, float)
        total = np.zeros(x.shape, complex)
        for c, s in slits:
            total += w * (2 * math.pi * s * s) ** -0.25 * np.exp(-((x - c) ** 2) / (4 * s * s))
        return total

    lo = min(c - spec.half_width * s for c, s in slits)
    hi = max(c + spec.half_width * s for c, s in slits)
    return Plane(func, lo, hi)


def _exit_window(setup, spec):
    e = setup.exit
    return e.center - spec.half_width * e.sigma, e.center + spec.half_width * e.sigma


def psi_quad(setup: ExperimentSetup, z: float, x_eval, spec: QuadratureSpec = QuadratureSpec()):
    """``psi(x, z)`` by one leg of quadrature."""
    return quad_propagate(source_plane(setup, spec), [Leg(setup.d(z), 0, 0)], x_eval, spec)


def _psi2b_plane(setup, spec):
    lo, hi = _exit_window(setup, spec)
    mask = gaussian_mask(setup.exit.center, setup.exit.sigma)
    return propagate_plane(source_plane(setup, spec), Leg(setup.d1, lo, hi, mask), spec)


def _integrate_plane(f, plane, spec, n0=4, atol=0.0):
    value, err, _, _, ok = _adapt(f, plane.lo, plane.hi, spec.rtol, atol, n0, spec.max_panels)
    _report(ok, value, err, spec.strict, "exit-plane integral")
    return value


def p2b_quad(setup: ExperimentSetup, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``integral |psi_2b|**2 dx2`` by nested quadrature."""
    plane = _psi2b_plane(setup, spec)
    return float(_integrate_plane(lambda x: np.abs(plane.func(x)) ** 2, plane, spec))


def pin_profile(x_p: float, sigma_chi: float):
    """Blocked amplitude fraction ``exp(-(x - x_p)**2 / (2 sigma_chi**2))``."""
    return lambda x: np.exp(-((x - x_p) ** 2) / (2 * sigma_chi * sigma_chi))


def psi_window(setup, z, lo, hi, spec: QuadratureSpec = QuadratureSpec()) -> Plane:
    """``psi`` at ``z`` on ``[lo, hi]``, by one leg of quadrature."""
    return propagate_plane(source_plane(setup, spec), Leg(setup.d(z), lo, hi), spec)


def pin_loss_quad(setup, z, x_p, sigma_chi, spec: QuadratureSpec = QuadratureSpec(), psi2b=None,
                  at_z=None, parts=False):
    """``P2b - P2b(with pin)`` by quadrature.

    The pin removes ``delta_psi``, the part of the wave that passes through
    the blocked profile; linearity of propagation gives
    ``P - P_pin = 2 Re <psi_2b, delta_psi> - ||delta_psi||**2`` without
    subtracting two nearly equal probabilities.  With ``parts`` the two
    terms are returned separately.  ``at_z`` may carry ``psi`` on any window
    covering ``x_p +- half_width*sigma_chi``.
    """
    if psi2b is None:
        psi2b = _psi2b_plane(setup, spec)
    lo, hi = _exit_window(setup, spec)
    h = spec.half_width * sigma_chi
    if at_z is None:
        at_z = psi_window(setup, z, x_p - h, x_p + h, spec)
    elif at_z.lo > x_p - h or at_z.hi < x_p + h:
        raise ValueError("psi window does not cover the pin")
    profile = pin_profile(x_p, sigma_chi)
    blocked_here = Plane(lambda x: at_z.func(x) * profile(x), x_p - h, x_p + h, at_z.phase_rate, at_z.noise)
    mask = gaussian_mask(setup.exit.center, setup.exit.sigma)
    blocked = propagate_plane(blocked_here, Leg(setup.d(setup.length - z), lo, hi, mask), spec)

    def f(x):
        a = psi2b.func(x)
        b = blocked.func(x)
        return np.stack([np.conj(a) * b, np.abs(b) ** 2])

    # below the noise of the blocked wave neither overlap can be resolved
    a_max = float(np.max(np.abs(psi2b.func(np.linspace(lo, hi, spec.probes)))))
    b_max = float(np.max(np.abs(blocked.func(np.linspace(lo, hi, spec.probes)))))
    atol = (hi - lo) * blocked.noise * np.array([a_max, 2 * b_max + blocked.noise])
    cross, norm = _integrate_plane(f, blocked, spec, atol=atol)
    if parts:
        return float(2 * cross.real), float(norm.real)
    return float(2 * cross.real - norm.real)


def p2b_with_pin_quad(setup, pin, spec: QuadratureSpec = QuadratureSpec()) -> float:
    return p2b_quad(setup, spec) - pin_loss_quad(setup, pin.z, pin.x_p, pin.sigma_chi, spec)


def neville_at_zero(h: Sequence[float], values: Sequence[float]) -> float:
    """Value at ``h = 0`` of the polynomial through ``(h_i, values_i)``."""
    h = list(map(float, h))
    p = list(map(float, values))
    n = len(p)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (h[i + m] * p[i] - h[i] * p[i + 1]) / (h[i + m] - h[i])
    return p[0]


DEFAULT_WIDTHS = (2e-6, 1e-6, 0.5e-6, 0.25e-6)


@dataclass(frozen=True)
class FDResult:
    """``quotients`` are the full ``(P - P_pin)/w``; ``linear`` their cross-term parts."""

    value: float
    residual: float
    quotients: tuple
    widths: tuple
    linear: tuple = ()


def fd_functional_derivative(
    setup: ExperimentSetup,
    z: float,
    x: float,
    widths: Sequence[float] = DEFAULT_WIDTHS,
    spec: QuadratureSpec = QuadratureSpec(),
    scale: Optional[float] = None,
    max_residual: float = 1e-2,
    detail: bool = False,
):
    """Pin-removal difference quotient extrapolated to zero pin width.

    Each width ``w`` is the equivalent hard-edge width ``sqrt(2 pi) sigma_chi``.
    The quotient ``(P - P_pin)/w`` splits into the cross term
    ``2 Re <psi_2b, delta_psi>/w``, which is even in ``w``, and the pin's own
    loss ``||delta_psi||**2/w``, which vanishes linearly.  The cross term is
    extrapolated in ``w**2``; the self term contributes nothing at ``w = 0``.
    ``NonConvergent`` is raised when the full and one-fewer-point
    extrapolations differ by more than ``max_residual`` relative to ``scale``
    (default: the largest cross quotient).
    """
    widths = tuple(float(w) for w in widths)
    if len(widths) < 2 or any(b >= a for a, b in zip(widths, widths[1:])):
        raise ValueError("widths must be a decreasing sequence of at least two")
    if widths[-1] < 0.05e-6:
        raise ValueError("smallest width must be at least 0.05 um")
    psi2b = _psi2b_plane(setup, spec)
    h = spec.half_width * widths[0] / math.sqrt(2 * math.pi)
    at_z = psi_window(setup, z, x - h, x + h, spec)
    q, lin = [], []
    for w in widths:
        sigma_chi = w / math.sqrt(2 * math.pi)
        cross, norm = pin_loss_quad(setup, z, x, sigma_chi, spec, psi2b, at_z, parts=True)
        q.append((cross - norm) / w)
        lin.append(cross / w)
    h2 = [w * w for w in widths]
    full = neville_at_zero(h2, lin)
    fewer = neville_at_zero(h2[1:], lin[1:])
    ref = scale if scale is not None else max(abs(full), max(abs(v) for v in lin))
    residual = abs(full - fewer) / ref if ref > 0 else 0.0
    if residual > max_residual:
        raise NonConvergent(f"extrapolation residual {residual:.3g} exceeds {max_residual}")
    if detail:
        return FDResult(full, residual, tuple(q), widths, tuple(lin))
    return full


# ---------------------------------------------------------------------------
# numeric integration of closed-form field terms


def form_envelope(form):
    """Peak position and RMS width of ``|exp(form)|``."""
    a = complex(form.alpha)
    c = complex(form.center)
    return (a * c).real / a.real, math.sqrt(-1.0 / (2 * a.real))


def integrate_field(forms, rtol: float = 1e-10, half_width: float = 12.0) -> float:
    """``integral 2 Re sum exp(form(x)) dx`` sampled on the real line."""
    env = [form_envelope(f) for f in forms]
    lo = min(p - half_width * w for p, w in env)
    hi = max(p + half_width * w for p, w in env)
    swing = 0.0
    for f in forms:
        a, c = complex(f.alpha), complex(f.center)

        def phase(x):
            return (a * (x - c) ** 2).imag

        # the phase is quadratic in x; add the stationary point when inside
        pts = [lo, hi]
        x_s = (a * c).imag / a.imag if a.imag else lo
        if lo < x_s < hi:
            pts.insert(1, x_s)
        swing = max(swing, sum(abs(phase(u) - phase(v)) for u, v in zip(pts, pts[1:])))
    n0 = int(math.ceil(swing / (math.pi / 4)))

    def integrand(x):
        total = np.zeros(x.shape, complex)
        for f in forms:
            u = x - f.center
            total += np.exp(f.alpha * u * u + f.offset)
        return 2 * total.real

    value, _ = adaptive_quad(integrand, lo, hi, rtol=rtol, initial_panels=n0)
    return float(value)


# ---------------------------------------------------------------------------
# counting statistics

GENERATOR = "numpy.random.Generator(PCG64), SeedSequence-spawned per replication"


@dataclass(frozen=True)
class CountingResult:
    """One simulated pin measurement.

    ``rms_error`` is the normalised RMS ``1/sqrt(n)`` of the reference count;
    ``ratio_error`` propagates the Poisson error of both counts into the ratio.
    """

    n_with_pin: int
    n_without_pin: int
    ratio_estimate: float
    rms_error: float
    ratio_error: float
    seed: int
    expected_without: float
    expected_with: float
    replica: int = 0
    generator: str = GENERATOR

    def to_dict(self) -> dict:
        return asdict(self)


def expected_probabilities(setup: ExperimentSetup, pin=None):
    """``(P2b, P2b with pin)`` from the closed forms."""
    from .interference import composite_kernel
    from .perturb import kernel_at, pin_blocking, pin_blocking_from_forms

    p0 = coherent_detection_probability(setup)
    if pin is None:
        return p0, p0
    if setup.is_single:
        rel = pin_blocking(kernel_at(setup, pin.z), pin)
    else:
        rel = pin_blocking_from_forms(composite_kernel(setup, pin.z).terms, p0, pin)
    return p0, p0 * (1.0 + rel)


def trials_for_counts(setup: ExperimentSetup, counts: float) -> int:
    """Number of entering particles giving ``counts`` expected detections without a pin."""
    return int(round(counts / coherent_detection_probability(setup)))


def _draw(rng, lam_without, lam_with, seed, replica):
    n0 = int(rng.poisson(lam_without))
    n1 = int(rng.poisson(lam_with))
    ratio = n1 / n0 if n0 else math.nan
    rms = 1 / math.sqrt(n0) if n0 else math.inf
    rerr = ratio * math.sqrt(1 / n1 + 1 / n0) if n0 and n1 else math.inf
    return CountingResult(n1, n0, ratio, rms, rerr, seed, lam_without, lam_with, replica)


def simulate_counts(setup: ExperimentSetup, pin, n_trials: int, seed: int) -> CountingResult:
    """Poisson counts with and without the pin for ``n_trials`` entering particles."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    p0, p1 = expected_probabilities(setup, pin)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return _draw(rng, n_trials * p0, n_trials * p1, seed, 0)


def replicate_counts(setup, pin, n_trials: int, n_replications: int, seed: int, threads: int = 1):
    """Independent replications; each draws from its own spawned seed sequence.

    Results do not depend on ``threads``.
    """
    p0, p1 = expected_probabilities(setup, pin)
    children = np.random.SeedSequence(seed).spawn(n_replications)

    def one(i):
        rng = np.random.Generator(np.random.PCG64(children[i]))
        return _draw(rng, n_trials * p0, n_trials * p1, seed, i)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(n_replications)))
    return [one(i) for i in range(n_replications)]
