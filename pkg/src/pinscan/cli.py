"""Command-line front end.

Subcommands ``field``, ``pattern``, ``analyze``, ``verify`` and ``count`` read
one JSON config (SI metres, no unit suffixes) and write CSV grids/curves or
JSON reports.  Every output carries the full config and seed.

Exit codes: 0 success, 1 invalid input, 2 tolerance failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analytics import counting_error, max_envelope_position, plan_for_pin, small_slit_limits, spindle_at
from .errors import PinscanError, SetupError, ToleranceNotMet
from .interference import composite_kernel, pattern
from .perturb import PinSpec, kernel_at
from .propagate import ExperimentSetup, rms_width

EXIT_OK, EXIT_INVALID, EXIT_TOLERANCE, EXIT_IO = 0, 1, 2, 3


def _default_setup() -> dict:
    return ExperimentSetup.single(0.5e-6, 2.0, 0.0, 50e-6, 3e-3, 4e-6).to_dict()


@dataclass(frozen=True)
class FieldSpec:
    x_min: float = -2e-3
    x_max: float = 4e-3
    nx: int = 400
    z_min: float = 0.01
    z_max: float = 1.99
    nz: int = 400


@dataclass(frozen=True)
class PatternSpec:
    s2_min: float = -1e-3
    s2_max: float = 1e-3
    n: int = 401
    z: Optional[float] = None


@dataclass(frozen=True)
class AnalyzeSpec:
    z_min: float = 0.02
    z_max: float = 1.98
    nz: int = 99
    s2_values: tuple = (0.0, 1e-3, 2e-3, 3e-3)


@dataclass(frozen=True)
class CountSpec:
    x_p: float = 2.859e-3
    width: float = 10e-6
    z: float = 1.98
    expected_counts: float = 4e4
    replications: int = 200
    pin: bool = True


@dataclass(frozen=True)
class VerifySpec:
    n_random: int = 50


_SECTIONS = {
    "field": FieldSpec,
    "pattern": PatternSpec,
    "analyze": AnalyzeSpec,
    "count": CountSpec,
    "verify": VerifySpec,
}


@dataclass(frozen=True)
class RunConfig:
    setup: ExperimentSetup
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    pattern: PatternSpec = dc_field(default_factory=PatternSpec)
    analyze: AnalyzeSpec = dc_field(default_factory=AnalyzeSpec)
    count: CountSpec = dc_field(default_factory=CountSpec)
    verify: VerifySpec = dc_field(default_factory=VerifySpec)
    seed: int = 0
    tolerance: float = 1e-8

    def to_dict(self) -> dict:
        out = {"setup": self.setup.to_dict()}
        for name in _SECTIONS:
            sec = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        out["seed"] = self.seed
        out["tolerance"] = self.tolerance
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise SetupError("config must be a JSON object")
        unknown = set(data) - {"setup", "seed", "tolerance", *_SECTIONS}
        if unknown:
            raise SetupError(f"unknown config keys: {sorted(unknown)}")
        kw = {"setup": ExperimentSetup.from_dict(data.get("setup", _default_setup()))}
        for name, typ in _SECTIONS.items():
            sec = data.get(name, {})
            allowed = {f.name for f in fields(typ)}
            bad = set(sec) - allowed
            if bad:
                raise SetupError(f"unknown keys in {name!r}: {sorted(bad)}")
            sec = {k: tuple(v) if isinstance(v, list) else v for k, v in sec.items()}
            try:
                kw[name] = typ(**sec)
            except TypeError as exc:
                raise SetupError(str(exc)) from exc
        kw["seed"] = int(data.get("seed", 0))
        kw["tolerance"] = float(data.get("tolerance", 1e-8))
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        L = self.setup.length
        f, p, a, c = self.field, self.pattern, self.analyze, self.count
        _need(f.nx >= 1 and f.nz >= 1, "field grid needs nx, nz >= 1")
        _need(f.x_max >= f.x_min, "field x_max must not be below x_min")
        _need(0 < f.z_min <= f.z_max < L, "field z range must lie inside (0, L)")
        _need(p.n >= 1 and p.s2_max >= p.s2_min, "pattern grid is empty")
        _need(p.z is None or 0 < p.z < L, "pattern z must lie inside (0, L)")
        _need(a.nz >= 1 and 0 < a.z_min <= a.z_max < L, "analyze z range must lie inside (0, L)")
        _need(len(a.s2_values) >= 1, "analyze needs at least one s2")
        _need(c.width > 0 and 0 < c.z < L, "count pin needs width > 0 and z inside (0, L)")
        _need(c.expected_counts > 0 and c.replications >= 1, "count needs positive counts and replications")
        _need(self.verify.n_random >= 0, "verify n_random must be non-negative")
        _need(self.tolerance > 0, "tolerance must be positive")
        _need(self.seed >= 0, "seed must be non-negative")
        for v in (f.x_min, f.x_max, p.s2_min, p.s2_max, c.x_p, *a.s2_values):
            _need(math.isfinite(v), "non-finite value in config")


def _need(cond, msg):
    if not cond:
        raise SetupError(msg)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig.from_dict({})
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SetupError(f"config is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    return "%.17g" % x


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return fmt(v) if math.isfinite(v) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _metadata(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": cfg.seed,
        "units": "SI (metres)",
        "config": cfg.to_dict(),
    }


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj) + "\n")


def sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


# ---------------------------------------------------------------------------
# commands


@dataclass
class FieldGrid:
    """Field samples on an ``(x, z)`` rectangle; ``values[i_z, i_x]``."""

    x: np.ndarray
    z: np.ndarray
    values: np.ndarray
    metadata: dict = dc_field(default_factory=dict)


def _kernel_field(setup, z):
    if setup.is_single:
        return kernel_at(setup, z).__call__
    return composite_kernel(setup, z).field


def _parallel(fn, n, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def field_grid(cfg: RunConfig, threads: int = 1) -> FieldGrid:
    f = cfg.field
    xs = np.linspace(f.x_min, f.x_max, f.nx)
    zs = np.linspace(f.z_min, f.z_max, f.nz)
    values = np.empty((f.nz, f.nx))

    def row(i):
        values[i] = _kernel_field(cfg.setup, float(zs[i]))(xs)

    _parallel(row, f.nz, threads)
    if not np.all(np.isfinite(values)):
        raise SetupError("field grid contains non-finite values")
    return FieldGrid(xs, zs, values)


def cmd_field(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    grid = field_grid(cfg, threads)
    zz, xx = np.meshgrid(grid.z, grid.x, indexing="ij")
    write_csv(out, ["z", "x", "field"], zip(zz.ravel(), xx.ravel(), grid.values.ravel()))
    meta = _metadata(cfg, "field")
    meta["layout"] = "row-major: z outer (nz rows), x inner (nx columns); field in 1/m"
    meta["shape"] = [len(grid.z), len(grid.x)]
    write_json(sidecar(out), meta)
    return EXIT_OK


def pattern_rows(cfg: RunConfig, threads: int = 1):
    p = cfg.pattern
    grid = np.linspace(p.s2_min, p.s2_max, p.n)
    z = p.z if p.z is not None else 0.5 * cfg.setup.length
    chunks = np.array_split(grid, max(1, min(threads, len(grid))))
    parts = _parallel(lambda i: pattern(cfg.setup, chunks[i], z), len(chunks), threads)
    return [row for part in parts for row in part]


def cmd_pattern(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    write_csv(out, ["s2", "p2b"], pattern_rows(cfg, threads))
    write_json(sidecar(out), _metadata(cfg, "pattern"))
    return EXIT_OK


def analyze_report(cfg: RunConfig) -> dict:
    setup = cfg.setup
    if not setup.is_single:
        raise SetupError("analyze needs a single entrance slit")
    a = cfg.analyze
    zs = np.linspace(a.z_min, a.z_max, a.nz)
    sigma1 = setup.entrance[0].sigma
    contours = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for s2 in a.s2_values:
            s = setup.with_exit_center(float(s2))
            rows = []
            for z in zs:
                z = float(z)
                sp = spindle_at(kernel_at(s, z))
                alpha_a, xpi_a, sw_a = small_slit_limits(s.scaled(z), sigma1, s.wavelength, s.length)
                rows.append({
                    "z": z, "x_c0": sp.x_c0, "x_pi": sp.x_pi, "x_max": sp.x_max,
                    "sigma_w": sp.sigma_w, "rms_width": rms_width(s, z),
                    "x_pi_small_slit": xpi_a, "sigma_w_small_slit": sw_a,
                })
            contours.append({"s2": float(s2), "rows": rows})
    rho = setup.exit.sigma**2 / sigma1**2
    root = max_envelope_position(rho)
    return {
        "contours": contours,
        "envelope_maximum": {"rho": rho, "xi": root.xi, "z": root.xi * setup.length,
                             "degenerate": root.degenerate},
        "small_slit_warnings": len(caught),
    }


def cmd_analyze(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    report = analyze_report(cfg)
    report["metadata"] = _metadata(cfg, "analyze")
    write_json(out, report)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    from .checks import verify_suite

    try:
        results = verify_suite(cfg.setup, cfg.tolerance, cfg.verify.n_random, cfg.seed, threads)
        failures = [r.name for r in results if not r.passed]
        checks = [r.to_dict() for r in results]
    except ToleranceNotMet as exc:
        failures = [f"quadrature: {exc}"]
        checks = []
    report = {"passed": not failures, "failures": failures, "checks": checks,
              "metadata": _metadata(cfg, "verify")}
    write_json(out, report)
    return EXIT_OK if not failures else EXIT_TOLERANCE


def count_report(cfg: RunConfig, threads: int = 1) -> dict:
    from .oracle import GENERATOR, replicate_counts, simulate_counts, trials_for_counts

    c = cfg.count
    setup = cfg.setup
    pin = PinSpec.from_width(c.x_p, c.width, c.z) if c.pin else None
    n_trials = trials_for_counts(setup, c.expected_counts)
    single = simulate_counts(setup, pin, n_trials, cfg.seed)
    reps = replicate_counts(setup, pin, n_trials, c.replications, cfg.seed, threads)
    n0 = np.array([r.n_without_pin for r in reps], float)
    ratios = np.array([r.ratio_estimate for r in reps])
    report = {
        "generator": GENERATOR,
        "n_trials": n_trials,
        "result": single.to_dict(),
        "replications": {
            "count": len(reps),
            "normalized_rms": float(np.std(n0 / single.expected_without, ddof=1)) if len(reps) > 1 else None,
            "predicted_rms": 1 / math.sqrt(single.expected_without),
            "ratio_mean": float(ratios.mean()),
            "ratio_std": float(np.std(ratios, ddof=1)) if len(reps) > 1 else None,
        },
    }
    if pin is not None and setup.is_single:
        plan = plan_for_pin(kernel_at(setup, c.z), pin, int(round(c.expected_counts)))
        stat, sys_err = counting_error(plan)
        report["error_budget"] = {
            "expected_ratio": plan.expected_ratio,
            "field_mean": plan.field_mean,
            "field_variation": plan.field_variation,
            "statistical": stat,
            "pin_width": sys_err,
        }
    return report


def cmd_count(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    report = count_report(cfg, threads)
    report["metadata"] = _metadata(cfg, "count")
    write_json(out, report)
    return EXIT_OK


COMMANDS = {
    "field": cmd_field,
    "pattern": cmd_pattern,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "count": cmd_count,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinscan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run config (default: reference setup)")
        p.add_argument("--out", required=True, help="output file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--tolerance", type=float, help="override the config tolerance")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.tolerance is not None:
            cfg = replace(cfg, tolerance=args.tolerance)
        cfg.validate()
        if args.threads < 1:
            raise SetupError("--threads must be at least 1")
        return COMMANDS[args.command](cfg, Path(args.out), args.threads)
    except OSError as exc:
        print(f"pinscan: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ToleranceNotMet as exc:
        print(f"pinscan: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (PinscanError, ValueError) as exc:
        print(f"pinscan: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
