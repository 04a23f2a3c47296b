"""Command line entry point: ``krsoliton {solve,verify,sweep,quotient}``.

Every run emits a JSON report (stdout unless ``--out-report``).  Exit codes:
0 success, 2 invalid configuration, 3 solver failure, 4 positivity or closing
violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import quotient as quo
from . import verify as ver
from .errors import (InvalidGeometryError, OutOfRangeError, PositivityError, SolitonError,
                     SolverFailure)
from .exact_poly import Geometry
from .profile import SolitonCase, classify, solve

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_POSITIVITY = 0, 2, 3, 4
MODES = ("solve", "verify", "sweep", "quotient")
CSV_COLUMNS = ("phi", "r", "s", "F", "P", "eig_horizontal", "eig_fiber_tangential",
               "eig_fiber_radial")

log = logging.getLogger("krsoliton")


class ConfigError(InvalidGeometryError):
    pass


def parse_rational(value, name: str) -> Fraction:
    """Rationals from ints, strings like ``"3/2"`` or ``"0.5"``, or floats read as decimals."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a rational, got {value!r}")
    try:
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: cannot read {value!r} as a rational") from None


@dataclass
class RunConfig:
    mode: str = "solve"
    d: int | None = None
    n: int | None = None
    tau: str | None = None
    eps: str | None = None
    compact: bool = False
    mu: float | None = None
    phi_min: float = 1e-6
    phi_max: float | None = None
    grid: int = 2048
    anchor_phi: float | None = None
    out_report: str | None = None
    out_table: str | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    mu_min: float | None = None
    mu_max: float | None = None
    steps: int | None = None
    a: float | None = None
    A: float | None = None
    B: float | None = None
    u_norm2: float | None = None
    xi_norm2: float | None = None
    timing: bool = False

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        for name in ("grid", "seed", "steps", "d", "n"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigError(f"{name} must be an integer")
        for name in ("mu", "phi_min", "phi_max", "anchor_phi", "mu_min", "mu_max", "a", "A",
                     "B", "u_norm2", "xi_norm2"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))
                                  or not math.isfinite(v)):
                raise ConfigError(f"{name} must be a finite number")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be an object")
        unknown = set(self.tolerances) - set(ver.TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance names: {sorted(unknown)}")
        if self.mode == "quotient":
            return
        missing = [k for k in ("d", "n", "tau", "eps") if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"missing geometry fields: {missing}")
        if self.grid < 2:
            raise ConfigError("grid must be at least 2")
        if self.mode == "sweep":
            if self.mu_min is None or self.mu_max is None or self.steps is None:
                raise ConfigError("sweep needs mu_min, mu_max and steps")
            if self.steps < 1:
                raise ConfigError("steps must be >= 1")
            if self.mu_min >= 0 or self.mu_max >= 0:
                raise ConfigError("sweep range must be strictly negative")

    def geometry(self) -> Geometry:
        return Geometry(self.d, self.n, parse_rational(self.tau, "tau"),
                        parse_rational(self.eps, "eps"))

    def echo(self) -> dict:
        # output paths do not affect results, so reports stay identical wherever they are written
        skip = ("timing", "out_report", "out_table")
        out = {k: v for k, v in asdict(self).items() if v is not None and k not in skip}
        for k in ("tau", "eps"):
            if k in out:
                out[k] = str(parse_rational(out[k], k))
        if not out.get("tolerances"):
            out.pop("tolerances", None)
        return out


def _finite(x):
    """JSON-safe floats: non-finite values become strings."""
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _grid_summary(grid: geo.ProfileGrid) -> dict:
    positive = geo.grid_positive(grid)
    return {"count": len(grid), "phi_min": grid.phi_min, "phi_max": grid.phi_max,
            "anchor_phi": grid.anchor_phi, "r_min": float(grid.r[0]),
            "r_max": float(grid.r[-1]), "P_min": float(grid.P[0]), "P_max": float(grid.P[-1]),
            "max_quad_error": float(grid.quad_error.max()), "eigenvalues_positive": positive}


def write_table(grid: geo.ProfileGrid, path: str) -> None:
    hor, tan, rad = geo.grid_eigenvalues(grid)
    cols = (grid.phi, grid.r, grid.s, grid.F, grid.P, hor, tan, rad)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in zip(*cols):
            w.writerow([f"{float(v):.17g}" for v in row])


def _profile_and_grid(cfg: RunConfig):
    geom = cfg.geometry()
    profile = solve(geom, compact=cfg.compact, mu=cfg.mu)
    grid = geo.build_grid(profile, cfg.phi_min, cfg.phi_max, cfg.grid, cfg.anchor_phi)
    return profile, grid


def run_solve(cfg: RunConfig) -> tuple[dict, geo.ProfileGrid]:
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        profile, grid = _profile_and_grid(cfg)
        report: dict = {"schema_version": SCHEMA_VERSION, "mode": "solve",
                        "config": cfg.echo(), "geometry": profile.geom.to_dict(),
                        "case": profile.case.value}
        report.update(profile.to_dict())
        if profile.case.is_compact:
            cd = geo.closing_data(grid)
            if not cd.positive:
                raise PositivityError(f"boundary eigenvalues not positive: {cd.boundary_eigenvalues}")
            report["closing"] = cd.to_dict()
        else:
            try:
                report["asymptotics"] = geo.asymptotic_data(grid).to_dict()
            except OutOfRangeError as exc:
                report["asymptotics"] = {"unavailable": str(exc)}
            report["completeness"] = geo.completeness_diagnostics(profile)
        residuals = ver.run_suite(profile, grid, tolerances=cfg.tolerances)
        report["residuals"] = [r.to_dict() for r in residuals]
        scan = next(r for r in residuals if r.name == "root_scan")
        report["root_scan"] = {"phi_max": 1e3, "roots": scan.detail["roots"]}
        report["grid"] = _grid_summary(grid)
        if not report["grid"]["eigenvalues_positive"]:
            raise PositivityError("metric eigenvalues not positive on the grid")
        report["all_pass"] = all(r.passed for r in residuals)
    report["warnings"] = [str(w.message) for w in caught]
    if cfg.timing:
        report["wall_time"] = time.perf_counter() - start
    return report, grid


def run_verify(cfg: RunConfig) -> dict:
    """Profile residual suite plus the seeded geometry-independent checks."""
    start = time.perf_counter()
    profile, grid = _profile_and_grid(cfg)
    reports = ver.run_suite(profile, grid, tolerances=cfg.tolerances)
    rng = np.random.default_rng(cfg.seed)
    geom = profile.geom
    mus = [Fraction(int(rng.integers(1, 50)), int(rng.integers(1, 20))) *
           (1 if rng.random() < 0.5 else -1) for _ in range(5)]
    xs = [Fraction(int(rng.integers(1, 100)), int(rng.integers(1, 30))) for _ in range(5)]
    exact_ok = all(ver.finite_sum_identity_residual(geom, m, xs).passed for m in mus)
    reports.append(ver.ResidualReport("finite_sum_identity_random", 0.0 if exact_ok else 1.0,
                                      0.0 if exact_ok else 1.0, len(mus) * len(xs), 0.0))
    for d, k in ((1, 1), (2, 1), (2, 2)):
        reports.append(ver.fik_transform_residual(d, k))
    samples = []
    for _ in range(200):
        a, A, B = rng.uniform(-10, 10), rng.uniform(1, 10), rng.uniform(1e-6, 10)
        c = quo.phi_a_closed(a, A, B)
        samples.append(abs(quo.legendre_numeric(A, B, a) - c) / (1 + abs(c)))
    reports.append(ver.ResidualReport("legendre_agreement", max(samples), max(samples),
                                      len(samples), 1e-10))
    report = {"schema_version": SCHEMA_VERSION, "mode": "verify", "config": cfg.echo(),
              "case": profile.case.value, "mu": profile.mu,
              "residuals": [r.to_dict() for r in reports],
              "all_pass": all(r.passed for r in reports)}
    if cfg.timing:
        report["wall_time"] = time.perf_counter() - start
    return report


def sweep_values(mu_min: float, mu_max: float, steps: int) -> list[float]:
    if steps == 1:
        return [float(mu_min)]
    return [float(v) for v in np.linspace(mu_min, mu_max, steps)]


def run_sweep(cfg: RunConfig) -> dict:
    case = classify(cfg.geometry(), cfg.compact)
    if case not in (SolitonCase.STEADY, SolitonCase.EXPANDING):
        raise ConfigError(f"sweep is for steady or expanding families, not {case.value}")
    reports, summary = [], []
    for mu in sorted(sweep_values(cfg.mu_min, cfg.mu_max, cfg.steps)):
        sub = RunConfig(**{**asdict(cfg), "mode": "solve", "mu": mu, "mu_min": None,
                           "mu_max": None, "steps": None, "out_report": None,
                           "out_table": None})
        rep, _ = run_solve(sub)
        reports.append(rep)
        row = {"mu": mu, "positive": rep["grid"]["eigenvalues_positive"],
               "all_pass": rep["all_pass"]}
        asym = rep.get("asymptotics", {})
        row.update({k: asym[k] for k in ("c1", "p") if k in asym})
        summary.append(row)
    return {"schema_version": SCHEMA_VERSION, "mode": "sweep", "config": cfg.echo(),
            "summary": summary, "reports": reports,
            "all_pass": all(r["all_pass"] for r in reports)}


def run_quotient(cfg: RunConfig) -> dict:
    if cfg.a is None:
        raise ConfigError("quotient needs --a")
    if cfg.A is not None or cfg.B is not None:
        if cfg.A is None or cfg.B is None:
            raise ConfigError("give both --A and --B")
        A, B = float(cfg.A), float(cfg.B)
    elif cfg.u_norm2 is not None and cfg.xi_norm2 is not None:
        A, B = 1.0 + cfg.u_norm2, float(cfg.xi_norm2)
    else:
        raise ConfigError("quotient needs --A/--B or --u-norm2/--xi-norm2")
    a = float(cfg.a)
    closed = quo.phi_a_closed(a, A, B)
    numeric = quo.legendre_numeric(A, B, a)
    rel = abs(numeric - closed) / (1 + abs(closed))
    return {"schema_version": SCHEMA_VERSION, "mode": "quotient", "config": cfg.echo(),
            "a": a, "A": A, "B": B, "phi_a_closed": closed, "legendre_numeric": numeric,
            "relative_difference": rel, "pass": rel <= 1e-10}


def run(cfg: RunConfig) -> dict:
    """Execute one configured run and write its outputs; returns the report."""
    if cfg.mode == "solve":
        report, grid = run_solve(cfg)
        if cfg.out_table:
            write_table(grid, cfg.out_table)
    elif cfg.mode == "verify":
        report = run_verify(cfg)
    elif cfg.mode == "sweep":
        report = run_sweep(cfg)
    else:
        report = run_quotient(cfg)
    return _finite(report)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--tau", help="rational, e.g. 2 or 3/2")
    p.add_argument("--eps", help="rational >= 0")
    p.add_argument("--compact", action="store_true", default=None)
    p.add_argument("--mu", type=float)
    p.add_argument("--phi-min", dest="phi_min", type=float)
    p.add_argument("--phi-max", dest="phi_max", type=float)
    p.add_argument("--grid", type=int, help="grid row count (default 2048)")
    p.add_argument("--anchor-phi", dest="anchor_phi", type=float)
    p.add_argument("--out-report", dest="out_report", metavar="PATH")
    p.add_argument("--out-table", dest="out_table", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--timing", action="store_true", default=None,
                   help="include wall time in the report (breaks byte-identity)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krsoliton", allow_abbrev=False,
                                     description="Rotationally symmetric Kähler-Ricci solitons")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, text in (("solve", "solve a profile and build its metric"),
                       ("verify", "run the residual suite"),
                       ("sweep", "scan a steady or expanding family in mu")):
        p = sub.add_parser(mode, help=text, allow_abbrev=False)
        _add_common(p)
        if mode == "sweep":
            p.add_argument("--mu-min", dest="mu_min", type=float)
            p.add_argument("--mu-max", dest="mu_max", type=float)
            p.add_argument("--steps", type=int)
    q = sub.add_parser("quotient", help="quotient potential at one point", allow_abbrev=False)
    q.add_argument("--config")
    q.add_argument("--a", type=float)
    q.add_argument("--A", type=float)
    q.add_argument("--B", type=float)
    q.add_argument("--u-norm2", dest="u_norm2", type=float)
    q.add_argument("--xi-norm2", dest="xi_norm2", type=float)
    q.add_argument("--out-report", dest="out_report", metavar="PATH")
    q.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data = dict(data)
    file_mode = data.pop("mode", args.mode)
    if file_mode != args.mode:
        raise ConfigError(f"config mode {file_mode!r} does not match subcommand {args.mode!r}")
    for key, value in vars(args).items():
        if key in ("config", "verbose", "mode") or value is None:
            continue
        data[key] = value
    data["mode"] = args.mode
    return RunConfig.from_mapping(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        report = run(cfg)
    except InvalidGeometryError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except SolverFailure as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except PositivityError as exc:
        log.error("positivity violation: %s", exc)
        return EXIT_POSITIVITY
    except SolitonError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    text = json.dumps(report, indent=2, allow_nan=False) + "\n"
    if cfg.out_report:
        Path(cfg.out_report).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
