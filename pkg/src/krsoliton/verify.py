"""Independent oracles and residual checks for solved profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidGeometryError, SolverFailure
from .exact_poly import Geometry, as_rational, derivatives_at
from .geometry import ProfileGrid, build_grid, phi_of_r
from .profile import SolitonCase, SolitonProfile, h_table, root_scan_f, solve

# One table for every check; see regression_matrix for where they are exercised.
TOLERANCES = {
    "ode_residual": 1e-10,
    "ode_integration": 1e-6,
    "q_reduction": 1e-5,
    "finite_sum": 1e-12,
    "fik_transform": 1e-9,
    "cigar": 1e-10,
    "closing_F": 1e-10,
    "closing_dF": 1e-8,
}

Q_STEP = 1e-3


@dataclass(frozen=True)
class ResidualReport:
    name: str
    max_abs: float
    max_rel: float
    grid_size: int
    tolerance: float
    measure: str = "abs"
    detail: dict | None = None

    @property
    def passed(self) -> bool:
        value = self.max_abs if self.measure == "abs" else self.max_rel
        return bool(value <= self.tolerance)

    def to_dict(self) -> dict:
        out = {"name": self.name, "max_abs": self.max_abs, "max_rel": self.max_rel,
               "grid_size": self.grid_size, "tolerance": self.tolerance,
               "measure": self.measure, "pass": self.passed}
        if self.detail:
            out["detail"] = self.detail
        return out


def _report(name, abs_err, scale, tol, measure="abs", detail=None) -> ResidualReport:
    abs_err = np.abs(np.asarray(abs_err, dtype=float))
    rel = abs_err / np.maximum(np.abs(scale), np.finfo(float).tiny)
    max_abs = float(abs_err.max()) if abs_err.size else 0.0
    max_rel = float(rel.max()) if rel.size else 0.0
    if not math.isfinite(max_abs):
        max_abs = max_rel = math.inf
    return ResidualReport(name, max_abs, max_rel, int(abs_err.size), tol, measure, detail)


def default_phi_grid(profile: SolitonProfile, count: int = 1000) -> np.ndarray:
    top = profile.b1_float if profile.case.is_compact else 1e2
    return np.geomspace(1e-6, top, count)


def ode_rhs(geom: Geometry, mu: float, phi, F):
    """``F'`` from the ODE, solved for the derivative."""
    d, n = geom.d, geom.n
    eps, tau = float(geom.eps), float(geom.tau)
    return (n * (1 + eps * phi) - tau * phi - d * eps * F / (1 + eps * phi)
            - (n - 1) * F / phi + mu * F)


def ode_residual(profile: SolitonProfile, phi_grid=None, mu: float | None = None,
                 tol: float | None = None) -> ResidualReport:
    """Residual of the profile ODE with ``F'`` from the differentiated closed form.

    ``mu`` overrides the constant used in the equation (negative controls).
    """
    g = profile.geom
    phi = default_phi_grid(profile) if phi_grid is None else np.asarray(phi_grid, dtype=float)
    mu = profile.mu if mu is None else float(mu)
    F, dF = profile.F_and_dF(phi)
    eps, tau = float(g.eps), float(g.tau)
    terms = np.abs(np.stack([
        dF, g.d * eps * F / (1 + eps * phi), (g.n - 1) * F / phi, mu * F,
        g.n * (1 + eps * phi), tau * phi]))
    res = dF - ode_rhs(g, mu, phi, F)
    return _report("ode_residual", res, terms.sum(axis=0),
                   TOLERANCES["ode_residual"] if tol is None else tol)


def _q_window(profile: SolitonProfile) -> tuple[float, float]:
    if profile.case.is_compact:
        b1 = profile.b1_float
        return 0.01 * b1, 0.9 * b1
    return 1e-2, 10.0


def q_reduction_residual(grid: ProfileGrid, r_step: float = Q_STEP, lam_shift: float = 0.0,
                         tol: float | None = None) -> ResidualReport:
    """Check ``dQ/dr = mu phi_r`` by centered differences on a uniform ``r`` grid.

    ``Q = d log(1+eps phi) + (n-1) log phi + log phi_r - n r + lam P``; the
    finite-difference error is ``O(r_step^2)`` so the default tolerance is
    ``10 r_step^2``.  ``lam_shift`` perturbs ``lam`` inside ``Q`` (negative control).
    """
    prof = grid.profile
    g = prof.geom
    lo, hi = _q_window(prof)
    lo, hi = max(lo, grid.phi_min), min(hi, grid.phi_max)
    r_lo, r_hi = grid.r_at(lo), grid.r_at(hi)
    m = int(math.floor((r_hi - r_lo) / r_step))
    r = r_lo + r_step * np.arange(m + 1)
    phi = phi_of_r(grid, r)
    F = prof.F(phi)
    P = grid.P_at(phi)
    lam = float(g.lam) + lam_shift
    eps = float(g.eps)
    Q = g.d * np.log1p(eps * phi) + (g.n - 1) * np.log(phi) + np.log(F) - g.n * r + lam * P
    dQ = (Q[2:] - Q[:-2]) / (2 * r_step)
    target = prof.mu * F[1:-1]
    tol = TOLERANCES["q_reduction"] * (r_step / Q_STEP) ** 2 if tol is None else tol
    return _report("q_reduction", dQ - target, target, tol,
                   detail={"r_step": r_step, "phi_window": [lo, hi]})


def _identity_terms(table, mu, phi, terms: int, exp_factor):
    """Return (residual, scale) of ``d/dphi[-sum h^(k) mu^-(k+1) e^(-mu phi)] - h e^(-mu phi)``."""
    if isinstance(phi, Fraction):
        hk = list(derivatives_at(table, phi))
    else:
        hk = [np.polynomial.polynomial.polyval(phi, p.to_floats() or [0.0]) for p in table]
    zero = 0 * hk[0]
    hk += [zero] * max(0, terms + 2 - len(hk))
    # derivative of -h^(k) e^(-mu phi)/mu^(k+1) is (-h^(k+1)/mu^(k+1) + h^(k)/mu^k) e^(-mu phi)
    res = -hk[0]
    scale = abs(hk[0])
    for k in range(terms + 1):
        a = -hk[k + 1] / mu ** (k + 1)
        b = hk[k] / mu**k
        res += a + b
        scale += abs(a) + abs(b)
    return res * exp_factor, scale * abs(exp_factor)


def finite_sum_identity_residual(geom: Geometry, mu, phi_samples: Sequence,
                                 terms: int | None = None,
                                 tol: float | None = None) -> ResidualReport:
    """Antiderivative identity for ``h(phi) e^(-mu phi)`` using the finite derivative sum.

    With rational ``mu`` and rational samples the residual is computed exactly
    (the common factor ``e^(-mu phi) > 0`` is divided out) and must be exactly
    zero; otherwise it is evaluated in floats.  ``terms`` truncates the sum at
    ``k = terms`` (default ``d + n``).
    """
    table = h_table(geom)
    terms = geom.degree if terms is None else terms
    exact = isinstance(mu, (int, Fraction)) and all(
        isinstance(x, (int, Fraction)) for x in phi_samples)
    if exact:
        m = as_rational(mu)
        if m == 0:
            raise InvalidGeometryError("mu must be nonzero")
        vals = [_identity_terms(table, m, as_rational(x), terms, Fraction(1)) for x in phi_samples]
        residuals = [v[0] for v in vals]
        abs_err = [abs(float(v)) for v in residuals]
        scale = [float(v[1]) for v in vals]
        rep = _report("finite_sum_identity", abs_err, scale, 0.0,
                      detail={"exact": True, "all_zero": all(v == 0 for v in residuals)})
        return rep
    m = float(mu)
    if m == 0:
        raise InvalidGeometryError("mu must be nonzero")
    x = np.asarray(phi_samples, dtype=float)
    res, scale = _identity_terms(table, m, x, terms, np.exp(-m * x))
    return _report("finite_sum_identity", res, scale,
                   TOLERANCES["finite_sum"] if tol is None else tol, measure="rel",
                   detail={"exact": False})


def exact_identity_residuals(geom: Geometry, mu: Fraction, phi_samples, terms=None):
    """The exact rational residuals themselves (zero for the full sum)."""
    table = h_table(geom)
    terms = geom.degree if terms is None else terms
    return [_identity_terms(table, as_rational(mu), as_rational(x), terms, Fraction(1))[0]
            for x in phi_samples]


def _scalar_rhs(geom: Geometry, mu: float):
    d, n = geom.d, geom.n
    eps, tau = float(geom.eps), float(geom.tau)
    de, n1 = d * eps, n - 1

    def rhs(x, y):
        F = y[0]
        one = 1.0 + eps * x
        return [n * one - tau * x - de * F / one - n1 * F / x + mu * F]

    return rhs


def _integrate(geom, mu, a, b, y0, t_eval):
    sol = solve_ivp(_scalar_rhs(geom, mu), (a, b), [y0], method="DOP853",
                    t_eval=t_eval, rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise SolverFailure(f"integrator failed: {sol.message}")
    return sol.y[0]


def ode_integration_oracle(profile: SolitonProfile, phi_start: float | None = None,
                           phi_end: float | None = None, samples: int = 200,
                           tol: float | None = None) -> ResidualReport:
    """Compare ``F`` with an independent DOP853 integration of the ODE.

    The initial value is the series branch at ``phi_start``.  For shrinking
    noncompact profiles forward integration amplifies errors like
    ``exp(mu phi)``, so it stops at ``phi_m = 2(d+n)/mu`` and the rest is
    integrated backwards (the stable direction) from far out, started on the
    asymptote ``F ~ (lam/mu) phi`` whose error is damped by ``exp(-40)``.
    """
    g, mu = profile.geom, profile.mu
    if phi_start is None:
        phi_start = 1e-4 / max(1.0, abs(mu))
    if phi_end is None:
        phi_end = profile.b1_float - 1e-4 if profile.case.is_compact else 1e2
    if not 0 < phi_start < phi_end:
        raise InvalidGeometryError("need 0 < phi_start < phi_end")
    if phi_start > profile.phi_switch:
        raise InvalidGeometryError("phi_start must lie in the series branch")
    x = np.geomspace(phi_start, phi_end, samples)
    y0 = profile.F_series(phi_start)
    split = None
    if profile.case is SolitonCase.SHRINKING_NONCOMPACT:
        split = 2 * g.degree / mu
    if split is None or split >= phi_end:
        F_ivp = _integrate(g, mu, phi_start, phi_end, y0, x)
    else:
        fwd = x[x <= split]
        bwd = x[x > split]
        far = phi_end + 40.0 / mu
        F_f = _integrate(g, mu, phi_start, fwd[-1], y0, fwd)
        F_b = _integrate(g, mu, far, bwd[0], float(g.lam) / mu * far, bwd[::-1])[::-1]
        F_ivp = np.concatenate([F_f, F_b])
    F = profile.F(x)
    detail = {"phi_start": phi_start, "phi_end": phi_end, "F_end": float(F_ivp[-1])}
    if split is not None and split < phi_end:
        detail["phi_split"] = split
    # relative to |F|; near b1 where F -> 0 the scale is floored by (b1 - phi)
    scale = np.abs(F)
    return _report("ode_integration", F_ivp - F, scale,
                   TOLERANCES["ode_integration"] if tol is None else tol, measure="rel",
                   detail=detail)


def fik_geometry(d: int, k: int) -> Geometry:
    """``P^d`` with ``L = O(-k)``, ``n = 1`` and ``omega_M = (d+1-k) omega_FS``."""
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise InvalidGeometryError("d must be an integer >= 1")
    if isinstance(k, bool) or int(k) != k or not 0 < k < d + 1:
        raise InvalidGeometryError("need 0 < k < d+1 for the shrinking regime")
    c = d + 1 - k
    return Geometry(int(d), 1, Fraction(d + 1, c), Fraction(k, c))


def fik_transform_residual(d: int, k: int, mu: float | None = None, phi_tilde_grid=None,
                           scale: float | None = None,
                           tol: float | None = None) -> ResidualReport:
    """Residual of ``F~' + (d/phi~ - mu/k) F~ - ((d+1) - phi~)`` after the change of variables.

    ``phi~ = k phi + (d+1-k)`` and ``F~ = scale * F`` with ``scale = k^2``.
    """
    geom = fik_geometry(d, k)
    prof = solve(geom) if mu is None else solve(geom, mu=mu)
    c = d + 1 - k
    if phi_tilde_grid is None:
        phi_tilde_grid = np.linspace(c + 0.01, 50.0, 1000)
    pt = np.asarray(phi_tilde_grid, dtype=float)
    if np.any(pt <= c):
        raise InvalidGeometryError(f"phi~ must exceed d+1-k = {c}")
    scale = float(k * k) if scale is None else float(scale)
    phi = (pt - c) / k
    F, dF = prof.F_and_dF(phi)
    Ft = scale * F
    dFt = scale * dF / k
    m = prof.mu
    res = dFt + (d / pt - m / k) * Ft - ((d + 1) - pt)
    terms = np.abs(dFt) + np.abs(d / pt * Ft) + np.abs(m / k * Ft) + np.abs(d + 1 - pt)
    return _report("fik_transform", res, terms, TOLERANCES["fik_transform"] if tol is None else tol,
                   detail={"d": d, "k": k, "mu": m})


def cigar_reference(mu: float, C: float, r):
    """``phi(r) = -(1/mu) log(1 + C e^r)`` and ``phi_r``, the cigar with ``mu nu = 1``."""
    if not mu < 0:
        raise InvalidGeometryError("the cigar needs mu < 0")
    if not C > 0:
        raise InvalidGeometryError("C must be positive")
    r = np.asarray(r, dtype=float)
    z = math.log(C) + r
    phi = -np.logaddexp(0.0, z) / mu
    # C e^r / (1 + C e^r) without overflow
    frac = np.exp(-np.logaddexp(0.0, -z))
    return phi, -frac / mu


def cigar_residual(grid: ProfileGrid, tol: float | None = None) -> ResidualReport:
    """Compare a ``d = 0, n = 1`` steady grid with the cigar, ``C`` fixed by ``r(anchor) = 0``."""
    prof = grid.profile
    g = prof.geom
    if not (g.d == 0 and g.n == 1 and prof.case is SolitonCase.STEADY):
        raise InvalidGeometryError("the cigar oracle needs d = 0, n = 1, steady")
    mu = prof.mu
    C = math.expm1(-mu * grid.anchor_phi)
    phi, _ = cigar_reference(mu, C, grid.r)
    return _report("cigar", grid.phi - phi, grid.phi, TOLERANCES["cigar"] if tol is None else tol,
                   measure="rel", detail={"C": C})


def closing_reports(profile: SolitonProfile) -> list[ResidualReport]:
    from .profile import closing_residuals

    f_b1, df_b1 = closing_residuals(profile)
    return [
        ResidualReport("closing_F", abs(f_b1), abs(f_b1), 1, TOLERANCES["closing_F"]),
        ResidualReport("closing_dF", abs(df_b1), abs(df_b1), 1, TOLERANCES["closing_dF"]),
    ]


def root_scan_report(profile: SolitonProfile, phi_max: float = 1e3) -> ResidualReport:
    """Zero unexpected roots passes; the compact root at ``b1`` is expected."""
    roots = root_scan_f(profile, phi_max)
    extra = list(roots)
    if profile.case.is_compact:
        b1 = profile.b1_float
        extra = [x for x in roots if abs(x - b1) > 1e-8 * b1]
    return ResidualReport("root_scan", float(len(extra)), float(len(extra)), 1, 0.0,
                          detail={"roots": [float(x) for x in roots]})


def _identity_samples(geom: Geometry, mu: float) -> tuple[Fraction, list[Fraction]]:
    # the identity holds for every mu, so a nearby rational keeps it exact
    m = Fraction(mu).limit_denominator(10**12)
    return m, [Fraction(k, 7) for k in range(1, 8)]


def run_suite(profile: SolitonProfile, grid: ProfileGrid | None = None,
              include_oracle: bool = True,
              tolerances: dict | None = None) -> list[ResidualReport]:
    """Every applicable residual check for one solved profile.

    ``tolerances`` overrides entries of :data:`TOLERANCES` by check name.
    """
    tol = dict(TOLERANCES)
    if tolerances:
        unknown = set(tolerances) - set(tol)
        if unknown:
            raise InvalidGeometryError(f"unknown tolerance names: {sorted(unknown)}")
        tol.update(tolerances)
    if grid is None:
        grid = build_grid(profile)
    out = [ode_residual(profile, tol=tol["ode_residual"])]
    if include_oracle:
        out.append(ode_integration_oracle(profile, tol=tol["ode_integration"]))
    out.append(q_reduction_residual(grid, tol=tol["q_reduction"]))
    m, xs = _identity_samples(profile.geom, profile.mu)
    out.append(finite_sum_identity_residual(profile.geom, m, xs))
    out.append(root_scan_report(profile))
    if profile.case.is_compact:
        f, df = closing_reports(profile)
        out.append(ResidualReport(f.name, f.max_abs, f.max_rel, 1, tol["closing_F"]))
        out.append(ResidualReport(df.name, df.max_abs, df.max_rel, 1, tol["closing_dF"]))
    g = profile.geom
    if g.d == 0 and g.n == 1 and profile.case is SolitonCase.STEADY:
        out.append(cigar_residual(grid, tol=tol["cigar"]))
    return out


@dataclass(frozen=True)
class MatrixCase:
    label: str
    geom: Geometry
    compact: bool = False
    mu: float | None = None

    def solve(self) -> SolitonProfile:
        return solve(self.geom, compact=self.compact, mu=self.mu)


MATRIX_MU = (-0.5, -1.0, -2.0)


def regression_matrix(dims=(1, 2, 3), ranks=(1, 2, 3),
                      twists=(Fraction(0), Fraction(1, 2), Fraction(1)),
                      family_mu=MATRIX_MU) -> Iterator[MatrixCase]:
    """Fixed regression geometries.

    ``tau`` is chosen so that ``lam`` is +1 (shrinking, plus compact when
    ``eps > 0``), 0 (steady) or -1 (expanding); the families run over
    ``family_mu``.  Compact with ``eps = 0`` is skipped: there ``T(0) = 0``
    and no positive closing root exists.
    """
    for d in dims:
        for n in ranks:
            for eps in twists:
                tag = f"d={d},n={n},eps={eps}"
                yield MatrixCase(f"{tag},shrinking", Geometry(d, n, n * eps + 1, eps))
                if eps > 0:
                    yield MatrixCase(f"{tag},compact", Geometry(d, n, n * eps + 1, eps), True)
                for mu in family_mu:
                    yield MatrixCase(f"{tag},steady,mu={mu}", Geometry(d, n, n * eps, eps),
                                     mu=mu)
                for mu in family_mu:
                    yield MatrixCase(f"{tag},expanding,mu={mu}", Geometry(d, n, n * eps - 1, eps),
                                     mu=mu)
