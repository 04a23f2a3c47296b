"""Metric reconstruction from a solved profile.

The radial coordinate is ``r(phi) = int du / F(u)`` and the potential satisfies
``dP = u du / F(u)``.  Both integrands are split into explicit logarithmic
singular parts and a bounded remainder

    R(u) = 1/F(u) - 1/u - 1/(b1 - u)      (last term only when compact)

which is what the quadrature actually sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGeometryError, OutOfRangeError, PositivityError
from .profile import SolitonCase, SolitonProfile
from .quadrature import gk15, integrate_intervals

TOL_QUAD = 1e-13
TOL_INV = 1e-12
_ASYMPTOTIC_SPAN = 1e6


def _remainder(profile: SolitonProfile):
    if profile.case.is_compact:
        return lambda u: profile.closing_remainder(u) - 1.0 / u
    return lambda u: 1.0 / profile.F(u) - 1.0 / u


def _singular_r(profile: SolitonProfile, phi, anchor):
    out = np.log(phi / anchor)
    b1 = profile.b1_float
    if b1 is not None:
        out = out - np.log((b1 - phi) / (b1 - anchor))
    return out


def _singular_p(profile: SolitonProfile, phi, anchor):
    b1 = profile.b1_float
    if b1 is None:
        return phi - anchor
    return -b1 * np.log((b1 - phi) / (b1 - anchor))


def default_anchor(profile: SolitonProfile) -> float:
    return profile.b1_float / 2 if profile.case.is_compact else 1.0


def grid_nodes(profile: SolitonProfile, phi_min: float, phi_max: float, count: int) -> np.ndarray:
    """Log-spaced in ``phi``; for compact profiles the upper half is log-spaced in ``b1 - phi``."""
    b1 = profile.b1_float
    if b1 is None or phi_max <= b1 / 2 or count < 4:
        return np.geomspace(phi_min, phi_max, count)
    k1 = count // 2
    low = np.geomspace(phi_min, b1 / 2, k1)
    high = b1 - np.geomspace(b1 / 2, b1 - phi_max, count - k1 + 1)[1:]
    return np.concatenate([low, high])


@dataclass(frozen=True, eq=False)
class ProfileGrid:
    """Monotone table of ``(phi, F, r, s, P)`` with ``r = P = 0`` at the anchor."""

    profile: SolitonProfile
    anchor_phi: float
    phi: np.ndarray
    F: np.ndarray
    r: np.ndarray
    s: np.ndarray
    P: np.ndarray
    quad_error: np.ndarray
    _int_r: np.ndarray = field(repr=False)
    _int_p: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.phi)

    @property
    def phi_min(self) -> float:
        return float(self.phi[0])

    @property
    def phi_max(self) -> float:
        return float(self.phi[-1])

    def _locate(self, phi):
        x = np.atleast_1d(np.asarray(phi, dtype=float))
        if np.any(x < self.phi[0]) or np.any(x > self.phi[-1]):
            raise OutOfRangeError(f"phi outside grid range [{self.phi[0]}, {self.phi[-1]}]")
        i = np.clip(np.searchsorted(self.phi, x, side="right") - 1, 0, len(self.phi) - 1)
        return x, i

    def r_at(self, phi):
        """``r(phi)`` anywhere inside the grid, integrating from the nearest row below."""
        x, i = self._locate(phi)
        R = _remainder(self.profile)
        local, _ = gk15(R, self.phi[i], x)
        out = _singular_r(self.profile, x, self.anchor_phi) + self._int_r[i] + local
        return float(out[0]) if np.ndim(phi) == 0 else out

    def P_at(self, phi):
        x, i = self._locate(phi)
        R = _remainder(self.profile)
        local, _ = gk15(lambda u: u * R(u), self.phi[i], x)
        out = _singular_p(self.profile, x, self.anchor_phi) + self._int_p[i] + local
        return float(out[0]) if np.ndim(phi) == 0 else out

    def rows(self):
        return zip(self.phi, self.F, self.r, self.s, self.P)


def build_grid(profile: SolitonProfile, phi_min: float = 1e-6, phi_max: float | None = None,
               count: int = 2048, anchor_phi: float | None = None) -> ProfileGrid:
    b1 = profile.b1_float
    if phi_max is None:
        phi_max = b1 * (1 - 1e-9) if b1 is not None else 1e3
    if anchor_phi is None:
        anchor_phi = default_anchor(profile)
    if count < 2:
        raise InvalidGeometryError("grid needs at least two rows")
    if not 0 < phi_min < anchor_phi < phi_max:
        raise InvalidGeometryError(
            f"need 0 < phi_min < anchor_phi < phi_max, got {phi_min}, {anchor_phi}, {phi_max}")
    if b1 is not None and not phi_max < b1:
        raise InvalidGeometryError(f"compact grid needs phi_max < b1 = {b1}")

    phi = grid_nodes(profile, phi_min, phi_max, count)
    F = profile.F(phi)
    if not np.all((F > 0) & np.isfinite(F)):
        bad = phi[~((F > 0) & np.isfinite(F))][0]
        raise PositivityError(f"profile not positive: F({bad:.6g}) = {profile.F(bad):.3e}")

    R = _remainder(profile)
    edges = np.unique(np.concatenate([phi, [anchor_phi]]))
    ir, er = integrate_intervals(R, edges[:-1], edges[1:], atol=1e-16, rtol=1e-12)
    ip, ep = integrate_intervals(lambda u: u * R(u), edges[:-1], edges[1:], atol=1e-16,
                                 rtol=1e-12)
    k = int(np.searchsorted(edges, anchor_phi))
    cum_r = np.concatenate([[0.0], np.cumsum(ir)])
    cum_p = np.concatenate([[0.0], np.cumsum(ip)])
    cum_e = np.concatenate([[0.0], np.cumsum(er + ep)])
    cum_r -= cum_r[k]
    cum_p -= cum_p[k]
    cum_e = np.abs(cum_e - cum_e[k])
    rows = np.searchsorted(edges, phi)
    int_r, int_p = cum_r[rows], cum_p[rows]
    r = _singular_r(profile, phi, anchor_phi) + int_r
    P = _singular_p(profile, phi, anchor_phi) + int_p
    err = cum_e[rows]
    if np.any(np.diff(r) <= 0):
        raise PositivityError("r(phi) is not strictly increasing")
    with np.errstate(over="ignore"):
        s = np.exp(r)
    return ProfileGrid(profile, float(anchor_phi), phi, F, r, s, P, err, int_r, int_p)


def _inverse_on_grid(grid: ProfileGrid, r):
    """Monotone inverse of ``r(phi)`` for ``r`` inside the grid range.

    Bracket from the table, then safeguarded Newton steps ``dphi = (r - r(phi)) F(phi)``.
    """
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    i = np.clip(np.searchsorted(grid.r, rr, side="right") - 1, 0, len(grid.r) - 2)
    lo, hi = grid.phi[i].copy(), grid.phi[i + 1].copy()
    t = (rr - grid.r[i]) / (grid.r[i + 1] - grid.r[i])
    x = np.exp(np.log(lo) + t * (np.log(hi) - np.log(lo)))
    x = np.clip(x, lo, hi)
    active = np.arange(rr.size)
    for _ in range(60):
        xa, ra = x[active], rr[active]
        res = grid.r_at(xa) - ra
        la = np.where(res < 0, xa, lo[active])
        ha = np.where(res > 0, xa, hi[active])
        lo[active], hi[active] = la, ha
        done = (np.abs(res) <= TOL_INV * 0.01 * (1 + np.abs(ra))) | (ha - la <= 4e-16 * xa)
        step = xa - res * grid.profile.F(xa)
        nxt = np.where((step > la) & (step < ha), step, 0.5 * (la + ha))
        x[active] = np.where(done, xa, nxt)
        active = active[~done]
        if active.size == 0:
            break
    return x


def phi_of_r(grid: ProfileGrid, r):
    """``phi`` with ``r(phi) = r``; raises :class:`OutOfRangeError` outside the grid."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr < grid.r[0]) or np.any(rr > grid.r[-1]):
        raise OutOfRangeError(f"r outside grid range [{grid.r[0]}, {grid.r[-1]}]")
    out = _inverse_on_grid(grid, rr)
    return float(out[0]) if rr.ndim == 0 else out


class ExtendedPhi(NamedTuple):
    phi: float
    extrapolated: bool


def phi_of_r_extended(grid: ProfileGrid, r: float, asym=None) -> ExtendedPhi:
    """Like :func:`phi_of_r`, extending past the grid with the leading asymptotic term."""
    r = float(r)
    if grid.r[0] <= r <= grid.r[-1]:
        return ExtendedPhi(phi_of_r(grid, r), False)
    if r < grid.r[0]:
        # F ~ phi at the zero section, so phi ~ C e^r
        return ExtendedPhi(grid.phi_min * math.exp(r - grid.r[0]), True)
    prof = grid.profile
    if prof.case.is_compact:
        cd = asym if isinstance(asym, ClosingData) else closing_data(grid)
        return ExtendedPhi(cd.b1 - cd.C0 * math.exp(-r), True)
    ad = asym if isinstance(asym, AsymptoticData) else asymptotic_data(grid)
    if prof.case is SolitonCase.STEADY:
        return ExtendedPhi(ad.r_inverse(r), True)
    return ExtendedPhi(ad.D0 * math.exp(ad.p * r), True)


@dataclass(frozen=True)
class MetricEigenvalues:
    """Eigenvalues of the metric relative to ``omega_M`` and the fiber coordinates.

    ``positive`` is decided on the factors ``1 + eps phi``, ``phi`` and ``F``:
    the common factor ``e^-r`` can underflow far out on steady ends.
    """

    horizontal: float
    fiber_tangential: float
    fiber_radial: float
    multiplicities: tuple[int, int, int]
    positive: bool



def _eigen_arrays(profile, phi, F, r):
    with np.errstate(under="ignore"):
        inv_s = np.exp(-r)
    return 1.0 + float(profile.geom.eps) * phi, phi * inv_s, F * inv_s


def metric_eigenvalues(grid: ProfileGrid, phi: float) -> MetricEigenvalues:
    g = grid.profile.geom
    r = grid.r_at(phi)
    F = grid.profile.F(phi)
    hor, tan, rad = _eigen_arrays(grid.profile, phi, F, r)
    return MetricEigenvalues(float(hor), float(tan), float(rad), (g.d, g.n - 1, 1),
                             bool(hor > 0 and phi > 0 and F > 0))


def grid_positive(grid: ProfileGrid) -> bool:
    """Positivity of every eigenvalue family on every row (see :class:`MetricEigenvalues`)."""
    eps = float(grid.profile.geom.eps)
    return bool(np.all(1 + eps * grid.phi > 0) and np.all(grid.phi > 0) and np.all(grid.F > 0))


def grid_eigenvalues(grid: ProfileGrid):
    """Eigenvalue columns for every row of the grid."""
    return _eigen_arrays(grid.profile, grid.phi, grid.F, grid.r)


def _log_integral(f, a: float, b: float, pieces: int = 64) -> tuple[float, float]:
    """``int_a^b f(u) du`` in the variable ``log u``."""
    edges = np.linspace(math.log(a), math.log(b), pieces + 1)
    val, err = integrate_intervals(lambda y: f(np.exp(y)) * np.exp(y), edges[:-1], edges[1:],
                                   atol=1e-17, rtol=1e-14)
    return float(val.sum()), float(err.sum())


def _tail_integral(f, a: float) -> tuple[float, float]:
    """``int_a^inf f`` for an integrand decaying like ``1/u^2``."""
    top = a * _ASYMPTOTIC_SPAN
    val, err = _log_integral(f, a, top)
    tail = top * float(f(np.array([top]))[0])
    return val + tail, err + abs(tail) * 1e-6


@dataclass(frozen=True)
class AsymptoticData:
    """Large-``phi`` data: ``(p, D0, G_infinity)`` or, for steady profiles, ``(c1, c2)``.

    For shrinking and expanding profiles ``phi(r) ~ D0 * exp(p r)``.  For steady
    ones ``phi(r) ~ R^-1(r - r_offset)`` with
    ``R(u) = u/c1 + (c2/c1^2) log(c1 u - c2)``.  The ``*_tail`` and
    ``tail_fit_error`` fields are grid-tail cross-checks.
    """

    case: SolitonCase
    p: float | None = None
    D0: float | None = None
    G_infinity: float | None = None
    c1: float | None = None
    c2: float | None = None
    r_offset: float | None = None
    p_tail: float | None = None
    D0_tail: float | None = None
    tail_fit_error: float | None = None
    quad_error: float = 0.0

    def R(self, u):
        return u / self.c1 + self.c2 / self.c1**2 * np.log(self.c1 * u - self.c2)

    def r_inverse(self, r):
        """``R^-1(r - r_offset)``, by Newton on the increasing branch ``u > c2/c1``."""
        y = np.asarray(r, dtype=float) - self.r_offset
        floor = self.c2 / self.c1
        u = np.maximum(self.c1 * y, 2 * floor + 1.0)
        for _ in range(100):
            f = self.R(u) - y
            du = f / (1.0 / (self.c1 - self.c2 / u))
            u_new = u - du
            u = np.where(u_new > floor, u_new, 0.5 * (u + floor))
            if np.all(np.abs(du) <= 1e-15 * np.abs(u)):
                break
        return float(u) if np.ndim(u) == 0 else u

    def to_dict(self) -> dict:
        out = {}
        for key in ("p", "D0", "G_infinity", "c1", "c2", "r_offset", "p_tail", "D0_tail",
                    "tail_fit_error"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        return out


def _tail_rows(grid: ProfileGrid, decades: float = 1.0):
    return grid.phi >= grid.phi_max / 10**decades


def asymptotic_data(grid: ProfileGrid) -> AsymptoticData:
    prof = grid.profile
    if prof.case.is_compact:
        raise InvalidGeometryError("asymptotic data is for noncompact profiles; use closing_data")
    g = prof.geom
    mu = prof.mu
    a = grid.anchor_phi
    tail = _tail_rows(grid)
    if prof.case is SolitonCase.STEADY:
        n = g.n
        d_eff = g.d if g.eps > 0 else 0
        c1 = -n / mu
        c2 = n * (d_eff + n - 1) / mu**2
        start = max(a, 2 * c2 / c1 + 1.0)
        if start > grid.phi_max:
            raise OutOfRangeError(f"grid must extend past phi = {start} for steady asymptotics")
        G, err = _tail_integral(lambda u: 1.0 / prof.F(u) - 1.0 / (c1 - c2 / u), start)
        probe = AsymptoticData(prof.case, c1=c1, c2=c2, r_offset=0.0)
        offset = grid.r_at(start) - float(probe.R(start)) + G
        ad = AsymptoticData(prof.case, c1=c1, c2=c2, r_offset=offset, quad_error=err)
        fit = np.abs(grid.phi[tail] - ad.r_inverse(grid.r[tail])) / grid.phi[tail]
        return AsymptoticData(prof.case, c1=c1, c2=c2, r_offset=offset,
                              tail_fit_error=float(fit.max()), quad_error=err)

    p = float(g.lam) / mu
    G, err = _tail_integral(lambda u: 1.0 / prof.F(u) - 1.0 / (p * u), a)
    D0 = a * math.exp(-p * G)
    slope = np.polyfit(grid.r[tail], np.log(grid.phi[tail]), 1)[0]
    D0_tail = float(grid.phi[-1] * math.exp(-p * grid.r[-1]))
    return AsymptoticData(prof.case, p=p, D0=D0, G_infinity=G, p_tail=float(slope),
                          D0_tail=D0_tail, tail_fit_error=abs(D0_tail / D0 - 1.0),
                          quad_error=err)


@dataclass(frozen=True)
class ClosingData:
    """Behaviour at the infinity divisor: ``b1 - phi ~ C0 exp(-r)``.

    ``boundary_eigenvalues`` are ``(1 + eps b1, b1, C0)``: horizontal,
    fiber-tangential and fiber-radial factors of the metric on the divisor.
    """

    b1: float
    C0: float
    boundary_eigenvalues: tuple[float, float, float]
    F_b1: float
    dF_b1_plus_one: float
    tail_constancy: float
    quadratic_remainder: float
    quad_error: float = 0.0

    @property
    def positive(self) -> bool:
        return all(v > 0 for v in self.boundary_eigenvalues)

    def to_dict(self) -> dict:
        return {"b1": self.b1, "C0": self.C0,
                "boundary_eigenvalues": list(self.boundary_eigenvalues),
                "positive": self.positive, "F_b1": self.F_b1,
                "dF_b1_plus_one": self.dF_b1_plus_one,
                "tail_constancy": self.tail_constancy,
                "quadratic_remainder": self.quadratic_remainder}


def closing_data(grid: ProfileGrid) -> ClosingData:
    prof = grid.profile
    if not prof.case.is_compact:
        raise InvalidGeometryError("closing data needs a compact profile")
    b1 = prof.b1_float
    a = grid.anchor_phi
    R = _remainder(prof)
    edges = np.linspace(a, b1, 17)
    val, err = integrate_intervals(R, edges[:-1], edges[1:], atol=1e-17, rtol=1e-14)
    log_c0 = math.log(b1 / a) + math.log(b1 - a) + float(val.sum())
    C0 = math.exp(log_c0)
    eps = float(prof.geom.eps)

    from .profile import closing_residuals

    f_b1, df_b1 = closing_residuals(prof)
    gap = b1 - grid.phi
    last_two = gap <= gap[-1] * 100
    const = gap[last_two] * grid.s[last_two]
    tail_constancy = float(np.max(np.abs(const / C0 - 1.0)))
    last_one = gap <= gap[-1] * 10
    quad = np.abs(grid.F[last_one] - gap[last_one]) / gap[last_one] ** 2
    return ClosingData(b1, C0, (1 + eps * b1, b1, C0), f_b1, df_b1, tail_constancy,
                       float(quad.max()), float(err.sum()))


class PullbackSample(NamedTuple):
    phi: float
    F: float
    extrapolated: bool


def flow_pullback_sample(grid: ProfileGrid, t: float, s: float, asym=None) -> PullbackSample:
    """Sample ``(1 - lam t) sigma(t~)^* (phi, F)`` at fiber norm ``s``.

    ``t~ = -log(1 - lam t)/lam`` and ``sigma(t~)`` scales ``s`` by ``exp(mu t~)``.
    """
    prof = grid.profile
    lam = float(prof.geom.lam)
    if lam == 0:
        raise InvalidGeometryError("the pullback rescaling needs λ != 0")
    if not s > 0:
        raise InvalidGeometryError("s must be positive")
    scale = 1.0 - lam * t
    if scale <= 0:
        raise InvalidGeometryError(f"t must satisfy 1 - λ t > 0 (t = {t}, λ = {lam})")
    t_tilde = -math.log(scale) / lam
    phi, extrap = phi_of_r_extended(grid, math.log(s) + prof.mu * t_tilde, asym)
    if extrap and not prof.case.is_compact:
        ad = asym if isinstance(asym, AsymptoticData) else asymptotic_data(grid)
        F = ad.p * phi if ad.p is not None else ad.c1
    else:
        F = prof.F(min(phi, prof.b1_float) if prof.case.is_compact else phi)
    return PullbackSample(scale * phi, scale * F, extrap)


def completeness_diagnostics(profile: SolitonProfile, phi_max: float = 1e6,
                             anchor: float = 1.0) -> dict:
    """Finite-range checks that the noncompact end is at infinite distance.

    ``slope_error`` compares ``dr/dlog(phi)`` with ``1/p`` (or ``dr/dphi`` with
    ``1/c1`` when steady) at ``phi_max``; ``length_increments`` are successive
    increments of ``int F^(-1/2) dphi`` over doubled upper limits.
    """
    if profile.case.is_compact:
        raise InvalidGeometryError("completeness at infinity is for noncompact profiles")
    g = profile.geom
    F_top = profile.F(phi_max)
    if profile.case is SolitonCase.STEADY:
        target = -profile.mu / g.n
        slope = 1.0 / F_top
    else:
        target = profile.mu / float(g.lam)
        slope = phi_max / F_top
    tops = phi_max * 2.0 ** np.arange(-3, 1)
    lengths = []
    prev = anchor
    acc = 0.0
    for top in tops:
        v, _ = _log_integral(lambda u: profile.F(u) ** -0.5, prev, top, pieces=16)
        acc += v
        lengths.append(acc)
        prev = top
    incr = np.diff(lengths)
    return {"slope_error": abs(slope / target - 1.0),
            "length_increments": [float(v) for v in incr],
            "length_diverges": bool(np.all(incr > 0) and np.all(np.diff(incr) > 0))}
