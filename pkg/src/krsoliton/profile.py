"""Soliton profiles: case selection, the zero-section relation nu(mu), the
closed-form momentum profile F(phi), and the two scalar root solves for mu.

``F(phi)`` is evaluated through ``g(phi) = (1+eps*phi)^d * phi^(n-1) * F(phi)``,
which satisfies ``g' - mu*g = -h``.  Three evaluation branches are used:

* near ``phi = 0``: the Taylor series of ``g`` with ``g(0) = 0`` imposed,
* in the bulk: ``g = nu*exp(mu*phi) + sum_k h^(k)(phi) / mu^(k+1)``,
* near ``b1`` (compact case only): the Taylor series of ``g`` about ``b1`` with
  ``g(b1) = 0`` imposed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.optimize import brentq

from .errors import ClosingError, InvalidGeometryError, SolverFailure
from .exact_poly import (
    Geometry,
    RationalPoly,
    as_rational,
    build_h,
    derivative_table,
    derivatives_at,
)

TOL_ROOT = 1e-12
TOL_SERIES = 1e-16
TOL_BRANCH = 1e-9
TOL_CLOSING_F = 1e-10
TOL_CLOSING_DF = 1e-8

_BRACKET_LIMIT = 2.0**60
_MAX_SERIES_TERMS = 400


class SolitonCase(str, Enum):
    SHRINKING_NONCOMPACT = "shrinking_noncompact"
    STEADY = "steady"
    EXPANDING = "expanding"
    COMPACT_SHRINKING = "compact_shrinking"

    @property
    def is_shrinking(self) -> bool:
        return self in (SolitonCase.SHRINKING_NONCOMPACT, SolitonCase.COMPACT_SHRINKING)

    @property
    def is_compact(self) -> bool:
        return self is SolitonCase.COMPACT_SHRINKING


def classify(geom: Geometry, compact: bool = False) -> SolitonCase:
    if compact:
        if geom.lam <= 0:
            raise InvalidGeometryError(f"compact shrinker requires λ>0 (λ = {geom.lam})")
        return SolitonCase.COMPACT_SHRINKING
    if geom.lam > 0:
        return SolitonCase.SHRINKING_NONCOMPACT
    if geom.lam == 0:
        return SolitonCase.STEADY
    return SolitonCase.EXPANDING


@lru_cache(maxsize=256)
def h_table(geom: Geometry) -> tuple[RationalPoly, ...]:
    """Derivative table of ``h``, padded with zero polynomials up to order ``d+n``."""
    table = list(derivative_table(build_h(geom)))
    while len(table) < geom.degree + 1:
        table.append(RationalPoly())
    return tuple(table[: geom.degree + 1])


@lru_cache(maxsize=256)
def _h_at_zero(geom: Geometry) -> tuple[Fraction, ...]:
    return derivatives_at(h_table(geom), 0)


def b1_of(geom: Geometry) -> Fraction:
    """Closing value ``(n+1)/lambda`` of the compact shrinker."""
    if geom.lam <= 0:
        raise InvalidGeometryError(f"b1 requires λ>0 (λ = {geom.lam})")
    return Fraction(geom.n + 1) / geom.lam


def _check_mu(mu) -> Fraction:
    if isinstance(mu, Fraction):
        m = mu
    else:
        x = float(mu)
        if not math.isfinite(x):
            raise InvalidGeometryError(f"mu must be finite, got {mu!r}")
        m = as_rational(mu if isinstance(mu, (int, str)) else x)
    if m == 0:
        raise InvalidGeometryError("mu must be nonzero")
    return m


def nu_exact(geom: Geometry, mu) -> Fraction:
    """``-sum_{k=n-1}^{d+n} h^(k)(0) / mu^(k+1)`` in exact arithmetic.

    A float ``mu`` enters at its exact binary value, so the only rounding in
    :func:`nu_from_mu` is the final conversion.
    """
    m = _check_mu(mu)
    hk0 = _h_at_zero(geom)
    total = Fraction(0)
    for k in range(geom.degree, geom.n - 2, -1):
        if hk0[k]:
            total += hk0[k] / m ** (k + 1)
    return -total


def nu_from_mu(geom: Geometry, mu) -> float:
    return float(nu_exact(geom, mu))


@dataclass(frozen=True)
class CkTable:
    """``C_k`` for ``k = n-1, ..., d+n``; ``values[i]`` is ``C_{n-1+i}``."""

    k_start: int
    values: tuple[Fraction, ...]

    def __getitem__(self, k: int) -> Fraction:
        i = k - self.k_start
        if not 0 <= i < len(self.values):
            raise IndexError(k)
        return self.values[i]

    def sign_changes(self) -> int:
        """Count transitions between a nonnegative entry and a negative one."""
        neg = [v < 0 for v in self.values]
        return sum(1 for a, b in zip(neg, neg[1:]) if a != b)


def ck_coefficients(geom: Geometry) -> CkTable:
    d, n, tau, eps = geom.d, geom.n, geom.tau, geom.eps
    vals = []
    for k in range(n - 1, d + n + 1):
        pre = Fraction(factorial(k) * factorial(d),
                       factorial(k - n + 1) * factorial(d + n - k))
        vals.append(pre * (n * eps * (d + 1) - tau * (k - n + 1)))
    return CkTable(n - 1, tuple(vals))


def nu_from_ck(geom: Geometry, mu) -> Fraction:
    """``sum_k C_k eps^(k-n) / mu^(k+1)``; only defined for ``eps > 0``."""
    if geom.eps <= 0:
        raise InvalidGeometryError("the C_k form of nu needs eps > 0")
    m = _check_mu(mu)
    ck = ck_coefficients(geom)
    return sum((ck[k] * geom.eps ** (k - geom.n) / m ** (k + 1)
                for k in range(geom.n - 1, geom.degree + 1)), Fraction(0))


def n_poly_coefficients(geom: Geometry) -> tuple[Fraction, ...]:
    """Coefficients (lowest power first) of ``N(mu) = nu(mu) * mu^(d+n+1)``."""
    hk0 = _h_at_zero(geom)
    D = geom.degree
    return tuple(-hk0[D - j] for j in range(D - geom.n + 2))


def _horner(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class SolitonProfile:
    geom: Geometry
    case: SolitonCase
    mu: float
    nu: float
    b1: Fraction | None = None
    extra_roots: tuple[float, ...] = ()
    _c: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g, case, mu = self.geom, self.case, float(self.mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", float(self.nu))
        if mu == 0 or not math.isfinite(mu):
            raise InvalidGeometryError("mu must be finite and nonzero")
        if classify(g, case.is_compact) is not case:
            raise InvalidGeometryError(f"case {case.value} does not match λ = {g.lam}")
        if case.is_shrinking and mu <= 0:
            raise InvalidGeometryError("shrinking profiles need mu > 0")
        if not case.is_shrinking and mu >= 0:
            raise InvalidGeometryError(f"{case.value} profiles need mu < 0")
        if case.is_compact:
            object.__setattr__(self, "b1", b1_of(g))
        elif self.b1 is not None:
            raise InvalidGeometryError("b1 is only meaningful for compact profiles")
        object.__setattr__(self, "_c", self._build_cache())

    # -- construction of the float caches ------------------------------------

    def _build_cache(self) -> dict:
        g, mu = self.geom, self.mu
        m = Fraction(mu)
        D = g.degree
        table = h_table(g)
        c: dict = {}

        q = [Fraction(0)] * (D + 1)
        for k, hk in enumerate(table):
            w = 1 / m ** (k + 1)
            for j, a in enumerate(hk.coefficients):
                q[j] += a * w
        c["q"] = [float(v) for v in q]
        c["dq"] = [float(j * v) for j, v in enumerate(q)][1:]

        switch = 0.5 / max(1.0, abs(mu))
        if self.case.is_compact:
            switch = min(switch, float(self.b1) / 4)
        c["switch"] = switch

        hk0 = _h_at_zero(g)
        zero_coeffs = self._series(hk0, m, start=g.n, tail=Fraction(self.nu),
                                   x_max=2 * switch)
        # F near 0 is sum_l a_l phi^(l-n+1) / (1+eps phi)^d
        c["zero"] = zero_coeffs
        if self.case.is_compact:
            hb = derivatives_at(table, self.b1)
            tail = -sum((hb[k] / m ** (k + 1) for k in range(D + 1)), Fraction(0))
            c["b1"] = float(self.b1)
            c["hb"] = hb
            c["closing"] = self._series(hb, m, start=1, tail=tail, x_max=2 * switch)
            # w(b1 + y) with w = (1+eps x)^d x^(n-1); w(b1) cancels the leading
            # closing coefficient exactly because lam b1 - n = 1
            w = (RationalPoly((Fraction(1), g.eps)) ** g.d) * RationalPoly.monomial(g.n - 1)
            c["closing_w"] = np.array(w.shift(self.b1).to_floats())
        return c

    def _series(self, hk, m: Fraction, start: int, tail: Fraction, x_max: float):
        """Taylor coefficients ``a_l`` (l >= start) of ``-int_0^x hc(y) e^(mu(x-y)) dy``.

        ``hk[k]`` are the derivatives of ``h`` at the expansion point.  For
        ``l <= D`` the coefficient is the finite sum
        ``-sum_{k<l} hk[k] mu^(l-k-1) / l!``; beyond that every coefficient is
        ``tail * mu^l / l!``.  The tail is truncated once a term at ``x_max``
        drops below ``TOL_SERIES`` times the partial sum there.
        """
        D = self.geom.degree
        mu = self.mu
        coeffs: list[float] = []
        for l in range(start, D + 1):
            s = Fraction(0)
            for k in range(min(l, D + 1)):
                if hk[k]:
                    s += hk[k] * m ** (l - k - 1)
            coeffs.append(float(-s / factorial(l)))
        partial = sum(a * x_max**i for i, a in enumerate(coeffs, start=start))
        if tail != 0:
            l = D + 1
            a = float(tail * m**l / factorial(l))
            while l < _MAX_SERIES_TERMS:
                term = a * x_max**l
                coeffs.append(a)
                partial += term
                if abs(term) <= TOL_SERIES * abs(partial):
                    break
                l += 1
                a *= mu / l
            else:
                raise SolverFailure("series tail failed to converge")
        return np.array(coeffs)

    # -- evaluation ------------------------------------------------------------

    @property
    def phi_switch(self) -> float:
        return self._c["switch"]

    @property
    def b1_float(self) -> float | None:
        return self._c.get("b1")

    def _check_phi(self, phi):
        x = np.asarray(phi, dtype=float)
        if np.any(~(x > 0)):
            raise InvalidGeometryError("F is only defined for phi > 0")
        if self.case.is_compact and np.any(x > self._c["b1"]):
            raise InvalidGeometryError(f"phi exceeds b1 = {self._c['b1']}")
        return x

    def _weight(self, x):
        """``(1+eps x)^d`` and ``d eps/(1+eps x) + (n-1)/x``."""
        g = self.geom
        eps = float(g.eps)
        one = 1.0 + eps * x
        return one**g.d, g.d * eps / one + (g.n - 1) / x

    def _zero_branch(self, x):
        a = self._c["zero"]
        n = self.geom.n
        # G / x^(n-1) = sum_j a[j] x^(j+1),  G' / x^(n-1) = sum_j (j+n) a[j] x^j
        val = np.zeros_like(x)
        der = np.zeros_like(x)
        for j in range(len(a) - 1, -1, -1):
            val = val * x + a[j]
            der = der * x + (j + n) * a[j]
        val = val * x
        wd, dlog = self._weight(x)
        F = val / wd
        return F, der / wd - F * dlog

    def _closing_branch(self, x):
        a = self._c["closing"]
        y = x - self._c["b1"]
        val = np.zeros_like(x)
        der = np.zeros_like(x)
        for j in range(len(a) - 1, -1, -1):
            val = val * y + a[j]
            der = der * y + (j + 1) * a[j]
        val = val * y
        wd, dlog = self._weight(x)
        w = wd * x ** (self.geom.n - 1)
        F = val / w
        return F, der / w - F * dlog

    def closing_remainder(self, phi):
        """``1/F(phi) - 1/(b1 - phi)`` for compact profiles, without cancellation near b1."""
        if not self.case.is_compact:
            raise InvalidGeometryError("closing_remainder needs a compact profile")
        x = self._check_phi(phi)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        b1 = self._c["b1"]
        out = np.empty_like(x)
        near = b1 - x <= self._c["switch"]
        far = ~near
        if np.any(far):
            out[far] = 1.0 / self.F(x[far]) - 1.0 / (b1 - x[far])
        if np.any(near):
            # F = y V(y) / w, so 1/F + 1/y = (w + V) / (y V) with (w + V)(0) = 0
            a = self._c["closing"]
            wc = self._c["closing_w"]
            m = max(len(a), len(wc))
            s = np.zeros(m)
            s[: len(a)] += a
            s[: len(wc)] += wc
            y = x[near] - b1
            out[near] = (np.polynomial.polynomial.polyval(y, s[1:])
                         / np.polynomial.polynomial.polyval(y, a))
        return float(out[0]) if scalar else out

    def _direct_branch(self, x):
        n = self.geom.n
        G = np.polynomial.polynomial.polyval(x, self._c["q"])
        dG = np.polynomial.polynomial.polyval(x, self._c["dq"]) if self._c["dq"] else np.zeros_like(x)
        if self.nu != 0.0:
            with np.errstate(over="ignore"):
                e = self.nu * np.exp(self.mu * x)
            G = G + e
            dG = dG + self.mu * e
        wd, dlog = self._weight(x)
        w = wd * x ** (n - 1)
        with np.errstate(invalid="ignore"):
            # an overflowed exponential leaves F = ±inf and dF = nan, rejected downstream
            F = G / w
            return F, dG / w - F * dlog

    def _evaluate(self, phi):
        x = self._check_phi(phi)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        F = np.empty_like(x)
        dF = np.empty_like(x)
        zero = x <= self._c["switch"]
        closing = np.zeros_like(zero)
        if self.case.is_compact:
            closing = (self._c["b1"] - x <= self._c["switch"]) & ~zero
        bulk = ~(zero | closing)
        for mask, branch in ((zero, self._zero_branch), (closing, self._closing_branch),
                             (bulk, self._direct_branch)):
            if np.any(mask):
                F[mask], dF[mask] = branch(x[mask])
        if scalar:
            return float(F[0]), float(dF[0])
        return F, dF

    def F(self, phi):
        """Momentum profile ``F(phi) = phi_r``; accepts scalars or arrays."""
        return self._evaluate(phi)[0]

    def dF(self, phi):
        """Exact derivative ``F'(phi)`` of the closed form."""
        return self._evaluate(phi)[1]

    def F_and_dF(self, phi):
        return self._evaluate(phi)

    def F_series(self, phi):
        """Zero-section Taylor branch, regardless of ``phi``."""
        x = self._check_phi(phi)
        out = self._zero_branch(np.atleast_1d(x))[0]
        return float(out[0]) if x.ndim == 0 else out

    def F_closed(self, phi):
        """Closed form ``(1+eps phi)^-d phi^(1-n) (nu e^(mu phi) + sum h^(k)/mu^(k+1))``."""
        x = self._check_phi(phi)
        out = self._direct_branch(np.atleast_1d(x))[0]
        return float(out[0]) if x.ndim == 0 else out

    def dF_closed(self, phi):
        x = self._check_phi(phi)
        out = self._direct_branch(np.atleast_1d(x))[1]
        return float(out[0]) if x.ndim == 0 else out

    def to_dict(self) -> dict:
        out = {"case": self.case.value, "mu": self.mu, "nu": self.nu,
               "lambda": float(self.geom.lam)}
        if self.case.is_compact:
            out["b1"] = float(self.b1)
        if self.extra_roots:
            out["extra_roots"] = list(self.extra_roots)
        return out


def f_eval(profile: SolitonProfile, phi):
    return profile.F(phi)


def make_profile(geom: Geometry, mu, compact: bool = False) -> SolitonProfile:
    """Profile for a caller-supplied ``mu``; ``nu`` is set by the zero-section relation.

    This is the entry point for the steady and expanding families, where ``mu < 0``
    is a free parameter.
    """
    case = classify(geom, compact)
    m = float(mu)
    return SolitonProfile(geom, case, m, nu_from_mu(geom, m))


def solve_mu_shrinking(geom: Geometry) -> SolitonProfile:
    """Unique ``mu > 0`` with ``nu(mu) = 0``, found on ``N(mu) = nu(mu) mu^(d+n+1)``."""
    if geom.lam <= 0:
        raise InvalidGeometryError(f"shrinking soliton requires λ>0 (λ = {geom.lam})")
    coeffs = [float(c) for c in n_poly_coefficients(geom)]
    N = lambda x: _horner(coeffs, x)  # noqa: E731

    lo = hi = 1.0
    n_lo = n_hi = N(1.0)
    if n_hi == 0:
        mu = 1.0
    else:
        if n_hi < 0:
            while n_hi < 0:
                hi *= 2.0
                if hi > _BRACKET_LIMIT:
                    raise SolverFailure(f"no sign change of N(mu) up to 2^60 for {geom}")
                n_hi = N(hi)
            lo = hi / 2.0
        else:
            while n_lo > 0:
                lo /= 2.0
                if lo < 1.0 / _BRACKET_LIMIT:
                    raise SolverFailure(f"no sign change of N(mu) down to 2^-60 for {geom}")
                n_lo = N(lo)
            hi = lo * 2.0
        mu = lo if N(lo) == 0 else brentq(N, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                          maxiter=500)
    scale = _horner([abs(c) for c in coeffs], mu)
    if abs(N(mu)) > TOL_ROOT * scale:
        raise SolverFailure(f"|N(mu*)| = {abs(N(mu)):.3e} exceeds tolerance")
    return SolitonProfile(geom, SolitonCase.SHRINKING_NONCOMPACT, mu, 0.0)


@lru_cache(maxsize=256)
def t_zero_exact(geom: Geometry) -> Fraction:
    """``T(0) = sum_k binom(d,k) eps^k b1^(k+n) k / ((k+n+1)(k+n))``."""
    b1 = b1_of(geom)
    n = geom.n
    return sum((comb(geom.d, k) * geom.eps**k * b1 ** (k + n) * Fraction(k, (k + n + 1) * (k + n))
                for k in range(geom.d + 1)), Fraction(0))


@lru_cache(maxsize=256)
def _t_moments(geom: Geometry) -> tuple[float, ...]:
    """``M_j = int_0^b1 h(phi) phi^j dphi`` as floats, j = 0..119."""
    b1 = b1_of(geom)
    h = build_h(geom)
    out = []
    for j in range(120):
        out.append(float(sum((c * b1 ** (i + j + 1) / (i + j + 1)
                              for i, c in enumerate(h.coefficients)), Fraction(0))))
    return tuple(out)


def t_eval(geom: Geometry, mu) -> float:
    """``T(mu) = int_0^b1 h(phi) exp(-mu phi) dphi``, the compact closing function.

    ``mu = 0`` uses the exact sum.  For ``mu*b1 <= 4`` the power series in ``mu``
    is summed (the closed form loses ``~(mu b1)^-(d+n+1)`` to cancellation
    there); otherwise the closed form with exact ``h^(k)(0)`` and ``h^(k)(b1)``.
    """
    if geom.lam <= 0:
        raise InvalidGeometryError(f"T(mu) requires λ>0 (λ = {geom.lam})")
    m = float(mu)
    if m < 0:
        raise InvalidGeometryError("T(mu) is only used for mu >= 0")
    if m == 0:
        return float(t_zero_exact(geom))
    b1 = b1_of(geom)
    x = m * float(b1)
    if x <= 4.0:
        moments = _t_moments(geom)
        total = 0.0
        coef = 1.0
        for j, Mj in enumerate(moments):
            term = coef * Mj
            total += term
            if j > x and abs(term) <= 1e-18 * abs(total):
                break
            coef *= -m / (j + 1)
        return total
    mf = Fraction(m)
    table = h_table(geom)
    hb = derivatives_at(table, b1)
    hk0 = _h_at_zero(geom)
    a = sum((hk0[k] / mf ** (k + 1) for k in range(geom.degree + 1)), Fraction(0))
    b = sum((hb[k] / mf ** (k + 1) for k in range(geom.degree + 1)), Fraction(0))
    return float(a) - math.exp(-x) * float(b)


def closing_residuals(profile: SolitonProfile) -> tuple[float, float]:
    """``F(b1)`` and ``F'(b1) + 1`` from the bulk closed form."""
    b1 = profile.b1_float
    return profile.F_closed(b1), profile.dF_closed(b1) + 1.0


def solve_mu_compact(geom: Geometry) -> SolitonProfile:
    """Smallest ``mu > 0`` with ``T(mu) = 0``; the closing condition is then checked."""
    if geom.lam <= 0:
        raise InvalidGeometryError(f"compact shrinker requires λ>0 (λ = {geom.lam})")
    t0 = t_zero_exact(geom)
    if t0 <= 0:
        raise SolverFailure("T(0) = 0: the compactification is Kähler-Einstein (mu = 0), "
                            "there is no soliton with nonzero mu")
    b1 = float(b1_of(geom))
    T = lambda x: t_eval(geom, x)  # noqa: E731
    lo, t_lo = 0.0, float(t0)
    step = 1.0 / (8.0 * b1)
    while True:
        hi = lo + step
        if hi > _BRACKET_LIMIT:
            raise SolverFailure(f"no sign change of T(mu) up to 2^60 for {geom}")
        t_hi = T(hi)
        if t_hi <= 0:
            break
        lo, t_lo = hi, t_hi
        step *= 1.25
    mu = hi if t_hi == 0 else brentq(T, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                     maxiter=500)

    grid = np.linspace(0.0, 4.0 * mu, 401)[1:]
    vals = np.array([T(x) for x in grid])
    extra = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            r = brentq(T, a, b, xtol=1e-14)
            if abs(r - mu) > 1e-9 * mu:
                extra.append(r)
    if extra:
        warnings.warn(f"T(mu) has further sign changes at {extra}; returning the smallest root",
                      RuntimeWarning, stacklevel=2)

    profile = SolitonProfile(geom, SolitonCase.COMPACT_SHRINKING, mu, nu_from_mu(geom, mu),
                             extra_roots=tuple(extra))
    f_b1, df_b1 = closing_residuals(profile)
    if abs(f_b1) > TOL_CLOSING_F or abs(df_b1) > TOL_CLOSING_DF:
        raise ClosingError(f"closing condition failed: F(b1) = {f_b1:.3e}, F'(b1)+1 = {df_b1:.3e}")
    return profile


def solve(geom: Geometry, compact: bool = False, mu=None) -> SolitonProfile:
    """Dispatch on the case: solve for ``mu`` when shrinking, else require it."""
    case = classify(geom, compact)
    if case is SolitonCase.SHRINKING_NONCOMPACT:
        return solve_mu_shrinking(geom) if mu is None else make_profile(geom, mu)
    if case is SolitonCase.COMPACT_SHRINKING:
        if mu is None:
            return solve_mu_compact(geom)
        profile = make_profile(geom, mu, compact=True)
        f_b1, df_b1 = closing_residuals(profile)
        if not (abs(f_b1) <= TOL_CLOSING_F and abs(df_b1) <= TOL_CLOSING_DF):
            raise ClosingError(f"supplied mu does not close: F(b1) = {f_b1:.3e}, "
                               f"F'(b1)+1 = {df_b1:.3e}")
        return profile
    if mu is None:
        raise InvalidGeometryError(f"{case.value} solitons form a family: mu < 0 must be given")
    return make_profile(geom, mu)


def sign_changes_on_grid(f, grid) -> list[tuple[float, float]]:
    """Brackets of sign changes; exact zeros at nodes are skipped over, not counted."""
    vals = np.asarray(f(grid), dtype=float)
    out = []
    last = None
    for i, v in enumerate(vals):
        if v == 0:
            continue
        if last is not None and vals[last] * v < 0:
            out.append((float(grid[last]), float(grid[i])))
        last = i
    return out


def root_scan_f(profile: SolitonProfile, phi_max: float, count: int = 4000) -> list[float]:
    """Roots of ``F`` on a log grid over ``(0, phi_max]`` (clipped at ``b1`` when compact)."""
    if not phi_max > 0:
        raise InvalidGeometryError("phi_max must be positive")
    top = phi_max
    if profile.case.is_compact:
        top = min(phi_max, profile.b1_float)
    grid = np.geomspace(top * 1e-9, top, count)
    if profile.case.is_compact and top == profile.b1_float:
        # log spacing in b1 - phi resolves the approach to the closing point
        tail = profile.b1_float - np.geomspace(top / 2, top * 1e-12, count // 4)
        grid = np.unique(np.concatenate([grid[grid < top / 2], tail, [top]]))
    vals = profile.F(grid)
    roots = [float(x) for x, v in zip(grid, vals) if v == 0]
    for a, b in sign_changes_on_grid(profile.F, grid):
        roots.append(brentq(profile.F, a, b, xtol=1e-15))
    return sorted(roots)
