import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import CIGAR, EXPANDING_12, F1, STEADY_11
from krsoliton.errors import InvalidGeometryError, SolverFailure
from krsoliton.exact_poly import Geometry
from krsoliton.profile import (SolitonCase, SolitonProfile, b1_of, ck_coefficients, classify,
                               closing_residuals, make_profile, n_poly_coefficients, nu_exact,
                               nu_from_ck, nu_from_mu, root_scan_f, sign_changes_on_grid, solve,
                               solve_mu_compact, solve_mu_shrinking, t_eval, t_zero_exact)

SQRT2 = math.sqrt(2.0)

geoms = st.builds(
    Geometry,
    d=st.integers(0, 4),
    n=st.integers(1, 4),
    tau=st.fractions(min_value=-4, max_value=6, max_denominator=8),
    eps=st.fractions(min_value=0, max_value=2, max_denominator=8),
)
positive_eps_geoms = st.builds(
    Geometry,
    d=st.integers(0, 4),
    n=st.integers(1, 4),
    tau=st.fractions(min_value=-4, max_value=6, max_denominator=8),
    eps=st.fractions(min_value=Fraction(1, 8), max_value=2, max_denominator=8),
)
nonzero_mu = st.fractions(min_value=-9, max_value=9, max_denominator=20).filter(lambda m: m != 0)


def shrinking_geom(d, n, eps, lam=1):
    return Geometry(d, n, n * Fraction(eps) + lam, Fraction(eps))


def numeric_T(geom, mu, pieces=200):
    """T(mu) by composite Gauss-Legendre on the expanded h, independent of t_eval."""
    from krsoliton.exact_poly import build_h
    from krsoliton.quadrature import gauss_legendre

    coeffs = build_h(geom).to_floats()
    b1 = float(b1_of(geom))
    f = lambda x: np.polynomial.polynomial.polyval(x, coeffs) * np.exp(-mu * x)  # noqa: E731
    return gauss_legendre(f, 0.0, b1, order=30, pieces=pieces)


# -- classification -----------------------------------------------------------------

def test_classify_cases():
    assert classify(F1) is SolitonCase.SHRINKING_NONCOMPACT
    assert classify(STEADY_11) is SolitonCase.STEADY
    assert classify(EXPANDING_12) is SolitonCase.EXPANDING
    assert classify(F1, compact=True) is SolitonCase.COMPACT_SHRINKING


def test_compact_needs_positive_lambda():
    with pytest.raises(InvalidGeometryError, match="compact shrinker requires λ>0"):
        classify(EXPANDING_12, compact=True)


# -- nu and C_k -----------------------------------------------------------------------

@pytest.mark.parametrize("mu", [0.5, 1.0, 1.7, -2.25])
def test_nu_f1_formula(mu):
    assert nu_from_mu(F1, mu) == pytest.approx(1 / mu - 2 / mu**3, rel=1e-15)


def test_nu_vanishes_at_sqrt2():
    assert abs(nu_from_mu(F1, SQRT2)) < 1e-15


def test_nu_cigar():
    assert nu_from_mu(CIGAR, -1.0) == -1.0


def test_nu_rejects_zero():
    with pytest.raises(InvalidGeometryError):
        nu_from_mu(F1, 0)


def test_ck_f1():
    ck = ck_coefficients(F1)
    assert ck.values == (1, 0, -2)
    assert ck[0] == 1 and ck[2] == -2


@given(geoms)
def test_ck_endpoints(geom):
    ck = ck_coefficients(geom)
    assert ck[geom.n - 1] == math.factorial(geom.n) * geom.eps
    assert ck[geom.degree] == -math.factorial(geom.degree) * geom.lam


@given(positive_eps_geoms, nonzero_mu)
def test_ck_form_matches_derivative_form_exactly(geom, mu):
    assert nu_from_ck(geom, mu) == nu_exact(geom, mu)


@given(positive_eps_geoms)
def test_ck_single_sign_change_iff_lambda_positive(geom):
    changes = ck_coefficients(geom).sign_changes()
    if geom.lam > 0:
        assert changes == 1
    else:
        assert changes == 0


def test_n_poly_coefficients_f1():
    # N(mu) = nu mu^3 = mu^2 - 2
    assert n_poly_coefficients(F1) == (-2, 0, 1)


# -- shrinking solve --------------------------------------------------------------------

def test_solve_f1_shrinker(shrinker):
    assert shrinker.mu == pytest.approx(SQRT2, abs=1e-12)
    assert shrinker.nu == 0.0
    assert shrinker.case is SolitonCase.SHRINKING_NONCOMPACT


@pytest.mark.parametrize("d,n,tau", [(1, 1, 1), (2, 3, Fraction(5, 2)), (3, 2, Fraction(1, 3)),
                                     (0, 2, 4)])
def test_flat_twist_gives_mu_tau(d, n, tau):
    assert solve_mu_shrinking(Geometry(d, n, tau, 0)).mu == pytest.approx(float(tau), abs=1e-12)


def test_unique_sign_change_of_n():
    g = Geometry(2, 1, 3, 1)
    coeffs = [float(c) for c in n_poly_coefficients(g)]
    x = np.geomspace(1e-6, 1e6, 20001)
    changes = sign_changes_on_grid(lambda t: np.polynomial.polynomial.polyval(t, coeffs), x)
    assert len(changes) == 1
    lo, hi = changes[0]
    assert lo <= solve_mu_shrinking(g).mu <= hi


def test_shrinking_solve_requires_positive_lambda():
    with pytest.raises(InvalidGeometryError):
        solve_mu_shrinking(STEADY_11)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([0, Fraction(1, 2), 1, 2]),
       st.sampled_from([Fraction(1, 3), Fraction(1, 2), 2, 7]))
def test_mu_scales_inversely_under_metric_rescaling(d, n, eps, kappa):
    g = shrinking_geom(d, n, eps)
    mu = solve_mu_shrinking(g).mu
    assert solve_mu_shrinking(g.rescaled(kappa)).mu == pytest.approx(mu / float(kappa), rel=1e-10)


@settings(max_examples=40)
@given(st.lists(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=10),
                min_size=1, max_size=4),
       st.lists(st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=10),
                min_size=1, max_size=4),
       st.integers(0, 3))
def test_descartes_pattern_has_one_positive_root(pos, neg, gap):
    # coefficients, lowest power first: positive block, zeros, then negative block
    coeffs = [float(c) for c in pos] + [0.0] * gap + [-float(c) for c in neg]
    x = np.geomspace(1e-8, 1e8, 40001)
    f = lambda t: np.polynomial.polynomial.polyval(t, coeffs)  # noqa: E731
    assert len(sign_changes_on_grid(f, x)) == 1


# -- T(mu) and the compact solve ---------------------------------------------------------

def test_t_zero_f1():
    assert t_zero_exact(F1) == Fraction(2, 3)
    assert t_eval(F1, 0) == pytest.approx(2 / 3, abs=1e-15)


def test_t_one_f1():
    assert t_eval(F1, 1.0) == pytest.approx(1 - 9 * math.exp(-2), abs=1e-13)


@pytest.mark.parametrize("mu", [0.01, 0.3, 1.9, 2.1, 5.0, 17.0])
def test_t_eval_against_quadrature(mu):
    for g in (F1, Geometry(2, 2, 2, Fraction(1, 2)), Geometry(3, 1, 3, 2)):
        ref = numeric_T(g, mu)
        assert t_eval(g, mu) == pytest.approx(ref, rel=1e-10, abs=1e-13)


@given(st.integers(1, 4), st.integers(1, 4), st.fractions(min_value=0, max_value=3,
                                                          max_denominator=6),
       st.fractions(min_value=Fraction(1, 4), max_value=3, max_denominator=4))
def test_t_zero_positive_and_matches_polynomial_integral(d, n, eps, lam):
    from krsoliton.exact_poly import build_h

    g = Geometry(d, n, n * eps + lam, eps)
    b1 = b1_of(g)
    h = build_h(g)
    integral = sum((c * b1 ** (i + 1) / (i + 1) for i, c in enumerate(h.coefficients)),
                   Fraction(0))
    assert t_zero_exact(g) == integral
    if eps > 0:
        assert t_zero_exact(g) > 0
    else:
        assert t_zero_exact(g) == 0


def test_compact_f1(compact):
    assert compact.b1 == 2
    assert 0.5 < compact.mu < 1.0
    assert abs(t_eval(F1, compact.mu)) < 1e-12
    f, df = closing_residuals(compact)
    assert abs(f) < 1e-10 and abs(df) < 1e-8
    assert compact.nu == pytest.approx(nu_from_mu(F1, compact.mu))
    assert compact.extra_roots == ()


def test_compact_at_flat_twist_is_einstein():
    with pytest.raises(SolverFailure, match="T\\(0\\) = 0"):
        solve_mu_compact(Geometry(1, 1, 2, 0))


@pytest.mark.parametrize("d,n,eps", [(1, 2, 1), (2, 1, Fraction(1, 2)), (3, 3, 1), (2, 3, 1)])
def test_compact_closing_slope(d, n, eps):
    p = solve_mu_compact(shrinking_geom(d, n, eps))
    assert p.dF(p.b1_float) == pytest.approx(-1.0, abs=1e-8)
    assert abs(p.F(p.b1_float)) < 1e-10


def test_supplied_compact_mu(compact):
    again = solve(F1, compact=True, mu=compact.mu)
    assert again.mu == compact.mu
    from krsoliton.errors import ClosingError

    with pytest.raises(ClosingError):
        solve(F1, compact=True, mu=0.9)


# -- evaluation ---------------------------------------------------------------------------

def shrinker_closed(phi):
    return phi * (phi + SQRT2) / (SQRT2 * (1 + phi))


def test_f1_value(shrinker):
    assert shrinker.F(1.0) == pytest.approx((1 + SQRT2) / (2 * SQRT2), rel=1e-14)


def test_f1_closed_form_everywhere(shrinker):
    x = np.geomspace(1e-9, 1e4, 3000)
    assert np.allclose(shrinker.F(x), shrinker_closed(x), rtol=1e-13, atol=0)


def test_cigar_profile(cigar):
    assert cigar.nu == -1.0
    assert cigar.F(math.log(2)) == pytest.approx(0.5, rel=1e-15)
    x = np.geomspace(1e-8, 50, 500)
    assert np.allclose(cigar.F(x), -np.expm1(-x), rtol=1e-14)


def test_small_phi_slope_is_one(shrinker, compact, steady, expanding):
    for p in (shrinker, compact, steady, expanding):
        assert p.F(1e-9) / 1e-9 == pytest.approx(1.0, abs=1e-8)


MATRIX_PROFILES = [
    (shrinking_geom(d, n, eps), False, None)
    for d in (1, 2, 3) for n in (1, 2, 3) for eps in (0, Fraction(1, 2), 1)
] + [
    (shrinking_geom(d, n, eps), True, None)
    for d in (1, 2, 3) for n in (1, 2, 3) for eps in (Fraction(1, 2), 1)
] + [
    (shrinking_geom(d, n, eps, lam), False, mu)
    for d in (1, 3) for n in (1, 3) for eps in (0, 1) for lam in (0, -1) for mu in (-0.5, -2.0)
]


@pytest.fixture(scope="module")
def matrix_profiles():
    return [solve(g, compact=c, mu=mu) for g, c, mu in MATRIX_PROFILES]


def test_series_and_direct_branches_agree(matrix_profiles):
    for p in matrix_profiles:
        s = p.phi_switch
        x = np.linspace(s / 2, 2 * s, 101)
        if p.case.is_compact:
            x = x[x < p.b1_float / 2]
        rel = np.abs(p.F_series(x) - p.F_closed(x)) / np.abs(p.F_closed(x))
        assert rel.max() <= 1e-9, p


def test_positive_on_domain(matrix_profiles):
    for p in matrix_profiles:
        top = p.b1_float * (1 - 1e-12) if p.case.is_compact else 1e3
        assert np.all(p.F(np.geomspace(1e-9, top, 4000)) > 0), p


def test_root_scan_noncompact_is_empty(shrinker, steady, expanding):
    for p in (shrinker, steady, expanding):
        assert root_scan_f(p, 1e3) == []


def test_root_scan_compact_finds_b1(compact):
    roots = root_scan_f(compact, 1e3)
    assert roots == [pytest.approx(2.0, abs=1e-12)]


def test_domain_errors(shrinker, compact):
    with pytest.raises(InvalidGeometryError):
        shrinker.F(0.0)
    with pytest.raises(InvalidGeometryError):
        shrinker.F(np.array([1.0, -1.0]))
    with pytest.raises(InvalidGeometryError):
        compact.F(2.0 + 1e-9)
    assert compact.F(2.0) == 0.0


def test_family_needs_mu():
    with pytest.raises(InvalidGeometryError):
        solve(STEADY_11)
    with pytest.raises(InvalidGeometryError):
        solve(STEADY_11, mu=0.5)
    with pytest.raises(InvalidGeometryError):
        make_profile(F1, -1.0)


def test_profile_validates_case():
    with pytest.raises(InvalidGeometryError):
        SolitonProfile(F1, SolitonCase.STEADY, -1.0, 0.0)
    with pytest.raises(InvalidGeometryError):
        SolitonProfile(F1, SolitonCase.SHRINKING_NONCOMPACT, 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(1, 3), st.sampled_from([0, Fraction(1, 2), 1]),
       st.floats(min_value=-3, max_value=-0.2))
def test_family_profiles_satisfy_zero_section_relation(d, n, eps, mu):
    g = shrinking_geom(d, n, eps, lam=-1)
    p = solve(g, mu=mu)
    assert p.nu == nu_from_mu(g, mu)
    assume(np.isfinite(p.F(1.0)))
    assert p.F(1e-7) == pytest.approx(1e-7, rel=1e-6)
