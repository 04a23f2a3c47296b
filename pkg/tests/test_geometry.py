import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import EXPANDING_12, F1
from krsoliton.errors import InvalidGeometryError, OutOfRangeError, PositivityError
from krsoliton.exact_poly import Geometry
from krsoliton.geometry import (ClosingData, asymptotic_data, build_grid, closing_data,
                                completeness_diagnostics, flow_pullback_sample, grid_eigenvalues,
                                grid_positive, metric_eigenvalues, phi_of_r, phi_of_r_extended)
from krsoliton.profile import make_profile, solve
from krsoliton.quadrature import gauss_legendre

SQRT2 = math.sqrt(2.0)


def shrinker_r(phi, anchor=1.0):
    f = lambda x: np.log(x) + (SQRT2 - 1) * np.log(x + SQRT2)  # noqa: E731
    return f(phi) - f(anchor)


def shrinker_P(phi, anchor=1.0):
    f = lambda x: SQRT2 * (x + (1 - SQRT2) * np.log(x + SQRT2))  # noqa: E731
    return f(phi) - f(anchor)


def round_trip_allowance(grid, phi, r):
    # r is resolved only to ulp(phi)/F(phi) where phi itself sits near b1
    return 1e-12 * (1 + abs(r)) + 4 * np.spacing(phi) / grid.profile.F(phi)


# -- grid construction ---------------------------------------------------------------

def test_shrinker_r_closed_form(shrinker_grid):
    g = shrinker_grid
    assert np.max(np.abs(g.r - shrinker_r(g.phi))) <= 1e-9
    assert np.max(np.abs(g.P - shrinker_P(g.phi))) <= 1e-9


def test_shrinker_r_at_off_grid(shrinker_grid):
    x = np.geomspace(2e-6, 900, 301)
    assert np.max(np.abs(shrinker_grid.r_at(x) - shrinker_r(x))) <= 1e-12
    assert np.max(np.abs(shrinker_grid.P_at(x) - shrinker_P(x))) <= 1e-12


def test_cigar_grid(cigar_grid):
    g = cigar_grid
    C = math.expm1(g.anchor_phi)
    assert np.max(np.abs(g.phi - np.logaddexp(0.0, g.r + math.log(C)))) <= 1e-10


def test_grid_invariants(shrinker_grid, compact_grid, steady_grid, cigar_grid):
    for g in (shrinker_grid, compact_grid, steady_grid, cigar_grid):
        assert np.all(np.diff(g.phi) > 0)
        assert np.all(np.diff(g.r) > 0)
        assert np.all(np.diff(g.P) > 0)
        with np.errstate(over="ignore"):
            assert np.array_equal(g.s, np.exp(g.r))
        assert g.r_at(g.anchor_phi) == pytest.approx(0.0, abs=1e-15)
        assert g.P_at(g.anchor_phi) == pytest.approx(0.0, abs=1e-15)
        assert g.quad_error.max() <= 1e-13


def test_default_ranges(shrinker_grid, compact_grid):
    assert shrinker_grid.phi_min == pytest.approx(1e-6)
    assert shrinker_grid.phi_max == pytest.approx(1e3)
    assert compact_grid.phi_max == pytest.approx(2 * (1 - 1e-9))
    assert compact_grid.anchor_phi == 1.0
    assert len(shrinker_grid) == 2048


def test_adaptive_matches_refined_gauss(shrinker, compact, steady, expanding):
    for prof in (shrinker, compact, steady, expanding):
        grid = build_grid(prof, count=256)
        top = 0.9 * prof.b1_float if prof.case.is_compact else 50.0
        pairs = [(1e-3, 0.5), (0.5, 1.3), (1.3, top)]
        for a, b in pairs:
            ref = gauss_legendre(lambda u: 1 / prof.F(u), a, b, order=40, pieces=100)
            assert grid.r_at(b) - grid.r_at(a) == pytest.approx(ref, abs=1e-10)


def test_build_grid_errors(shrinker, compact):
    with pytest.raises(InvalidGeometryError):
        build_grid(shrinker, phi_min=2.0)
    with pytest.raises(InvalidGeometryError):
        build_grid(compact, phi_max=2.0)
    with pytest.raises(InvalidGeometryError):
        build_grid(shrinker, count=1)
    with pytest.raises(OutOfRangeError):
        build_grid(shrinker).r_at(2e3)


def test_wrong_mu_is_not_positive():
    with pytest.raises(PositivityError, match="profile not positive"):
        build_grid(make_profile(F1, 1.0))


# -- inverse ---------------------------------------------------------------------------

def test_inverse_at_anchor(shrinker_grid):
    assert phi_of_r(shrinker_grid, shrinker_grid.r_at(1.0)) == pytest.approx(1.0, abs=1e-10)


def test_inverse_out_of_range(shrinker_grid):
    with pytest.raises(OutOfRangeError):
        phi_of_r(shrinker_grid, shrinker_grid.r[-1] + 1)


@pytest.mark.parametrize("name", ["shrinker_grid", "compact_grid", "steady_grid", "cigar_grid"])
def test_round_trip_random(name, request):
    g = request.getfixturevalue(name)
    rng = np.random.default_rng(7)
    r = rng.uniform(g.r[0], g.r[-1], 1000)
    phi = phi_of_r(g, r)
    err = np.abs(g.r_at(phi) - r)
    allowed = round_trip_allowance(g, phi, r)
    assert np.all(err <= allowed)


@settings(max_examples=60, deadline=None)
@given(st.floats(-12, 6.5))
def test_round_trip_property(r):
    g = _grids()["shrinker"]
    phi = phi_of_r(g, r)
    assert abs(g.r_at(phi) - r) <= 1e-12 * (1 + abs(r))


_CACHE = {}


def _grids():
    if not _CACHE:
        _CACHE["shrinker"] = build_grid(solve(F1))
    return _CACHE


def test_extension_flags(shrinker_grid, compact_grid):
    inside = phi_of_r_extended(shrinker_grid, 0.0)
    assert not inside.extrapolated and inside.phi == pytest.approx(1.0, abs=1e-12)
    low = phi_of_r_extended(shrinker_grid, shrinker_grid.r[0] - 3)
    assert low.extrapolated and low.phi == pytest.approx(1e-6 * math.exp(-3), rel=1e-5)
    far = phi_of_r_extended(compact_grid, compact_grid.r[-1] + 5)
    cd = closing_data(compact_grid)
    assert far.extrapolated and far.phi == pytest.approx(2 - cd.C0 * math.exp(-far_r(compact_grid)))


def far_r(grid):
    return grid.r[-1] + 5


def test_large_r_shrinker_ratio(shrinker_grid):
    ad = asymptotic_data(shrinker_grid)
    grid = build_grid(shrinker_grid.profile, phi_max=1e6)
    r = grid.r[-1]
    assert phi_of_r(grid, r) / math.exp(ad.p * r) == pytest.approx(ad.D0, rel=1e-3)
    ext = phi_of_r_extended(shrinker_grid, 40.0, ad)
    assert ext.extrapolated and ext.phi == ad.D0 * math.exp(ad.p * 40.0)


def test_compact_tail_decay(compact_grid):
    cd = closing_data(compact_grid)
    tail = compact_grid.r >= compact_grid.r[-1] - 4
    gap = 2.0 - compact_grid.phi[tail]
    assert np.allclose(gap * compact_grid.s[tail], cd.C0, rtol=1e-4)


# -- eigenvalues -----------------------------------------------------------------------

def test_eigenvalues_f1(shrinker_grid):
    e = metric_eigenvalues(shrinker_grid, 1.0)
    assert e.horizontal == 2.0
    assert e.multiplicities == (1, 0, 1)
    assert e.positive
    assert e.fiber_tangential == pytest.approx(1.0, rel=1e-15)
    assert e.fiber_radial == pytest.approx((1 + SQRT2) / (2 * SQRT2), rel=1e-14)


def test_eigenvalue_identities(shrinker_grid, steady_grid, compact_grid):
    for g in (shrinker_grid, steady_grid, compact_grid):
        hor, tan, rad = grid_eigenvalues(g)
        keep = g.s < 1e300
        assert np.allclose(tan[keep] * g.s[keep], g.phi[keep], rtol=1e-15, atol=0)
        assert np.allclose(rad[keep] * g.s[keep], g.F[keep], rtol=1e-15, atol=0)
        assert np.all(hor > 0) and grid_positive(g)


def test_eigenvalue_identities_match_potential_derivatives(shrinker_grid):
    # P_s = phi/s and P_s + P_ss s = phi_r/s, with P_s = dP/ds from the table
    g = shrinker_grid
    mid = slice(200, -200)
    dP_ds = np.gradient(g.P, g.s)[mid]
    assert np.allclose(dP_ds, (g.phi / g.s)[mid], rtol=2e-3)
    _, tan, rad = grid_eigenvalues(g)
    P_s = g.phi / g.s
    P_ss_s = np.gradient(P_s, g.s) * g.s
    assert np.allclose((P_s + P_ss_s)[mid], rad[mid], rtol=2e-3)


def test_eigenvalue_families_for_higher_rank():
    p = solve(Geometry(2, 3, 4, 1))
    e = metric_eigenvalues(build_grid(p, count=256), 0.5)
    assert e.multiplicities == (2, 2, 1)
    assert e.horizontal == 1.5 and e.positive


# -- asymptotics -----------------------------------------------------------------------

def test_shrinker_asymptotics(shrinker_grid):
    ad = asymptotic_data(shrinker_grid)
    assert ad.p == pytest.approx(1 / SQRT2, rel=1e-14)
    assert ad.D0 == pytest.approx((1 + SQRT2) ** (1 - 1 / SQRT2), rel=1e-10)
    assert ad.D0 > 0
    assert ad.tail_fit_error < 1e-2


def test_shrinker_tail_slope_at_1e6(shrinker):
    ad = asymptotic_data(build_grid(shrinker, phi_max=1e6))
    assert ad.p_tail == pytest.approx(1 / SQRT2, rel=1e-3)


def test_steady_asymptotics(steady_grid):
    ad = asymptotic_data(steady_grid)
    assert (ad.c1, ad.c2) == (1.0, 1.0)
    assert ad.c1 > 0 and ad.c2 > 0
    # the neglected O(1/phi^2) term in F leaves a relative error ~ 1/phi^2 on the tail
    far = asymptotic_data(build_grid(steady_grid.profile, phi_max=1e4))
    assert far.tail_fit_error <= 2e-6 < ad.tail_fit_error


def test_expanding_asymptotics(expanding):
    ad = asymptotic_data(build_grid(expanding))
    assert ad.p == pytest.approx(float(EXPANDING_12.lam) / expanding.mu)
    assert ad.p > 0 and ad.D0 > 0


def test_asymptotics_reject_compact(compact_grid):
    with pytest.raises(InvalidGeometryError):
        asymptotic_data(compact_grid)
    with pytest.raises(InvalidGeometryError):
        completeness_diagnostics(compact_grid.profile)


def test_completeness(shrinker, steady, expanding):
    for prof in (shrinker, steady, expanding):
        diag = completeness_diagnostics(prof)
        assert diag["slope_error"] <= 1e-3
        assert diag["length_diverges"]


# -- closing ---------------------------------------------------------------------------

def test_closing_f1(compact_grid):
    cd = closing_data(compact_grid)
    assert isinstance(cd, ClosingData)
    assert cd.b1 == 2.0
    assert cd.boundary_eigenvalues[:2] == (3.0, 2.0)
    assert cd.boundary_eigenvalues[2] == cd.C0 > 0
    assert cd.positive
    assert abs(cd.F_b1) <= 1e-10 and abs(cd.dF_b1_plus_one) <= 1e-8
    assert cd.tail_constancy <= 1e-4
    assert cd.quadratic_remainder < 10


def test_closing_c0_against_scipy(compact):
    # log C0 = lim [log(b1 - phi) + r(phi)], stopping short of b1 where 1/F cancels badly
    a, b1 = 1.0, 2.0
    top = b1 - 1e-7
    val, _ = quad(lambda u: 1 / compact.F(u) - 1 / (b1 - u), a, top, epsabs=1e-13,
                  epsrel=1e-12, limit=200)
    ref = math.exp(val + math.log(b1 - a))
    assert closing_data(build_grid(compact)).C0 == pytest.approx(ref, rel=1e-5)


def test_closing_rejects_noncompact(shrinker_grid):
    with pytest.raises(InvalidGeometryError):
        closing_data(shrinker_grid)


@pytest.mark.parametrize("d,n,eps", [(2, 1, 1), (1, 3, 0.5), (3, 2, 1)])
def test_closing_other_compact(d, n, eps):
    from fractions import Fraction

    eps = Fraction(eps)
    g = Geometry(d, n, n * eps + 1, eps)
    cd = closing_data(build_grid(solve(g, compact=True)))
    assert cd.positive and cd.tail_constancy <= 1e-4
    assert cd.boundary_eigenvalues[0] == pytest.approx(1 + float(eps) * (n + 1))


# -- pullback --------------------------------------------------------------------------

@pytest.mark.parametrize("s", [0.3, 1.0, 7.0])
def test_pullback_identity(shrinker_grid, s):
    out = flow_pullback_sample(shrinker_grid, 0.0, s)
    phi = phi_of_r(shrinker_grid, math.log(s))
    assert out.phi == phi and not out.extrapolated
    assert out.F == shrinker_grid.profile.F(phi)


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_pullback_shrinker_limit(shrinker_grid, s):
    ad = asymptotic_data(shrinker_grid)
    out = flow_pullback_sample(shrinker_grid, 1 - 1e-12, s, ad)
    target = ad.D0 * s**ad.p
    assert out.phi == pytest.approx(target, rel=1e-5)
    assert out.F == pytest.approx(ad.p * target, rel=1e-5)


def test_pullback_expanding_limit(expanding):
    grid = build_grid(expanding)
    ad = asymptotic_data(grid)
    lam = float(EXPANDING_12.lam)
    out = flow_pullback_sample(grid, (1 - 1e-12) / lam, 2.0, ad)
    assert out.phi == pytest.approx(ad.D0 * 2.0**ad.p, rel=1e-4)


def test_pullback_errors(shrinker_grid, steady_grid):
    with pytest.raises(InvalidGeometryError):
        flow_pullback_sample(shrinker_grid, 1.0, 1.0)
    with pytest.raises(InvalidGeometryError):
        flow_pullback_sample(shrinker_grid, 0.0, 0.0)
    with pytest.raises(InvalidGeometryError):
        flow_pullback_sample(steady_grid, 0.0, 1.0)
