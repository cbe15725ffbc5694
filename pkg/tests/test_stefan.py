import math

import numpy as np
import pytest
from scipy import integrate

from mdla.analytics import solve_r_subcritical
from mdla.stefan import (
    StefanError,
    StefanState,
    conservation_residual,
    profile_error,
    profile_to_csv,
    self_similar_profile,
    similarity_state,
    solve,
    stefan_step,
    step_state,
)

MU = 0.4382


def quad_profile(mu, x, r):
    # direct quadrature of both Gaussian integrals, no erfc
    g = lambda y: math.exp(-0.5 * y * y)
    num, _ = integrate.quad(g, r, x, epsabs=1e-14)
    den, _ = integrate.quad(g, r, np.inf, epsabs=1e-14)
    return mu * num / den


def test_profile_boundary_values():
    r = solve_r_subcritical(MU)
    assert self_similar_profile(MU, r) == 0.0
    assert self_similar_profile(MU, r - 0.3) == 0.0
    assert self_similar_profile(MU, 60.0) == pytest.approx(MU, abs=1e-15)


@pytest.mark.parametrize("x", [0.6, 1.0, 2.0, 4.0])
def test_profile_matches_quadrature(x):
    r = solve_r_subcritical(MU)
    assert self_similar_profile(MU, x) == pytest.approx(quad_profile(MU, x, r), rel=1e-9)


@pytest.mark.parametrize("mu", [0.2, MU, 0.9])
def test_front_derivative_equals_r(mu):
    r = solve_r_subcritical(mu)
    h = 1e-6
    deriv = (self_similar_profile(mu, r + h, r) - self_similar_profile(mu, r, r)) / h
    assert deriv == pytest.approx(r, abs=1e-4)


def test_profile_rejects_supercritical():
    with pytest.raises(ValueError):
        self_similar_profile(1.1, 2.0)


def test_similarity_doubles_front_from_one_to_four():
    st = similarity_state(MU, 1.0)
    r1 = st.r
    solve(st, 4.0, ds=1e-3)
    assert st.r / r1 == pytest.approx(2.0, rel=5e-3)


def test_self_similarity_preserved():
    st = similarity_state(MU, 0.25)
    r_const = []
    for s in (0.5, 1.0, 2.0):
        solve(st, s, ds=2e-4)
        r_const.append(st.r / math.sqrt(st.s))
        assert profile_error(st) < 1e-3
    assert np.ptp(r_const) / np.mean(r_const) < 5e-3


def test_short_time_growth_is_diffusive():
    st = step_state(MU, xi_max=4.0, dxi=0.005)
    pts = []
    for s in np.geomspace(1e-3, 1e-1, 9):
        solve(st, s, ds=1e-5)
        pts.append((s, st.r))
    s, r = np.array(pts).T
    slope = np.polyfit(np.log(s), np.log(r), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.02)


def test_flat_front_does_not_move():
    prof = np.full(101, 0.3)
    prof[0] = 0.0
    prof[1] = prof[2] = 0.0
    st = StefanState(1.0, 0.7, 0.01, prof, 0.3)
    assert st.front_speed() == 0.0
    stefan_step(st, 1e-6)
    assert st.r == pytest.approx(0.7, abs=1e-9)


def test_negative_speed_signalled():
    prof = np.linspace(0, 0.3, 101)
    prof[1] = -0.05
    st = StefanState(1.0, 0.7, 0.01, prof, 0.3)
    with pytest.raises(StefanError):
        stefan_step(st, 1e-4)


def test_bad_step_and_mu_rejected():
    st = similarity_state(MU, 1.0)
    with pytest.raises(ValueError):
        stefan_step(st, 0.0)
    st.mu_inf = 1.0
    with pytest.raises(ValueError):
        stefan_step(st, 1e-4)


def test_conservation_initial_uniform():
    st = step_state(MU)
    st.mu_profile[0] = MU  # the s = 0 data before the front condition acts
    assert conservation_residual(st) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("s", [0.1, 1.0, 3.0])
def test_conservation_on_closed_form(s):
    st = similarity_state(MU, s, dxi=0.005)
    assert abs(conservation_residual(st)) < 1e-3


def test_conservation_drift_shrinks_with_refinement():
    drifts = []
    for dxi, ds in [(0.02, 4e-4), (0.01, 2e-4)]:
        st = similarity_state(MU, 1e-3, dxi=dxi)
        c0 = conservation_residual(st)
        solve(st, 1.0, ds)
        drifts.append(abs(conservation_residual(st) - c0))
    assert drifts[0] < 1e-2 and drifts[1] < 1e-2
    assert drifts[1] < 0.6 * drifts[0]


def test_monotone_profile_stays_monotone():
    st = similarity_state(MU, 1e-3)
    solve(st, 0.2, 1e-4)
    assert np.all(np.diff(st.mu_profile) >= -1e-12)


def test_front_non_decreasing():
    st = step_state(MU, xi_max=4.0, dxi=0.01)
    rs = []
    for _ in range(200):
        stefan_step(st, 1e-5)
        rs.append(st.r)
    assert np.all(np.diff(rs) >= 0)


def test_csv_layout():
    st = similarity_state(MU, 1.0, xi_max=0.05, dxi=0.01)
    lines = profile_to_csv([st]).splitlines()
    assert lines[0] == "s,xi,mu" and len(lines) == 7


def test_grid_must_divide():
    with pytest.raises(ValueError):
        similarity_state(MU, 1.0, xi_max=1.0, dxi=0.3)
