import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from mdla import analytics as A
from mdla.meanfield import stationary_recurrence


def riemann_mu_of_r(r, n=10**7, upper=40.0):
    # midpoint rule, independent of the adaptive quadrature
    h = upper / n
    x = (np.arange(n) + 0.5) * h
    return float(np.sum(np.exp(-x - 0.5 * (x / r) ** 2)) * h)


def test_mu_of_r_at_half_matches_reported_density():
    assert A.mu_of_r(0.5) == pytest.approx(0.4382, abs=5e-4)


def test_mu_of_r_brute_force_at_one():
    assert A.mu_of_r(1.0) == pytest.approx(riemann_mu_of_r(1.0), abs=1e-6)


@pytest.mark.parametrize("r", [0.01, 0.3, 1.0, 2.5, 10.0, 50.0])
def test_closed_form_cross_check(r):
    assert A.mu_of_r(r) == pytest.approx(A.mu_of_r_closed_form(r), rel=1e-10)


def test_limits():
    assert A.mu_of_r(1e-6) < 1e-5
    assert 1 - A.mu_of_r(1e4) < 1e-7


def test_mu_of_r_strictly_increasing_and_bounded():
    rs = np.linspace(0.01, 30, 1000)
    vals = np.array([A.mu_of_r(r) for r in rs])
    assert np.all(np.diff(vals) > 0)
    assert np.all((vals > 0) & (vals < 1))


@pytest.mark.parametrize("r", [10.0, 20.0, 50.0, 100.0])
def test_large_r_asymptotics(r):
    assert abs(1 - A.mu_of_r(r) - r**-2) <= 3 * r**-4


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_mu_of_r_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        A.mu_of_r(bad)


def test_solve_r_reported_value():
    assert A.solve_r_subcritical(0.4382) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("m", [0.1, 0.5, 0.9])
def test_solve_round_trip(m):
    assert A.mu_of_r(A.solve_r_subcritical(m)) == pytest.approx(m, abs=1e-7)


def test_barely_subcritical_scaling():
    eps = 1e-4
    assert 0.95 <= math.sqrt(eps) * A.solve_r_subcritical(1 - eps) <= 1.05


@pytest.mark.parametrize("bad", [0.0, 1.0, 1.5, -0.2])
def test_solve_rejects_outside_unit_interval(bad):
    with pytest.raises(ValueError):
        A.solve_r_subcritical(bad)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=3.0))
def test_solve_inverts_mu_of_r(r):
    assert A.solve_r_subcritical(A.mu_of_r(r)) == pytest.approx(r, abs=1e-7)


def test_stationary_wave_values():
    assert A.stationary_wave(1.0, 0.01, 0) == 0.0
    assert A.stationary_wave(0.7, 0.1, 1e4) == pytest.approx(0.7)
    assert A.stationary_wave(1.0, 0.01, 100) == pytest.approx(1 - math.exp(-2), abs=1e-12)
    assert A.stationary_wave(1.0, 0.01, 100) == pytest.approx(0.8647, abs=1e-4)


@pytest.mark.parametrize("r", [0.005, 0.01, 0.02, 0.05])
def test_stationary_wave_is_comoving_fixed_point(r):
    j = np.arange(2000)
    g = stationary_recurrence(1.02, r, j.size)
    assert np.max(np.abs(g - A.stationary_wave(1.02, r, j))) < 1e-3


def test_lost_total_examples():
    for R in (0, 10, 1e4):
        assert A.lost_total(R, 1.0, 0.01) == pytest.approx(50.0)
    assert A.lost_total(800, 1.02, 0.008) == pytest.approx(79.75)


def test_lost_rate_examples():
    assert A.lost_rate(0.0, "continuous") == 0.0
    assert A.lost_rate(0.1, "continuous") == pytest.approx(0.02)
    assert A.lost_rate(0.1, "discrete") == pytest.approx(0.025)
    with pytest.raises(ValueError):
        A.lost_rate(0.1, "sideways")


def test_predict_critical_constants():
    d = A.predict(1.0, "discrete")
    assert d.regime == "critical" and d.alpha == pytest.approx(2 / 3)
    assert d.r_or_c == pytest.approx((9 / 40) ** (1 / 3), rel=1e-14)
    assert d.r_or_c == pytest.approx(0.608, abs=5e-4)
    c = A.predict(1.0, "continuous")
    assert c.r_or_c == pytest.approx(0.5 * 1.5 ** (2 / 3), rel=1e-14)
    assert c.r_or_c == pytest.approx(0.6552, abs=1e-4)
    # reported rounding of the discrete prediction at T = 1e5
    assert d.growth(1e5) == pytest.approx(1309.8, abs=1.0)


def test_predict_supercritical_and_subcritical():
    p = A.predict(1.02, "discrete")
    assert p.regime == "supercritical" and p.alpha == 1.0
    assert p.r_or_c == pytest.approx(0.008)
    assert p.growth(1e5) == pytest.approx(800.0)
    assert p.wave_rate == pytest.approx(0.8 * 0.02)
    assert p.lost_rate == pytest.approx(2.5 * 0.008**2)
    assert p.lost_intercept == pytest.approx(1.02 / 0.016)
    assert A.predict(1.02, "continuous").r_or_c == pytest.approx(0.01)
    s = A.predict(0.4382, "discrete")
    assert s.regime == "subcritical" and s.alpha == 0.5
    assert s.growth(1e5) == pytest.approx(158.1, abs=0.2)
    assert s.r_or_c == A.predict(0.4382, "continuous").r_or_c


def test_prediction_json_round_trip():
    import json

    d = json.loads(A.predict(1.02, "continuous").to_json())
    assert d["regime"] == "supercritical" and d["r_or_c"] == pytest.approx(0.01)


def test_balance_matches_at_two_thirds():
    c = 0.5 * 1.5 ** (2 / 3)
    (c1, e1), (c2, e2) = A.critical_exponent_balance(2 / 3, c)
    assert e1 == pytest.approx(-2 / 3) and e2 == pytest.approx(-2 / 3)
    assert c1 == pytest.approx(c2, rel=1e-12)


def test_balance_exponent_mismatch():
    (_, e1), (_, e2) = A.critical_exponent_balance(0.6, 1.0)
    assert e1 == pytest.approx(-0.6) and e2 == pytest.approx(-0.8)


@pytest.mark.parametrize("mode", ["continuous", "discrete"])
def test_balance_coefficient_root(mode):
    def gap(c):
        (c1, _), (c2, _) = A.critical_exponent_balance(2 / 3, c, mode)
        return c1 - c2

    root = brentq(gap, 0.1, 3.0, xtol=1e-15)
    assert root == pytest.approx(A.critical_constant(mode), abs=1e-12)
    assert root == pytest.approx(A.predict(1.0, mode).r_or_c, abs=1e-12)


def test_balance_rejects_bad_exponent():
    with pytest.raises(ValueError):
        A.critical_exponent_balance(0.4, 1.0)
