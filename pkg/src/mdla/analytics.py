"""Closed-form growth predictions for one-dimensional multi-particle DLA.

Everything here is pure and cheap. The subcritical constant ``r(mu)`` is the
root of a one-dimensional implicit equation; the critical and supercritical
constants come from balancing two expressions for the rate at which
particles are swallowed without contributing to growth.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize, special

CONTINUOUS = "continuous"
DISCRETE = "discrete"
TIME_MODES = (CONTINUOUS, DISCRETE)

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"

# Coefficient of r**2 in the expected lost-particle rate.
LOST_RATE_COEF = {CONTINUOUS: 2.0, DISCRETE: 2.5}

_QUAD_UPPER = 40.0
_QUAD_TOL = 1e-12


def _check_mode(time_mode):
    if time_mode not in TIME_MODES:
        raise ValueError(f"time_mode must be one of {TIME_MODES}, got {time_mode!r}")


def regime_of(mu: float, tol: float = 1e-12) -> str:
    if mu <= 0:
        raise ValueError("mu must be positive")
    if abs(mu - 1.0) <= tol:
        return CRITICAL
    return SUBCRITICAL if mu < 1.0 else SUPERCRITICAL


def mu_of_r(r: float) -> float:
    """Density whose subcritical growth constant is ``r``.

    Integrates ``exp(-x) * exp(-x**2 / (2 r**2))`` over ``[0, inf)`` with
    adaptive Gauss-Kronrod quadrature on ``[0, 40]``; the discarded tail is
    below ``exp(-40)``.
    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    inv = 0.5 / (r * r)
    val, _ = integrate.quad(
        lambda x: math.exp(-x - inv * x * x),
        0.0,
        _QUAD_UPPER,
        epsabs=_QUAD_TOL,
        epsrel=_QUAD_TOL,
        limit=400,
    )
    return val


def mu_of_r_closed_form(r: float) -> float:
    """Same quantity as :func:`mu_of_r` via the scaled complementary error function."""
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    return r * math.sqrt(math.pi / 2.0) * float(special.erfcx(r / math.sqrt(2.0)))


def solve_r_subcritical(mu: float, xtol: float = 1e-8) -> float:
    """Unique positive ``r`` with ``mu_of_r(r) == mu``, for ``0 < mu < 1``."""
    if not 0.0 < mu < 1.0:
        raise ValueError(f"no subcritical root for mu={mu}; need 0 < mu < 1")
    # 1 - mu_of_r(r) ~ 1/r**2 for large r and mu_of_r(r) ~ r*sqrt(pi/2) for small r
    lo = min(0.5 * mu, 1e-3)
    hi = max(2.0 / math.sqrt(1.0 - mu), 2.0)
    f = lambda r: mu_of_r(r) - mu
    while f(lo) > 0:
        lo *= 0.5
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def stationary_wave(mu: float, r: float, i):
    """Mean occupation ``i`` sites ahead of a front moving at constant speed ``r``."""
    if r <= 0:
        raise ValueError("r must be positive")
    i = np.asarray(i, dtype=float)
    if np.any(i < 0):
        raise ValueError("offset must be non-negative")
    out = -mu * np.expm1(-2.0 * r * i)
    return float(out) if out.ndim == 0 else out


def lost_total(R: float, mu: float, r: float) -> float:
    """Expected number of lost particles once the stationary wave has formed."""
    if r <= 0:
        raise ValueError("r must be positive")
    return R * (mu - 1.0) + mu / (2.0 * r)


def lost_rate(r: float, time_mode: str) -> float:
    _check_mode(time_mode)
    if r < 0:
        raise ValueError("r must be non-negative")
    return LOST_RATE_COEF[time_mode] * r * r


def critical_constant(time_mode: str) -> float:
    """``c`` solving ``1/(4c) = k * c**2 * 4/9`` where ``k`` is the lost-rate coefficient."""
    _check_mode(time_mode)
    return (9.0 / (16.0 * LOST_RATE_COEF[time_mode])) ** (1.0 / 3.0)


def supercritical_speed(mu: float, time_mode: str) -> float:
    """Linear speed balancing ``r * eps`` against ``k * r**2``."""
    _check_mode(time_mode)
    return (mu - 1.0) / LOST_RATE_COEF[time_mode]


@dataclass(frozen=True)
class PredictionSet:
    mu: float
    regime: str
    time_mode: str
    r_or_c: float
    alpha: float
    wave_rate: Optional[float] = None
    lost_rate: Optional[float] = None
    lost_intercept: Optional[float] = None

    def growth(self, t):
        """Predicted aggregate size ``c * t**alpha``."""
        return self.r_or_c * np.power(t, self.alpha)

    def speed(self, t):
        """Instantaneous predicted front speed at time ``t``."""
        return self.r_or_c * self.alpha * np.power(t, self.alpha - 1.0)

    def wave_rate_at(self, t) -> float:
        return 2.0 * float(self.speed(t))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def predict(mu: float, time_mode: str) -> PredictionSet:
    _check_mode(time_mode)
    regime = regime_of(mu)
    if regime == SUBCRITICAL:
        return PredictionSet(mu, regime, time_mode, solve_r_subcritical(mu), 0.5)
    if regime == CRITICAL:
        # speed, and hence wave and lost rates, depend on t here; see PredictionSet.speed
        return PredictionSet(mu, regime, time_mode, critical_constant(time_mode), 2.0 / 3.0)
    r = supercritical_speed(mu, time_mode)
    return PredictionSet(
        mu,
        regime,
        time_mode,
        r,
        1.0,
        wave_rate=2.0 * r,
        lost_rate=lost_rate(r, time_mode),
        lost_intercept=mu / (2.0 * r),
    )


def critical_exponent_balance(alpha: float, c: float, time_mode: str = CONTINUOUS):
    """Compare the two expressions for the lost-particle rate under ``R = c t**alpha``.

    Returns ``((coef_1, exp_1), (coef_2, exp_2))``: the first pair comes from
    differentiating ``L ~ 1/(2r)``, the second from ``dL/dt ~ k r**2``. Both
    pairs coincide only at ``alpha = 2/3`` and ``c = critical_constant(mode)``.
    """
    _check_mode(time_mode)
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (1/2, 1)")
    if c <= 0:
        raise ValueError("c must be positive")
    k = LOST_RATE_COEF[time_mode]
    first = ((1.0 - alpha) / (2.0 * c * alpha), -alpha)
    second = (k * c * c * alpha * alpha, 2.0 * alpha - 2.0)
    return first, second
