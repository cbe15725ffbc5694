"""Heat equation with a Stefan-type moving front, in the front-attached frame.

The density ``mu(x, s)`` solves ``mu_s = mu_xx / 2`` for ``x > r(s)`` with
``mu = 0`` at the front, ``mu -> mu_inf`` far away, and the front moves with
``dr/ds = mu_x(r, s) / 2``. In the coordinate ``xi = x - r(s)`` the domain is
fixed and the equation gains the advection term ``v mu_xi``.

Time stepping is Crank-Nicolson on diffusion and advection together, with
the front speed taken at the half step from a predictor-corrector pass. The
front gradient uses a three-point one-sided difference.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special

from .analytics import solve_r_subcritical

DEFAULT_XI_MAX = 12.0
DEFAULT_DXI = 0.01
DEFAULT_DS = 1e-4
DEFAULT_S0 = 1e-3
MU_INF_MAX = 0.99


class StefanError(RuntimeError):
    pass


def self_similar_profile(mu: float, x, r: Optional[float] = None):
    """Similarity profile of the density as a function of ``x / sqrt(s)``.

    ``mu * int_r^x exp(-y^2/2) dy / int_r^inf exp(-y^2/2) dy`` for ``x >= r``
    and ``0`` below the front, evaluated through ``erfcx`` so it stays
    accurate in the tail.
    """
    if not 0 < mu < 1:
        raise ValueError("similarity solution needs 0 < mu < 1")
    if r is None:
        r = solve_r_subcritical(mu)
    x = np.asarray(x, dtype=float)
    xc = np.maximum(x, r)
    a = special.erfcx(xc / math.sqrt(2.0)) * np.exp(0.5 * (r * r - xc * xc))
    out = mu * (1.0 - a / special.erfcx(r / math.sqrt(2.0)))
    out = np.where(x <= r, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass
class StefanState:
    s: float
    r: float
    dxi: float
    mu_profile: np.ndarray
    mu_inf: float
    history: list = field(default_factory=list)

    @property
    def grid(self) -> np.ndarray:
        return self.dxi * np.arange(self.mu_profile.size)

    @property
    def xi_max(self) -> float:
        return self.dxi * (self.mu_profile.size - 1)

    def front_gradient(self) -> float:
        m = self.mu_profile
        return (-3.0 * m[0] + 4.0 * m[1] - m[2]) / (2.0 * self.dxi)

    def front_speed(self) -> float:
        return 0.5 * self.front_gradient()

    def copy(self) -> "StefanState":
        return StefanState(self.s, self.r, self.dxi, self.mu_profile.copy(), self.mu_inf, list(self.history))


def _grid(xi_max, dxi):
    n = int(round(xi_max / dxi))
    if n < 3 or abs(n * dxi - xi_max) > 1e-9 * xi_max:
        raise ValueError("xi_max must be a multiple of dxi with at least 3 cells")
    return n


def similarity_state(mu_inf: float, s: float, xi_max: float = DEFAULT_XI_MAX, dxi: float = DEFAULT_DXI) -> StefanState:
    """Exact self-similar solution sampled at time ``s``."""
    n = _grid(xi_max, dxi)
    r = solve_r_subcritical(mu_inf)
    sq = math.sqrt(s)
    xi = dxi * np.arange(n + 1)
    prof = self_similar_profile(mu_inf, (xi + r * sq) / sq, r)
    prof[0] = 0.0
    prof[-1] = mu_inf
    return StefanState(s, r * sq, dxi, prof, mu_inf)


def step_state(mu_inf: float, xi_max: float = DEFAULT_XI_MAX, dxi: float = DEFAULT_DXI) -> StefanState:
    """Uniform density with the front condition switched on at ``s = 0``."""
    n = _grid(xi_max, dxi)
    prof = np.full(n + 1, float(mu_inf))
    prof[0] = 0.0
    return StefanState(0.0, 0.0, dxi, prof, mu_inf)


def _cn_solve(m, v, h, ds, mu_inf):
    """One Crank-Nicolson step of ``m_s = m_xx/2 + v m_x`` with Dirichlet ends."""
    n = m.size - 2  # interior unknowns
    lo = 0.5 / h**2 - v / (2 * h)
    di = -1.0 / h**2
    up = 0.5 / h**2 + v / (2 * h)
    rhs = m[1:-1] + 0.5 * ds * (lo * m[:-2] + di * m[1:-1] + up * m[2:])
    # implicit boundary contributions; m[0] = 0
    rhs[-1] += 0.5 * ds * up * mu_inf
    ab = np.empty((3, n))
    ab[0, :] = -0.5 * ds * up
    ab[1, :] = 1.0 - 0.5 * ds * di
    ab[2, :] = -0.5 * ds * lo
    out = np.empty_like(m)
    out[0] = 0.0
    out[-1] = mu_inf
    out[1:-1] = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    return out


def stefan_step(state: StefanState, ds: float) -> StefanState:
    """Advance the profile and the front by ``ds``. Mutates and returns ``state``."""
    if not ds > 0:
        raise ValueError("ds must be positive")
    if not 0 < state.mu_inf < 1:
        raise ValueError("Stefan solver requires 0 < mu_inf < 1")
    h = state.dxi
    v0 = state.front_speed()
    if v0 < 0:
        raise StefanError(f"negative front speed {v0} at s={state.s}")
    if v0 * h > 1.0:
        raise ValueError("cell Peclet number too large: refine dxi")
    pred = _cn_solve(state.mu_profile, v0, h, ds, state.mu_inf)
    v1 = 0.5 * (-3.0 * pred[0] + 4.0 * pred[1] - pred[2]) / (2.0 * h)
    v = 0.5 * (v0 + max(v1, 0.0))
    state.mu_profile = _cn_solve(state.mu_profile, v, h, ds, state.mu_inf)
    state.r += v * ds
    state.s += ds
    return state


def solve(state: StefanState, s_end: float, ds: float = DEFAULT_DS, record_every: int = 0) -> StefanState:
    """Step ``state`` to ``s_end``; the last step is shortened to land exactly."""
    k = 0
    while state.s < s_end - 1e-14 * max(1.0, s_end):
        step = min(ds, s_end - state.s)
        stefan_step(state, step)
        k += 1
        if record_every and k % record_every == 0:
            state.history.append((state.s, state.r))
    return state


def conservation_residual(state: StefanState) -> float:
    """Deficit of the mass balance: swallowed mass minus aggregate size.

    Zero for the exact solution at every ``s``.
    """
    deficit = np.trapezoid(state.mu_inf - state.mu_profile, dx=state.dxi)
    return float(deficit + state.mu_inf * state.r - state.r)


def profile_error(state: StefanState) -> float:
    """Max-norm distance to the similarity slice at the same time."""
    ref = similarity_state(state.mu_inf, state.s, state.xi_max, state.dxi)
    return float(np.max(np.abs(state.mu_profile - ref.mu_profile)))


def profile_to_csv(states) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("s", "xi", "mu"))
    for st in states:
        for xi, m in zip(st.grid, st.mu_profile):
            w.writerow((repr(st.s), repr(float(xi)), repr(float(m))))
    return buf.getvalue()
