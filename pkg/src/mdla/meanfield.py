"""Mean-field Poisson intensities ahead of the front.

Conditionally on the front history, site occupations are independent
Poisson variables whose means evolve by the generator of a unit-rate simple
random walk, ``d lam_i/dt = lam_{i-1}/2 + lam_{i+1}/2 - lam_i``, with
``lam = 0`` at and behind the front and ``lam = mu`` pinned at the wall.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from .core import ModelParams, Trajectory, run_rng

DEFAULT_DT = 0.1
MAX_DT = 0.5


@dataclass
class IntensityField:
    front: int
    lam: np.ndarray  # indexed by site, 0..x_max
    mu: float
    s: float = 0.0

    @property
    def x_max(self) -> int:
        return self.lam.shape[0] - 1

    @classmethod
    def uniform(cls, mu: float, x_max: int, front: int = 0) -> "IntensityField":
        lam = np.full(x_max + 1, float(mu))
        lam[: front + 1] = 0.0
        return cls(front, lam, float(mu))

    def mass(self) -> float:
        return float(self.lam[self.front + 1 :].sum())

    def copy(self) -> "IntensityField":
        return IntensityField(self.front, self.lam.copy(), self.mu, self.s)

    def to_csv_rows(self):
        return [(self.s, i, float(v)) for i, v in enumerate(self.lam) if i > self.front]


def _check_dt(dt):
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt={dt} outside the explicit stability range (0, {MAX_DT}]")


def generator(lam: np.ndarray, front: int, ghost: float = 0.0) -> np.ndarray:
    """Right-hand side of the intensity ODE on sites ``front+1 .. x_max-1``.

    ``ghost`` is the value assumed at the front site; 0 for an absorbing
    front, ``mu`` to emulate no front at all.
    """
    d = np.zeros_like(lam)
    lo, hi = front + 1, lam.shape[0] - 1
    left = lam[lo - 1 : hi - 1].copy()
    left[0] = ghost
    d[lo:hi] = 0.5 * left + 0.5 * lam[lo + 1 : hi + 1] - lam[lo:hi]
    return d


def step_intensity(field: IntensityField, dt: float, nsteps: int = 1) -> IntensityField:
    """``nsteps`` explicit Euler steps with the front held fixed. Mutates ``field``."""
    _check_dt(dt)
    K.intensity_steps(field.lam, field.front, field.x_max, field.mu, dt, nsteps)
    field.s += dt * nsteps
    return field


def _window(params: ModelParams) -> int:
    return params.window_size()


def run_hybrid(params: ModelParams, dt: float = DEFAULT_DT, run_id: int = 0, rng=None):
    """Intensity ODE coupled to a random front advancing at rate ``lam[R+1] / 2``.

    In each step of length ``dt`` the front advances with probability
    ``lam[R+1] * dt / 2`` (first-order thinning), after which the newly
    covered site is zeroed. Returns ``(trajectory, final_field)``; the
    trajectory's lost/dead/alive columns are zero because the mean-field
    picture does not track particles.
    """
    _check_dt(dt)
    if 0.5 * params.mu * dt > 0.05:
        raise ValueError("dt too large for thinning: need mu * dt / 2 <= 0.05")
    if rng is None:
        rng = run_rng(params.seed, run_id)
    x_max = _window(params)
    field = IntensityField.uniform(params.mu, x_max)
    nsteps = int(round(params.horizon / dt))
    ck_steps = np.round(np.asarray(params.checkpoints) / dt).astype(np.int64)
    rec = np.zeros(ck_steps.size, dtype=np.int64)
    st = np.zeros(1, dtype=np.int64)
    adv = np.zeros(x_max + 1, dtype=np.int64)
    uniforms = rng.random(nsteps)
    K.hybrid_kernel(field.lam, uniforms, st, x_max, field.mu, dt, ck_steps, rec, adv)
    field.front = int(st[0])
    field.s = nsteps * dt
    traj = Trajectory(run_id, params)
    for t, R in zip(params.checkpoints, rec):
        traj.append(t, R, 0, R, 0)
    traj.advance_steps = adv[: field.front].copy()
    return traj, field


def front_from_advances(advance_steps, dt: float = DEFAULT_DT) -> Callable[[float], int]:
    """Front path that moves one site after each listed step, for :func:`run_with_front`."""
    adv = np.asarray(advance_steps)

    def front(t):
        k = int(round(t / dt))
        return int(np.searchsorted(adv, k, side="left"))

    return front


def run_with_front(front: Callable[[float], int], params: ModelParams, dt: float = DEFAULT_DT,
                   x_max: int | None = None) -> IntensityField:
    """Integrate intensities up to ``params.horizon`` under a prescribed front path.

    ``front(t)`` is evaluated at the start of every step and must be a
    non-decreasing integer path. A front beyond the wall empties the field.
    """
    _check_dt(dt)
    if x_max is None:
        x_max = _window(params)
    field = IntensityField.uniform(params.mu, x_max)
    nsteps = int(round(params.horizon / dt))
    prev = 0
    for k in range(nsteps):
        R = front(k * dt)
        if R < prev:
            raise ValueError(f"front decreased from {prev} to {R} at t={k * dt}")
        prev = R
        if R >= x_max:
            field.lam[:] = 0.0
            field.front = int(R)
            field.s = params.horizon
            return field
        if R != field.front:
            field.lam[: R + 1] = 0.0
            field.front = int(R)
        step_intensity(field, dt)
    return field


def stationary_recurrence(mu: float, r: float, n_sites: int) -> np.ndarray:
    """Fixed point of the intensity ODE seen from a front moving at speed ``r``.

    In the co-moving frame the ODE gains a drift term ``r g'``; with a
    central difference this gives the recurrence
    ``(1 + r) g[j+1] - 2 g[j] + (1 - r) g[j-1] = 0`` with ``g[0] = 0`` and
    ``g`` tending to ``mu``.
    The bounded solution is ``mu * (1 - q**j)`` where ``q`` is the root in
    ``(0, 1)`` of the characteristic polynomial, returned for ``j = 0..n-1``.
    """
    a, b, c = 1.0 + r, -2.0, 1.0 - r
    roots = np.roots([a, b, c])
    q = float(min(roots, key=abs).real)
    j = np.arange(n_sites)
    return mu * (1.0 - q**j)


def intensities_to_csv(fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("s", "i", "lambda"))
    for f in fields:
        w.writerows(f.to_csv_rows())
    return buf.getvalue()
