"""Exact stochastic dynamics of the particle cloud and the sticky front.

Two steppers share one :class:`~mdla.core.ParticleField`:

* :func:`run_continuous` is event-driven kinetic Monte Carlo. Every particle
  jumps at rate 1, so the next event comes after an exponential time with
  rate equal to the number of live particles, and the jumping site is chosen
  proportionally to its occupation through a Fenwick tree.
* :func:`run_discrete` moves every particle once per step, sampling the
  number of left-movers at each site as Binomial(N, 1/2).

The right wall at ``x_max`` is reflecting in the sense that a right jump from
it is suppressed; this keeps product Poisson(mu) stationary at the wall.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .analytics import CONTINUOUS, DISCRETE
from .core import ModelParams, ParticleField, Trajectory, run_rng

logger = logging.getLogger(__name__)

DEFAULT_PROFILE_WIDTH = 512
_CHUNK_WORDS = 1 << 20


def _state_from_field(field: ParticleField) -> np.ndarray:
    st = np.zeros(K.STATE_LEN, dtype=np.int64)
    st[K.S_FRONT] = field.front
    st[K.S_LOST] = field.lost
    st[K.S_DEAD] = field.dead
    st[K.S_ALIVE] = field.alive
    return st


def _store_state(field: ParticleField, st: np.ndarray):
    field.front = int(st[K.S_FRONT])
    field.lost = int(st[K.S_LOST])
    field.dead = int(st[K.S_DEAD])
    if field.front >= field.x_max - 1 and field.x_max > 2:
        logger.warning("front reached the right wall (x_max=%d); widen the window", field.x_max)


def _fill_trajectory(traj: Trajectory, ck, rec, prof, profile_width):
    for k, t in enumerate(ck):
        traj.append(t, *rec[k])
        if profile_width:
            traj.add_profile(t, prof[k])
    return traj


def _prepare(field, params, mode, rng, run_id, profile_width):
    if params.time_mode != mode:
        raise ValueError(f"params.time_mode is {params.time_mode!r}, expected {mode!r}")
    if field.counts.dtype != np.int64:
        field.counts = field.counts.astype(np.int64)
    if rng is None:
        rng = run_rng(params.seed, run_id)
    ck = np.asarray(params.checkpoints, dtype=float)
    rec = np.zeros((ck.size, 4), dtype=np.int64)
    prof = np.zeros((ck.size, profile_width), dtype=np.int64)
    return rng, ck, rec, prof


def _refill(words, pos, rng, minimum):
    fresh = rng.bit_generator.random_raw(max(_CHUNK_WORDS, minimum))
    return np.concatenate([words[pos:], fresh])


def run_discrete(
    field: ParticleField,
    params: ModelParams,
    rng: Optional[np.random.Generator] = None,
    run_id: int = 0,
    profile_width: int = 0,
    aggregate: bool = True,
) -> Trajectory:
    """Simulate ``params.horizon`` synchronous steps, mutating ``field``.

    Checkpoint ``k`` is the state after ``k`` full steps. If the cloud dies
    out, the remaining checkpoints repeat the frozen state.
    """
    rng, ck, rec, prof = _prepare(field, params, DISCRETE, rng, run_id, profile_width)
    st = _state_from_field(field)
    bits = np.zeros(2, dtype=np.uint64)
    left = np.zeros_like(field.counts)
    ck_steps = ck.astype(np.int64)
    words = np.empty(0, dtype=np.uint64)
    pos = 0
    horizon = int(params.horizon)
    while not st[K.S_DONE]:
        need = int(st[K.S_ALIVE]) // 64 + 2
        if words.size - pos < need:
            words, pos = _refill(words, pos, rng, need), 0
        pos = K.discrete_kernel(
            words, pos, bits, field.counts, left, st, field.x_max, horizon, ck_steps, rec, prof, aggregate
        )
    _store_state(field, st)
    return _fill_trajectory(Trajectory(run_id, params), ck, rec, prof, profile_width)


def run_continuous(
    field: ParticleField,
    params: ModelParams,
    rng: Optional[np.random.Generator] = None,
    run_id: int = 0,
    profile_width: int = 0,
    aggregate: bool = True,
) -> Trajectory:
    """Kinetic Monte Carlo up to real time ``params.horizon``, mutating ``field``."""
    rng, ck, rec, prof = _prepare(field, params, CONTINUOUS, rng, run_id, profile_width)
    st = _state_from_field(field)
    tree = K.fenwick_build(field.counts, field.x_max)
    tnow = np.zeros(1)
    words = np.empty(0, dtype=np.uint64)
    pos = 0
    while not st[K.S_DONE]:
        if words.size - pos < 2:
            words, pos = _refill(words, pos, rng, 2), 0
        pos = K.continuous_kernel(
            words, pos, field.counts, tree, st, tnow, field.x_max, float(params.horizon), ck, rec, prof, aggregate
        )
    _store_state(field, st)
    logger.debug("run %d: %d events", run_id, st[K.S_STEP])
    return _fill_trajectory(Trajectory(run_id, params), ck, rec, prof, profile_width)


def simulate(params: ModelParams, field: ParticleField, **kw) -> Trajectory:
    if params.time_mode == DISCRETE:
        return run_discrete(field, params, **kw)
    return run_continuous(field, params, **kw)


# -- single-event drivers, used for scripted traces ------------------------


def apply_discrete_step(field: ParticleField, left, aggregate: bool = True) -> ParticleField:
    """Advance ``field`` one discrete step with prescribed left-mover counts.

    ``left[i]`` is the number of particles at site ``i`` that jump left; all
    other particles jump right.
    """
    left = np.asarray(left, dtype=np.int64)
    if left.shape != field.counts.shape:
        raise ValueError("left must have the same shape as field.counts")
    if np.any(left < 0) or np.any(left > field.counts):
        raise ValueError("left-mover counts must lie in [0, counts[i]]")
    st = _state_from_field(field)
    K.discrete_apply(field.counts, left.copy(), st, field.x_max, aggregate)
    _store_state(field, st)
    return field


def apply_jump(field: ParticleField, site: int, left: bool, aggregate: bool = True) -> ParticleField:
    """Make one particle at ``site`` jump; the continuous-time event rule."""
    if not field.front < site <= field.x_max or field.counts[site] == 0:
        raise ValueError(f"no live particle at site {site}")
    st = _state_from_field(field)
    tree = K.fenwick_build(field.counts, field.x_max)
    K.continuous_apply(field.counts, tree, st, field.x_max, site, bool(left), aggregate)
    _store_state(field, st)
    return field


# -- observables -----------------------------------------------------------


def front_profile_estimate(trajs: Sequence[Trajectory], t_window) -> list:
    """Mean occupation ``j`` sites ahead of the front, pooled over runs and snapshots.

    Only snapshots with ``t_window[0] <= t <= t_window[1]`` are used. An offset
    contributes only from snapshots where it lies inside the wall; offsets
    never inside the wall are dropped.
    """
    t0, t1 = t_window
    rows = [c for tr in trajs for (t, c) in tr.profiles if t0 <= t <= t1]
    if not rows:
        raise ValueError(f"no profile snapshots in window {t_window}")
    width = max(len(c) for c in rows)
    sums = np.zeros(width)
    n = np.zeros(width)
    for c in rows:
        valid = c >= 0
        sums[: len(c)][valid] += c[valid]
        n[: len(c)][valid] += 1
    keep = n > 0
    offsets = np.arange(1, width + 1)[keep]
    means = sums[keep] / n[keep]
    return list(zip(offsets.tolist(), means.tolist()))


def fit_wave_rate(profile, mu: float, offsets=None) -> float:
    """Least-squares decay rate ``c`` of ``mu * (1 - exp(-c j))`` through a profile."""
    from scipy.optimize import curve_fit

    j, m = (np.asarray(x, dtype=float) for x in zip(*profile))
    if offsets is not None:
        sel = np.isin(j, offsets)
        j, m = j[sel], m[sel]
    model = lambda x, c: -mu * np.expm1(-c * x)
    # start from the slope at the first offset
    c0 = max(m[0] / (mu * j[0]), 1e-6) if m[0] > 0 else 1e-2
    (c,), _ = curve_fit(model, j, m, p0=[c0], bounds=(0, np.inf))
    return float(c)


def dispersion_diagnostic(samples) -> float:
    """Variance-to-mean ratio of occupation samples (1 for Poisson counts)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 30:
        raise ValueError("need at least 30 samples")
    m = x.mean()
    if m == 0:
        raise ZeroDivisionError("index of dispersion undefined for zero mean")
    return float(x.var(ddof=1) / m)
