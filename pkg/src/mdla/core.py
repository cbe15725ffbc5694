"""Shared state types, seeding, and trajectory I/O.

A run is described by :class:`ModelParams`, lives in a mutable
:class:`ParticleField` while it is simulated, and is recorded into a
:class:`Trajectory`.

Sites are indexed by their lattice position, so ``field.counts[i]`` is the
number of particles at site ``i`` for ``0 <= i <= x_max``; entries at or
behind the front are always zero.

Seeding: run ``k`` of an ensemble with master seed ``s`` draws from
``numpy.random.PCG64(SeedSequence(entropy=s, spawn_key=(k,)))``. Streams are
thus fixed by ``(s, k)`` alone and do not depend on scheduling order.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import analytics
from .analytics import CONTINUOUS, DISCRETE, TIME_MODES

TRAJECTORY_HEADER = ("run_id", "t", "R", "L", "D", "alive")
PROFILE_HEADER = ("run_id", "t", "offset", "count")


@dataclass
class ModelParams:
    mu: float
    time_mode: str = DISCRETE
    horizon: float = 1e5
    window_margin: float = 6.0
    seed: int = 0
    checkpoints: Optional[Sequence[float]] = None
    # explicit right-wall site; overrides the margin rule when given
    x_max: Optional[int] = None

    def __post_init__(self):
        if self.checkpoints is None:
            self.checkpoints = dyadic_checkpoints(self.horizon, self.time_mode)
        self.checkpoints = tuple(float(c) for c in self.checkpoints)
        self.validate()

    def validate(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.time_mode not in TIME_MODES:
            raise ValueError(f"time_mode must be one of {TIME_MODES}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.time_mode == DISCRETE and float(self.horizon) != int(self.horizon):
            raise ValueError("discrete horizon must be a whole number of steps")
        if self.window_margin < 4:
            raise ValueError("window_margin must be at least 4")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        ck = np.asarray(self.checkpoints, dtype=float)
        if ck.size == 0:
            raise ValueError("at least one checkpoint is required")
        if np.any(np.diff(ck) <= 0):
            raise ValueError("checkpoints must be strictly increasing")
        if ck[0] < 0 or ck[-1] > self.horizon:
            raise ValueError("checkpoints must lie in [0, horizon]")
        if self.time_mode == DISCRETE and np.any(ck != np.round(ck)):
            raise ValueError("discrete checkpoints must be whole step counts")
        if self.x_max is not None and self.x_max < 2:
            raise ValueError("x_max must be at least 2")

    def window_size(self) -> int:
        if self.x_max is not None:
            return int(self.x_max)
        pred = analytics.predict(self.mu, self.time_mode)
        return int(math.ceil(float(pred.growth(self.horizon)) + self.window_margin * math.sqrt(self.horizon)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(**d)


def dyadic_checkpoints(horizon: float, time_mode: str = DISCRETE, levels: int = 10) -> tuple:
    """``0``, ``horizon / 2**k`` for ``k = levels..1``, and ``horizon``."""
    pts = {0.0, float(horizon)}
    for k in range(1, levels + 1):
        t = horizon / 2**k
        if time_mode == DISCRETE:
            t = float(round(t))
        if t > 0:
            pts.add(float(t))
    return tuple(sorted(pts))


def run_rng(seed: int, run_id: int = 0) -> np.random.Generator:
    """Generator for one run; see the module docstring for the splitting rule."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ParticleField:
    front: int
    counts: np.ndarray
    x_max: int
    lost: int = 0
    dead: int = 0
    initial_mass: int = 0

    @property
    def alive(self) -> int:
        return int(self.counts.sum())

    def check_ledger(self):
        """Raise ``AssertionError`` if the bookkeeping identities are broken."""
        c = self.counts
        assert c.shape == (self.x_max + 1,)
        assert np.all(c >= 0), "negative occupation"
        assert not np.any(c[: self.front + 1]), "live particle at or behind the front"
        assert self.dead == self.front + self.lost, "D != R + L"
        assert self.initial_mass == self.alive + self.dead, "mass ledger does not close"

    def copy(self) -> "ParticleField":
        return ParticleField(self.front, self.counts.copy(), self.x_max, self.lost, self.dead, self.initial_mass)


def init_field_with_profile(params: ModelParams, profile: Callable, rng=None) -> ParticleField:
    """Independent Poisson occupations with site-dependent means ``profile(i)``.

    ``profile`` is called once with the integer array of sites ``1..x_max``
    and must return means in ``[0, mu]``.
    """
    x_max = params.window_size()
    if x_max < 2:
        raise ValueError("window is empty; horizon too small")
    if rng is None:
        rng = run_rng(params.seed)
    sites = np.arange(1, x_max + 1)
    means = np.broadcast_to(np.asarray(profile(sites), dtype=float), sites.shape)
    if np.any(means < 0) or np.any(~np.isfinite(means)):
        raise ValueError("profile must return finite non-negative means")
    if np.any(means > params.mu * (1 + 1e-12)):
        raise ValueError("profile mean exceeds mu")
    counts = np.zeros(x_max + 1, dtype=np.int64)
    counts[1:] = rng.poisson(means)
    return ParticleField(0, counts, x_max, 0, 0, int(counts.sum()))


def init_field(params: ModelParams, rng=None) -> ParticleField:
    """I.i.d. Poisson(mu) occupations on sites ``1..x_max``, empty aggregate at 0."""
    return init_field_with_profile(params, lambda i: params.mu, rng)


def wave_profile(mu: float, rate: float) -> Callable:
    """``i -> mu * (1 - exp(-rate * i))``."""
    return lambda i: -mu * np.expm1(-rate * np.asarray(i, dtype=float))


@dataclass
class Trajectory:
    run_id: int
    params: ModelParams
    times: list = field(default_factory=list)
    R: list = field(default_factory=list)
    L: list = field(default_factory=list)
    D: list = field(default_factory=list)
    alive: list = field(default_factory=list)
    # (t, counts at offsets 1..width); -1 marks offsets beyond the wall
    profiles: list = field(default_factory=list)
    # mean-field hybrid runs only: step index of each front advance
    advance_steps: Optional[np.ndarray] = None

    @property
    def records(self) -> list:
        return list(zip(self.times, self.R, self.L, self.D, self.alive))

    def append(self, t, R, L, D, alive):
        if self.times and t < self.times[-1]:
            raise ValueError(f"checkpoint time {t} precedes last recorded time {self.times[-1]}")
        self.times.append(float(t))
        self.R.append(int(R))
        self.L.append(int(L))
        self.D.append(int(D))
        self.alive.append(int(alive))

    def add_profile(self, t, counts):
        self.profiles.append((float(t), np.asarray(counts, dtype=np.int64)))

    def as_array(self) -> np.ndarray:
        """``(n_records, 5)`` float array of ``t, R, L, D, alive``."""
        return np.array(self.records, dtype=float).reshape(-1, 5)

    def value_at(self, t, column: str = "R"):
        idx = self.times.index(float(t))
        return getattr(self, column)[idx]

    def final(self) -> tuple:
        return self.records[-1]

    def check_invariants(self):
        R, L, D = (np.asarray(x) for x in (self.R, self.L, self.D))
        assert np.all(np.diff(self.times) >= 0)
        for x in (R, L, D):
            assert np.all(np.diff(x) >= 0)
        assert np.array_equal(D, R + L)


def record_checkpoint(field_: ParticleField, t: float, traj: Trajectory) -> Trajectory:
    traj.append(t, field_.front, field_.lost, field_.dead, field_.alive)
    return traj


# -- serialization ---------------------------------------------------------


def _fmt_t(t: float) -> str:
    return repr(float(t))


def trajectories_to_csv(trajs: Sequence[Trajectory]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for tr in trajs:
        for t, R, L, D, a in tr.records:
            w.writerow((tr.run_id, _fmt_t(t), R, L, D, a))
    return buf.getvalue()


def profiles_to_csv(trajs: Sequence[Trajectory]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for tr in trajs:
        for t, counts in tr.profiles:
            for j, c in enumerate(counts, start=1):
                if c < 0:
                    break
                w.writerow((tr.run_id, _fmt_t(t), j, int(c)))
    return buf.getvalue()


def trajectories_to_json(trajs: Sequence[Trajectory]) -> str:
    doc = {
        "params": trajs[0].params.to_dict() if trajs else None,
        "runs": [
            {"run_id": tr.run_id, "records": [list(r) for r in tr.records]}
            for tr in trajs
        ],
    }
    return json.dumps(doc, indent=1)


def read_trajectories_csv(text: str, params: Optional[ModelParams] = None) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise ValueError("not a trajectory CSV: bad header")
    by_run: dict = {}
    for row in rows[1:]:
        rid = int(row[0])
        tr = by_run.get(rid)
        if tr is None:
            tr = by_run[rid] = Trajectory(rid, params)
        tr.append(float(row[1]), *(int(x) for x in row[2:6]))
    return [by_run[k] for k in sorted(by_run)]


def read_profiles_csv(text: str, trajs: Sequence[Trajectory], width: Optional[int] = None):
    """Attach profile snapshots from CSV text to the matching trajectories."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != PROFILE_HEADER:
        raise ValueError("not a profile CSV: bad header")
    acc: dict = {}
    for row in rows[1:]:
        key = (int(row[0]), float(row[1]))
        acc.setdefault(key, []).append((int(row[2]), int(row[3])))
    w = width or max((max(j for j, _ in v) for v in acc.values()), default=0)
    index = {tr.run_id: tr for tr in trajs}
    for (rid, t), items in sorted(acc.items()):
        counts = np.full(w, -1, dtype=np.int64)
        for j, c in items:
            counts[j - 1] = c
        index[rid].add_profile(t, counts)
    return trajs
