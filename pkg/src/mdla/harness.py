"""Ensemble runs, statistics against the predictions, and report output."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analytics
from .core import (
    ModelParams,
    Trajectory,
    init_field,
    init_field_with_profile,
    profiles_to_csv,
    run_rng,
    trajectories_to_csv,
    trajectories_to_json,
    wave_profile,
)
from .simulator import fit_wave_rate, front_profile_estimate, simulate

logger = logging.getLogger(__name__)

INIT_UNIFORM = "uniform"
INIT_WAVE = "wave"


class EnsembleError(RuntimeError):
    def __init__(self, msg, completed):
        super().__init__(msg)
        self.completed = completed


@dataclass
class ExperimentSpec:
    params: ModelParams
    runs: int = 100
    init: str = INIT_UNIFORM
    # decay rate of the wave initialisation; defaults to the predicted 2 * speed
    wave_rate: Optional[float] = None
    profile_width: int = 0
    out: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.init not in (INIT_UNIFORM, INIT_WAVE):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == INIT_WAVE and self.params.mu <= 1:
            raise ValueError("wave initialisation needs mu > 1")
        if self.profile_width < 0 or self.workers < 1:
            raise ValueError("profile_width must be >= 0 and workers >= 1")

    def resolved_wave_rate(self) -> float:
        if self.wave_rate is not None:
            return self.wave_rate
        return analytics.predict(self.params.mu, self.params.time_mode).wave_rate


def initial_deficit(spec: ExperimentSpec) -> float:
    """Expected shortfall of the initial field against uniform density."""
    if spec.init != INIT_WAVE:
        return 0.0
    return spec.params.mu / math.expm1(spec.resolved_wave_rate())


def run_one(spec: ExperimentSpec, run_id: int) -> Trajectory:
    p = spec.params
    rng = run_rng(p.seed, run_id)
    if spec.init == INIT_WAVE:
        field_ = init_field_with_profile(p, wave_profile(p.mu, spec.resolved_wave_rate()), rng)
    else:
        field_ = init_field(p, rng)
    return simulate(p, field_, rng=rng, run_id=run_id, profile_width=spec.profile_width)


def _run_chunk(spec, ids):
    return [run_one(spec, k) for k in ids]


def run_ensemble(spec: ExperimentSpec, run_ids: Optional[Sequence[int]] = None) -> list:
    """Run every replica and return trajectories ordered by run id."""
    ids = list(range(spec.runs)) if run_ids is None else list(run_ids)
    done: dict = {}
    try:
        if spec.workers == 1 or len(ids) == 1:
            for k in ids:
                done[k] = run_one(spec, k)
        else:
            chunks = [ids[i :: spec.workers] for i in range(spec.workers)]
            with ProcessPoolExecutor(spec.workers) as pool:
                for res in pool.map(_run_chunk, [spec] * len(chunks), chunks):
                    for tr in res:
                        done[tr.run_id] = tr
    except Exception as exc:
        completed = sorted(done)
        if spec.out:
            Path(spec.out).mkdir(parents=True, exist_ok=True)
            (Path(spec.out) / "partial_manifest.json").write_text(
                json.dumps({"completed": completed, "requested": ids, "error": repr(exc)})
            )
        raise EnsembleError(f"ensemble aborted after {len(completed)} runs: {exc}", completed) from exc
    trajs = [done[k] for k in sorted(done)]
    if spec.out:
        write_ensemble(trajs, spec.out)
    return trajs


def write_ensemble(trajs: Sequence[Trajectory], out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectories.csv").write_text(trajectories_to_csv(trajs))
    (out / "trajectories.json").write_text(trajectories_to_json(trajs))
    if any(tr.profiles for tr in trajs):
        (out / "profiles.csv").write_text(profiles_to_csv(trajs))


# -- statistics ------------------------------------------------------------


def _R_matrix(trajs):
    # run_id order makes bootstrap resamples independent of input order
    trajs = sorted(trajs, key=lambda tr: tr.run_id)
    times = np.asarray(trajs[0].times)
    for tr in trajs:
        if not np.array_equal(tr.times, times):
            raise ValueError("trajectories have different checkpoint grids")
    return times, np.array([tr.R for tr in trajs], dtype=float)


def _loglog_slope(t, y):
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def fit_exponent(trajs: Sequence[Trajectory], t_min: float, n_boot: int = 1000, seed: int = 0, level: float = 0.95):
    """Slope of ``log(mean R)`` against ``log t`` over checkpoints ``t >= t_min``.

    The confidence interval is the percentile interval of the slope over
    ``n_boot`` resamples of whole runs.
    """
    times, R = _R_matrix(trajs)
    sel = times >= t_min
    if sel.sum() < 4:
        raise ValueError(f"need at least 4 checkpoints at or after t_min={t_min}, have {int(sel.sum())}")
    t, R = times[sel], R[:, sel]
    mean = R.mean(axis=0)
    if np.any(mean <= 0):
        raise ValueError("ensemble mean of R must be positive on the fit range")
    alpha = _loglog_slope(t, mean)
    rng = np.random.default_rng(seed)
    n = R.shape[0]
    boots = []
    for _ in range(n_boot):
        m = R[rng.integers(0, n, n)].mean(axis=0)
        if np.all(m > 0):
            boots.append(_loglog_slope(t, m))
    q = (1 - level) / 2
    lo, hi = np.quantile(boots, [q, 1 - q]) if boots else (math.nan, math.nan)
    return alpha, (float(lo), float(hi))


def increments(trajs: Sequence[Trajectory], t0: float, t1: float):
    """Per-run ``(R(t1) - R(t0), L(t1) - L(t0))`` as two arrays."""
    dR = np.array([tr.value_at(t1, "R") - tr.value_at(t0, "R") for tr in trajs], dtype=float)
    dL = np.array([tr.value_at(t1, "L") - tr.value_at(t0, "L") for tr in trajs], dtype=float)
    return dR, dL


def lost_rate_estimate(trajs: Sequence[Trajectory], t0: float, t1: float):
    """Ensemble front speed and lost-particle rate over ``[t0, t1]``."""
    dR, dL = increments(trajs, t0, t1)
    span = t1 - t0
    return float(dR.mean() / span), float(dL.mean() / span)


def wave_rate_fit(trajs, mu, t_window, max_offset: Optional[int] = None) -> float:
    prof = front_profile_estimate(trajs, t_window)
    if max_offset is not None:
        prof = [(j, m) for j, m in prof if j <= max_offset]
    return fit_wave_rate(prof, mu)


@dataclass
class Report:
    mu: float
    time_mode: str
    regime: str
    runs: int
    horizon: float
    mean_R: float
    std_R: float
    se_R: float
    predicted_R: float
    z_score: float
    alpha_hat: Optional[float] = None
    alpha_ci: Optional[tuple] = None
    alpha_predicted: Optional[float] = None
    mean_L: Optional[float] = None
    predicted_L: Optional[float] = None
    measured_speed: Optional[float] = None
    measured_lost_rate: Optional[float] = None
    predicted_lost_rate: Optional[float] = None
    wave_rate_fit: Optional[float] = None
    wave_rate_predicted: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        def f(x, spec=".4g"):
            return "-" if x is None else format(x, spec)

        lines = [
            f"mu={self.mu:g}  mode={self.time_mode}  regime={self.regime}  runs={self.runs}  T={self.horizon:g}",
            f"{'quantity':<22}{'empirical':>14}{'predicted':>14}",
            f"{'mean R(T)':<22}{f(self.mean_R, '.2f'):>14}{f(self.predicted_R, '.2f'):>14}",
            f"{'std R(T)':<22}{f(self.std_R, '.2f'):>14}{'':>14}",
            f"{'std error':<22}{f(self.se_R, '.2f'):>14}{'':>14}",
            f"{'z-score':<22}{f(self.z_score, '.2f'):>14}{'':>14}",
        ]
        if self.alpha_hat is not None:
            ci = "" if self.alpha_ci is None else f" [{self.alpha_ci[0]:.3f}, {self.alpha_ci[1]:.3f}]"
            lines.append(f"{'exponent':<22}{f(self.alpha_hat, '.3f'):>14}{f(self.alpha_predicted, '.3f'):>14}{ci}")
        if self.mean_L is not None:
            lines.append(f"{'mean L(T)':<22}{f(self.mean_L, '.2f'):>14}{f(self.predicted_L, '.2f'):>14}")
        if self.measured_lost_rate is not None:
            lines.append(f"{'speed (2nd half)':<22}{f(self.measured_speed):>14}{'':>14}")
            lines.append(
                f"{'lost rate (2nd half)':<22}{f(self.measured_lost_rate):>14}{f(self.predicted_lost_rate):>14}"
            )
        if self.wave_rate_fit is not None:
            lines.append(f"{'wave decay rate':<22}{f(self.wave_rate_fit):>14}{f(self.wave_rate_predicted):>14}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def compare_report(trajs: Sequence[Trajectory], predictions: analytics.PredictionSet, t_min: Optional[float] = None,
                   profile_window: Optional[tuple] = None, init_deficit: float = 0.0) -> Report:
    """Summarise an ensemble at its final checkpoint against ``predictions``.

    Lost-particle and profile comparisons are added when they make sense:
    the lost rate over the second half of the run for ``mu >= 1``, and the
    wave decay rate when profile snapshots exist. ``init_deficit`` is the
    expected number of particles missing from the initial field relative to
    uniform density ``mu``; it is subtracted from the predicted lost count.
    """
    if not trajs:
        raise ValueError("empty ensemble")
    times, R = _R_matrix(trajs)
    T = float(times[-1])
    final = R[:, -1]
    n = final.size
    mean = float(final.mean())
    std = float(final.std(ddof=1)) if n > 1 else 0.0
    se = std / math.sqrt(n)
    pred = float(predictions.growth(T))
    z = (mean - pred) / se if se > 0 else math.nan
    rep = Report(predictions.mu, predictions.time_mode, predictions.regime, n, T, mean, std, se, pred, z,
                 alpha_predicted=predictions.alpha)
    if t_min is None:
        t_min = T / 16
    try:
        rep.alpha_hat, rep.alpha_ci = fit_exponent(trajs, t_min)
    except ValueError as exc:
        rep.notes.append(f"exponent fit skipped: {exc}")
    L = np.array([tr.L[-1] for tr in trajs], dtype=float)
    rep.mean_L = float(L.mean())
    if predictions.regime != analytics.SUBCRITICAL:
        speed_T = float(predictions.speed(T))
        rep.predicted_L = analytics.lost_total(float(predictions.growth(T)), predictions.mu, speed_T) - init_deficit
        half = [t for t in times if t >= T / 2]
        if len(half) >= 2:
            speed, rate = lost_rate_estimate(trajs, half[0], T)
            rep.measured_speed, rep.measured_lost_rate = speed, rate
            rep.predicted_lost_rate = analytics.lost_rate(max(speed, 0.0), predictions.time_mode)
        rep.wave_rate_predicted = 2.0 * speed_T
        if any(tr.profiles for tr in trajs):
            window = profile_window or (T / 8, T)
            try:
                rep.wave_rate_fit = wave_rate_fit(trajs, predictions.mu, window)
            except (ValueError, RuntimeError) as exc:
                rep.notes.append(f"profile fit skipped: {exc}")
    return rep


def write_report(rep: Report, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(rep.to_json())
    (out / "report.txt").write_text(rep.to_text())


# -- config ----------------------------------------------------------------


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys use underscores."""
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        if not k:
            raise ValueError(f"config line {n}: empty key")
        out[k.replace("-", "_")] = v
    return out


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
