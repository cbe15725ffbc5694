import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdla import _kernels as K
from mdla.core import ModelParams
from mdla.meanfield import (
    IntensityField,
    front_from_advances,
    generator,
    intensities_to_csv,
    run_hybrid,
    run_with_front,
    step_intensity,
)


def test_constant_is_harmonic_without_front():
    lam = np.full(50, 0.7)
    d = generator(lam, front=0, ghost=0.7)
    assert np.all(d == 0)


def test_front_drains_first_site():
    mu = 1.3
    lam = np.full(50, mu)
    lam[0] = 0.0
    assert generator(lam, 0)[1] == pytest.approx(-0.5 * mu)
    f = IntensityField.uniform(mu, 49)
    dt = 1e-3
    step_intensity(f, dt)
    assert (f.lam[1] - mu) / dt == pytest.approx(-0.5 * mu)
    assert np.all(f.lam[2:] == mu)


def test_linear_profile_interior_harmonic():
    lam = 0.01 * np.arange(40, dtype=float)
    d = generator(lam, 0)
    assert np.allclose(d[1:-1], 0.0, atol=1e-15)


@pytest.mark.parametrize("dt", [0.0, -0.1, 0.51])
def test_unstable_dt_rejected(dt):
    with pytest.raises(ValueError):
        step_intensity(IntensityField.uniform(1.0, 10), dt)


def test_mass_leaks_only_at_front():
    rng = np.random.default_rng(1)
    mu = 1.0
    f = IntensityField(3, np.concatenate([[0, 0, 0, 0], rng.uniform(0, mu, 60), [mu]]), mu)
    lam0 = f.lam.copy()
    dt = 0.05
    step_intensity(f, dt)
    interior = slice(f.front + 1, f.x_max)
    dmass = (f.lam[interior] - lam0[interior]).sum() / dt
    wall = 0.5 * (mu - lam0[f.x_max - 1])
    assert dmass - wall == pytest.approx(-0.5 * lam0[f.front + 1], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.01, 0.5), st.integers(1, 50))
def test_comparison_principle(seed, dt, nsteps):
    rng = np.random.default_rng(seed)
    mu = 1.0
    a = IntensityField(2, np.concatenate([[0, 0, 0], rng.uniform(0, mu, 30), [mu]]), mu)
    b = a.copy()
    b.lam[3:-1] += rng.uniform(0, 0.5, 30)
    step_intensity(a, dt, nsteps)
    step_intensity(b, dt, nsteps)
    assert np.all(a.lam <= b.lam + 1e-15)


def test_linear_in_mu():
    p1 = ModelParams(mu=0.6, time_mode="continuous", horizon=50, x_max=80)
    p2 = ModelParams(mu=1.2, time_mode="continuous", horizon=50, x_max=80)
    path = lambda t: int(t // 10)
    a = run_with_front(path, p1)
    b = run_with_front(path, p2)
    assert np.allclose(2 * a.lam, b.lam, rtol=1e-14, atol=0)


def _absorbed_survival(i, t, n, rng):
    # unit-rate continuous-time walk from i, killed on reaching 0
    jumps = rng.poisson(t, n)
    m = jumps.max()
    steps = rng.choice(np.array([-1, 1]), size=(n, m))
    steps[np.arange(m)[None, :] >= jumps[:, None]] = 0
    paths = i + np.cumsum(steps, axis=1)
    return float(np.mean(paths.min(axis=1) > 0))


@pytest.mark.parametrize("i", [1, 3, 6, 12])
def test_fixed_front_matches_absorbed_walk(i):
    mu, t, n = 1.0, 20.0, 10**5
    p = ModelParams(mu=mu, time_mode="continuous", horizon=t, x_max=200)
    lam = run_with_front(lambda s: 0, p, dt=0.005).lam
    surv = _absorbed_survival(i, t, n, np.random.default_rng(i))
    sigma = math.sqrt(surv * (1 - surv) / n)
    assert abs(lam[i] - mu * surv) < 3 * sigma


def test_front_beyond_wall_empties_field():
    p = ModelParams(mu=1.0, time_mode="continuous", horizon=5, x_max=30)
    f = run_with_front(lambda t: 10**9, p)
    assert np.all(f.lam == 0)


def test_decreasing_front_rejected():
    p = ModelParams(mu=1.0, time_mode="continuous", horizon=5, x_max=30)
    with pytest.raises(ValueError):
        run_with_front(lambda t: 3 if t < 1 else 2, p)


def test_zero_intensity_never_advances():
    lam = np.zeros(31)
    st = np.zeros(1, dtype=np.int64)
    rec = np.zeros(2, dtype=np.int64)
    adv = np.zeros(31, dtype=np.int64)
    K.hybrid_kernel(lam, np.zeros(10**4), st, 30, 0.0, 0.1, np.array([0, 10**4]), rec, adv)
    assert st[0] == 0 and list(rec) == [0, 0]


def test_prescribed_front_replays_hybrid_exactly():
    p = ModelParams(mu=0.8, time_mode="continuous", horizon=2000, seed=5)
    traj, field = run_hybrid(p)
    assert field.front > 0
    replay = run_with_front(front_from_advances(traj.advance_steps), p, x_max=field.x_max)
    sl = slice(field.front + 1, None)
    assert np.array_equal(replay.lam[sl], field.lam[sl])


def test_hybrid_dt_thinning_bound():
    p = ModelParams(mu=2.0, time_mode="continuous", horizon=10)
    with pytest.raises(ValueError):
        run_hybrid(p, dt=0.1)


def test_csv_layout():
    f = IntensityField.uniform(1.0, 4, front=1)
    lines = intensities_to_csv([f]).splitlines()
    assert lines[0] == "s,i,lambda" and len(lines) == 1 + 3


@pytest.mark.slow
def test_hybrid_subcritical_growth_constant():
    T, runs = 1e5, 20
    p = ModelParams(mu=0.4382, time_mode="continuous", horizon=T, seed=99, checkpoints=[0.0, T])
    R = [run_hybrid(p, run_id=k)[0].R[-1] for k in range(runs)]
    assert abs(np.mean(R) / math.sqrt(T) / 0.5 - 1) < 0.10
