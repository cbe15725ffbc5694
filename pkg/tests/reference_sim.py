"""Naive per-particle simulators used as distributional oracles.

They track every particle's position in a flat array and share no code with
the count-based steppers in ``mdla``.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _continuous(rng, pos, x_max, horizon):
    n = pos.shape[0]
    R = 0
    lost = 0
    t = 0.0
    while n > 0:
        t += -np.log(1.0 - rng.random()) / n
        if t > horizon:
            break
        k = int(rng.random() * n)
        x = pos[k]
        if rng.random() < 0.5:
            if x == R + 1:
                R += 1
                # kill everyone at the old R+1
                j = 0
                killed = 0
                while j < n:
                    if pos[j] == R:
                        pos[j] = pos[n - 1]
                        n -= 1
                        killed += 1
                    else:
                        j += 1
                lost += killed - 1
            else:
                pos[k] = x - 1
        elif x < x_max:
            pos[k] = x + 1
    return R, lost, n


@njit(cache=True)
def _discrete(rng, pos, x_max, steps):
    n = pos.shape[0]
    R = 0
    lost = 0
    went_left = np.zeros(n, dtype=np.bool_)
    for _ in range(steps):
        if n == 0:
            break
        advance = False
        for k in range(n):
            x = pos[k]
            if rng.random() < 0.5:
                went_left[k] = True
                pos[k] = x - 1
                if x == R + 1:
                    advance = True
            else:
                went_left[k] = False
                if x < x_max:
                    pos[k] = x + 1
        if advance:
            R += 1
            killed = 0
            j = 0
            while j < n:
                # left-movers that landed on the old front or the new front
                if went_left[j] and pos[j] <= R:
                    pos[j] = pos[n - 1]
                    went_left[j] = went_left[n - 1]
                    n -= 1
                    killed += 1
                else:
                    j += 1
            lost += killed - 1
    return R, lost, n


def _positions(rng, mu, x_max):
    counts = rng.poisson(mu, x_max)
    return np.repeat(np.arange(1, x_max + 1), counts).astype(np.int64)


def reference_continuous(mu, x_max, horizon, seed):
    rng = np.random.default_rng(seed)
    return _continuous(rng, _positions(rng, mu, x_max), x_max, float(horizon))


def reference_discrete(mu, x_max, steps, seed):
    rng = np.random.default_rng(seed)
    return _discrete(rng, _positions(rng, mu, x_max), x_max, int(steps))
