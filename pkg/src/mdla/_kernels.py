"""Compiled inner loops for the stochastic simulators.

Randomness comes in as blocks of raw 64-bit words from the run's numpy bit
generator. Kernels return when the block runs low and are resumed with a
fresh block, so the consumed bit stream is independent of block size.

State vector layout (int64): see the ``S_*`` indices below.
"""
import numpy as np
from numba import njit, uint64, int64

S_FRONT, S_LOST, S_DEAD, S_ALIVE, S_STEP, S_CK, S_DONE = range(7)
STATE_LEN = 7

_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def _popcount(x):
    x = x - ((x >> uint64(1)) & uint64(0x5555555555555555))
    x = (x & uint64(0x3333333333333333)) + ((x >> uint64(2)) & uint64(0x3333333333333333))
    x = (x + (x >> uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    return int64((x * uint64(0x0101010101010101)) >> uint64(56))


@njit(inline="always")
def _coin_flips(words, pos, bits, n):
    """Number of ones among the next ``n`` stream bits; Binomial(n, 1/2)."""
    total = 0
    while n > 0:
        if bits[1] == 0:
            bits[0] = words[pos]
            bits[1] = 64
            pos += 1
        avail = int64(bits[1])
        k = n if n < avail else avail
        if k == 64:
            total += _popcount(bits[0])
            bits[1] = 0
        else:
            total += _popcount(bits[0] & ((uint64(1) << uint64(k)) - uint64(1)))
            bits[0] = bits[0] >> uint64(k)
            bits[1] -= k
        n -= k
    return total, pos


@njit(cache=True)
def _snapshot(counts, st, x_max, rec, prof, k):
    R = st[S_FRONT]
    rec[k, 0] = R
    rec[k, 1] = st[S_LOST]
    rec[k, 2] = st[S_DEAD]
    rec[k, 3] = st[S_ALIVE]
    for j in range(prof.shape[1]):
        site = R + 1 + j
        prof[k, j] = counts[site] if site <= x_max else -1


# -- discrete time ---------------------------------------------------------


@njit(cache=True)
def discrete_apply(counts, left, st, x_max, aggregate):
    """Apply one synchronous step given the left-mover count of every site.

    All particles jump first (right jumps from ``x_max`` are suppressed).
    Then, if any particle left ``R+1`` to the left, the front advances by one
    and swallows the left-movers from the old ``R+1`` and ``R+2``. With
    ``aggregate`` false the front is a reflecting wall instead.
    """
    R = st[S_FRONT]
    if R >= x_max:
        return
    l1 = left[R + 1]
    l2 = left[R + 2] if R + 2 <= x_max else 0
    rm2 = 0  # right-movers from i-2
    rm1 = 0  # right-movers from i-1
    for i in range(R + 1, x_max + 1):
        c = counts[i]
        lm = left[i]
        counts[i - 1] = rm2 + lm
        rm2 = rm1
        rm1 = c - lm
    # rm2, rm1 now hold right-movers from x_max-1 and x_max
    counts[x_max] = rm2 + rm1
    if aggregate:
        counts[R] = 0
        if l1 >= 1:
            swallowed = l1 + l2
            counts[R + 1] -= l2
            if R + 1 == x_max:
                # window exhausted: wall-held right-movers sit on the new front
                swallowed += counts[x_max]
                counts[x_max] = 0
            st[S_FRONT] = R + 1
            st[S_DEAD] += swallowed
            st[S_LOST] += swallowed - 1
            st[S_ALIVE] -= swallowed
    else:
        counts[R] = 0
        counts[R + 1] += l1


@njit(cache=True)
def discrete_kernel(words, pos, bits, counts, left, st, x_max, horizon, ck_steps, rec, prof, aggregate):
    n_ck = ck_steps.shape[0]
    nw = words.shape[0]
    while True:
        step = st[S_STEP]
        while st[S_CK] < n_ck and ck_steps[st[S_CK]] == step:
            _snapshot(counts, st, x_max, rec, prof, st[S_CK])
            st[S_CK] += 1
        if step >= horizon or st[S_ALIVE] == 0:
            while st[S_CK] < n_ck:
                _snapshot(counts, st, x_max, rec, prof, st[S_CK])
                st[S_CK] += 1
            st[S_DONE] = 1
            return pos
        if nw - pos < st[S_ALIVE] // 64 + 2:
            return pos
        R = st[S_FRONT]
        for i in range(R + 1, x_max + 1):
            c = counts[i]
            if c:
                lm, pos = _coin_flips(words, pos, bits, c)
                left[i] = lm
            else:
                left[i] = 0
        discrete_apply(counts, left, st, x_max, aggregate)
        st[S_STEP] = step + 1


# -- continuous time -------------------------------------------------------


@njit(cache=True)
def fenwick_build(counts, x_max):
    tree = np.zeros(x_max + 1, dtype=np.int64)
    for i in range(1, x_max + 1):
        tree[i] += counts[i]
        j = i + (i & -i)
        if j <= x_max:
            tree[j] += tree[i]
    return tree


@njit(inline="always")
def _fenwick_add(tree, i, delta):
    n = tree.shape[0] - 1
    while i <= n:
        tree[i] += delta
        i += i & -i


@njit(inline="always")
def _fenwick_find(tree, target):
    """Smallest site whose prefix sum exceeds ``target``."""
    n = tree.shape[0] - 1
    step = 1
    while step * 2 <= n:
        step *= 2
    pos = 0
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step //= 2
    return pos + 1


@njit(cache=True)
def fenwick_find(tree, target):
    return _fenwick_find(tree, target)


@njit(cache=True)
def continuous_apply(counts, tree, st, x_max, site, left, aggregate):
    """Move one particle from ``site`` one unit left or right.

    A left jump from the site next to the front advances the front and kills
    every particle on that site. Right jumps from ``x_max`` are suppressed.
    """
    R = st[S_FRONT]
    if left:
        if site == R + 1:
            if aggregate:
                n = counts[site]
                counts[site] = 0
                _fenwick_add(tree, site, -n)
                st[S_FRONT] = R + 1
                st[S_DEAD] += n
                st[S_LOST] += n - 1
                st[S_ALIVE] -= n
            return
        dest = site - 1
    else:
        if site == x_max:
            return
        dest = site + 1
    counts[site] -= 1
    counts[dest] += 1
    _fenwick_add(tree, site, -1)
    _fenwick_add(tree, dest, 1)


@njit(cache=True)
def continuous_kernel(words, pos, counts, tree, st, tnow, x_max, horizon, ck_times, rec, prof, aggregate):
    n_ck = ck_times.shape[0]
    nw = words.shape[0]
    t = tnow[0]
    while True:
        alive = st[S_ALIVE]
        if alive == 0:
            while st[S_CK] < n_ck:
                _snapshot(counts, st, x_max, rec, prof, st[S_CK])
                st[S_CK] += 1
            st[S_DONE] = 1
            tnow[0] = t
            return pos
        if nw - pos < 2:
            tnow[0] = t
            return pos
        w1 = words[pos]
        w2 = words[pos + 1]
        pos += 2
        u1 = (float(w1 >> uint64(11)) + 1.0) * _INV53
        tn = t - np.log(u1) / alive
        while st[S_CK] < n_ck and ck_times[st[S_CK]] < tn:
            _snapshot(counts, st, x_max, rec, prof, st[S_CK])
            st[S_CK] += 1
        if tn > horizon:
            while st[S_CK] < n_ck:
                _snapshot(counts, st, x_max, rec, prof, st[S_CK])
                st[S_CK] += 1
            st[S_DONE] = 1
            tnow[0] = horizon
            return pos
        t = tn
        st[S_STEP] += 1
        target = int64(float(w2 >> uint64(11)) * _INV53 * alive)
        if target >= alive:
            target = alive - 1
        site = _fenwick_find(tree, target)
        continuous_apply(counts, tree, st, x_max, site, (w2 & uint64(1)) == uint64(1), aggregate)


# -- mean-field intensities ------------------------------------------------


@njit(cache=True)
def intensity_steps(lam, front, x_max, mu, dt, nsteps):
    """Explicit Euler for the unit-rate walk generator with a fixed front."""
    tmp = np.empty_like(lam)
    for i in range(0, front + 1):
        lam[i] = 0.0
    lam[x_max] = mu
    for _ in range(nsteps):
        for i in range(front + 1, x_max):
            tmp[i] = lam[i] + dt * (0.5 * lam[i - 1] + 0.5 * lam[i + 1] - lam[i])
        for i in range(front + 1, x_max):
            lam[i] = tmp[i]
        for i in range(0, front + 1):
            lam[i] = 0.0
        lam[x_max] = mu


@njit(cache=True)
def hybrid_kernel(lam, uniforms, st, x_max, mu, dt, ck_steps, rec, adv):
    """Alternate intensity steps with thinned front advances at rate lam[R+1]/2.

    ``uniforms`` supplies one uniform per step; ``st[0]`` is the front.
    ``rec[k]`` receives the front at step ``ck_steps[k]`` and ``adv[n]`` the
    step during which the front made its ``n``-th advance.
    """
    nsteps = uniforms.shape[0]
    k = 0
    n_ck = ck_steps.shape[0]
    tmp = np.empty_like(lam)
    for step in range(nsteps + 1):
        while k < n_ck and ck_steps[k] == step:
            rec[k] = st[0]
            k += 1
        if step == nsteps:
            break
        R = st[0]
        for i in range(R + 1, x_max):
            tmp[i] = lam[i] + dt * (0.5 * lam[i - 1] + 0.5 * lam[i + 1] - lam[i])
        for i in range(R + 1, x_max):
            lam[i] = tmp[i]
        lam[x_max] = mu
        if R + 1 < x_max and uniforms[step] < 0.5 * lam[R + 1] * dt:
            adv[R] = step
            st[0] = R + 1
            lam[R + 1] = 0.0
    while k < n_ck:
        rec[k] = st[0]
        k += 1
