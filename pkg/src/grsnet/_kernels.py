"""Compiled inner loops: Philox-4x32-10 site randomness, hops and path tracing.

Everything here operates on raw uint64 keys and int64 coordinates so that the
loops stay in nopython mode. The Python-facing API lives in ``environment``,
``network`` and ``mc``.
"""

import numba as nb
import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
SH32 = np.uint64(32)
SH11 = np.uint64(11)
ONE = np.uint64(1)

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)

SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
SM_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
SM_MUL2 = np.uint64(0x94D049BB133111EB)
SH30 = np.uint64(30)
SH27 = np.uint64(27)
SH31 = np.uint64(31)

# status codes returned by the tracing kernels
OK = 0
OVERFLOW = 1
CROSSING = 2

CENSORED = -1


@nb.njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        n0 = ((p1 >> SH32) ^ c1 ^ k0) & MASK32
        n1 = p1 & MASK32
        n2 = ((p0 >> SH32) ^ c3 ^ k1) & MASK32
        n3 = p0 & MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True)
def splitmix64(state, index):
    z = state + (np.uint64(index) + ONE) * SM_GAMMA
    z = (z ^ (z >> SH30)) * SM_MUL1
    z = (z ^ (z >> SH27)) * SM_MUL2
    return z ^ (z >> SH31)


@nb.njit(cache=True, nogil=True)
def site_words(key, x, level):
    ux = np.uint64(x)
    ul = np.uint64(level)
    return philox4x32(ux & MASK32, ux >> SH32, ul & MASK32, ul >> SH32,
                      key & MASK32, key >> SH32)


@nb.njit(cache=True, nogil=True)
def is_open(key, threshold, x, level):
    w0, w1, _, _ = site_words(key, x, level)
    top53 = ((w0 << SH32) | w1) >> SH11
    return top53 < threshold


@nb.njit(cache=True, nogil=True)
def tie_bit(key, x, level):
    _, _, w2, _ = site_words(key, x, level)
    return (w2 & ONE) == ONE


@nb.njit(cache=True, nogil=True)
def hop(key, threshold, x, level, kmax):
    """Abscissa of h((x, level)) at level + 1, plus a status code."""
    nxt = level + 1
    if is_open(key, threshold, x, nxt):
        return x, OK
    for d in range(1, kmax + 1):
        left = is_open(key, threshold, x - d, nxt)
        right = is_open(key, threshold, x + d, nxt)
        if left and right:
            if tie_bit(key, x, level):
                return x + d, OK
            return x - d, OK
        if left:
            return x - d, OK
        if right:
            return x + d, OK
    return x, OVERFLOW


@nb.njit(cache=True, nogil=True)
def trace_into(key, threshold, x, level, kmax, out):
    """Fill ``out`` with the path positions; ``out[0]`` is the start."""
    out[0] = x
    for k in range(1, out.shape[0]):
        x, status = hop(key, threshold, x, level + k - 1, kmax)
        if status != OK:
            return status
        out[k] = x
    return OK


@nb.njit(cache=True, nogil=True)
def pair_tau(key, threshold, a, b, level, horizon, kmax):
    """First t <= horizon with both paths at the same site, else CENSORED."""
    if a == b:
        return 0, OK
    for t in range(1, horizon + 1):
        a, s1 = hop(key, threshold, a, level + t - 1, kmax)
        b, s2 = hop(key, threshold, b, level + t - 1, kmax)
        if s1 != OK or s2 != OK:
            return CENSORED, OVERFLOW
        if a > b:
            return CENSORED, CROSSING
        if a == b:
            return t, OK
    return CENSORED, OK


@nb.njit(cache=True, nogil=True)
def eta_counts(key, threshold, a, b, level, checkpoints, kmax, counts):
    """Distinct positions at ``level + checkpoints[i]`` of paths from [a, b].

    Paths are kept sorted and deduplicated after every step; once a single
    path remains the remaining checkpoints are filled with 1.
    """
    pos = np.arange(a, b + 1).astype(np.int64)
    n = pos.shape[0]
    t = 0
    ci = 0
    while ci < checkpoints.shape[0] and checkpoints[ci] == 0:
        counts[ci] = n
        ci += 1
    while ci < checkpoints.shape[0]:
        if n == 1:
            counts[ci] = 1
            ci += 1
            continue
        for i in range(n):
            x, status = hop(key, threshold, pos[i], level + t, kmax)
            if status != OK:
                return OVERFLOW
            pos[i] = x
        t += 1
        m = 1
        for i in range(1, n):
            if pos[i] < pos[m - 1]:
                return CROSSING
            if pos[i] != pos[m - 1]:
                pos[m] = pos[i]
                m += 1
        n = m
        while ci < checkpoints.shape[0] and checkpoints[ci] == t:
            counts[ci] = n
            ci += 1
    return OK


# ---------------------------------------------------------------------------
# replicate batches: replicate i always runs in the environment keyed by
# splitmix64(master, i), whatever chunk it lands in


@nb.njit(cache=True, nogil=True)
def batch_hops(master, threshold, i0, i1, x, level, kmax, out, status):
    for i in range(i0, i1):
        key = splitmix64(master, i)
        y, s = hop(key, threshold, x, level, kmax)
        out[i] = y - x
        status[i] = s


@nb.njit(cache=True, nogil=True)
def batch_pair_hops(master, threshold, i0, i1, offsets, kmax, left, right, status):
    """One-step displacements of the paths from (0, 0) and (m, 0), per m."""
    for i in range(i0, i1):
        key = splitmix64(master, i)
        y, s = hop(key, threshold, 0, 0, kmax)
        left[i] = y
        status[i] = s
        for j in range(offsets.shape[0]):
            m = offsets[j]
            z, s2 = hop(key, threshold, m, 0, kmax)
            right[i, j] = z - m
            if s2 != OK:
                status[i] = s2


@nb.njit(cache=True, nogil=True)
def batch_tau(master, threshold, i0, i1, a, b, horizon, kmax, taus, status):
    for i in range(i0, i1):
        key = splitmix64(master, i)
        t, s = pair_tau(key, threshold, a, b, 0, horizon, kmax)
        taus[i] = t
        status[i] = s


@nb.njit(cache=True, nogil=True)
def batch_endpoint(master, threshold, i0, i1, x, steps, kmax, out, status):
    for i in range(i0, i1):
        key = splitmix64(master, i)
        y = x
        s = OK
        for k in range(steps):
            y, s = hop(key, threshold, y, k, kmax)
            if s != OK:
                break
        out[i] = y
        status[i] = s


@nb.njit(cache=True, nogil=True)
def batch_eta(master, threshold, i0, i1, a, b, checkpoints, kmax, counts, status):
    for i in range(i0, i1):
        key = splitmix64(master, i)
        status[i] = eta_counts(key, threshold, a, b, 0, checkpoints, kmax, counts[i])


@nb.njit(cache=True, nogil=True)
def batch_conditioned_pair(master, threshold, i0, i1, j, k, path, kmax, accepted, left_of, status):
    """Rejection sampler: keep replicates whose path from (j, 0) equals ``path``."""
    steps = path.shape[0] - 1
    for i in range(i0, i1):
        key = splitmix64(master, i)
        x = j
        ok = True
        s = OK
        for t in range(steps):
            x, s = hop(key, threshold, x, t, kmax)
            if s != OK or x != path[t + 1]:
                ok = False
                break
        status[i] = s
        accepted[i] = ok
        if not ok:
            left_of[i] = False
            continue
        y = k
        for t in range(steps):
            y, s = hop(key, threshold, y, t, kmax)
        status[i] = s
        left_of[i] = y < path[steps]


@nb.njit(cache=True, nogil=True)
def site_block(key, threshold, xs, levels, omega, upsilon):
    for i in range(xs.shape[0]):
        w0, w1, w2, _ = site_words(key, xs[i], levels[i])
        omega[i] = (((w0 << SH32) | w1) >> SH11) < threshold
        upsilon[i] = (w2 & ONE) == ONE
