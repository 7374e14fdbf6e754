"""Coalescing Brownian motions: closed-form meeting probabilities and a simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class BmPairSpec:
    epsilon: float
    t: float
    diffusion: float = 1.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.t > 0 and self.diffusion > 0):
            raise ValueError("epsilon, t and diffusion must be positive")


def bw_meet_survival(spec: BmPairSpec) -> float:
    """P(two coalescing BMs started epsilon apart have not met by t).

    Equals 2*Phi(eps / (sqrt(2t) * diffusion)) - 1, evaluated as an erf to
    avoid cancellation for small separations.
    """
    return math.erf(spec.epsilon / (2.0 * math.sqrt(spec.t) * spec.diffusion))


def _validate_starts(starts):
    starts = [(float(y), float(s)) for y, s in starts]
    for (y0, s0), (y1, s1) in zip(starts, starts[1:]):
        if s1 < s0 or (s1 == s0 and y1 <= y0):
            raise ValueError("starts must be ordered by time, then strictly by position")
    return starts


def simulate_coalescing_bm(starts, step: float, horizon: float, seed: int,
                           diffusion: float = 1.0, replicates: int = 1) -> np.ndarray:
    """Euler scheme for coalescing BMs started at ``(y_i, s_i)``.

    Returns positions with shape ``(replicates, n_paths, n_steps + 1)``; entries
    before a path's start time are NaN. Adjacent paths merge at the first grid
    step where their order inverts, or, failing that, with the Brownian bridge
    probability exp(-d1*d2 / (diffusion^2 * step)) that their difference hit
    zero inside the step. A merged path follows the one to its left.
    """
    starts = _validate_starts(starts)
    if step <= 0 or horizon <= 0:
        raise ValueError("step and horizon must be positive")
    rng = np.random.default_rng(seed)
    n = len(starts)
    n_steps = int(round(horizon / step))
    ys = np.array([y for y, _ in starts])
    ss = np.array([s for _, s in starts])
    start_step = np.ceil(ss / step - 1e-9).astype(int)

    out = np.full((replicates, n, n_steps + 1), np.nan)
    pos = np.full((replicates, n), np.nan)
    leader = np.tile(np.arange(n), (replicates, 1))
    rows = np.arange(replicates)
    scale = diffusion * math.sqrt(step)

    for k in range(n_steps + 1):
        newly = start_step == k
        if newly.any():
            pos[:, newly] = ys[newly]
        if k > 0:
            old = pos.copy()
            is_leader = leader == np.arange(n)
            active = ~np.isnan(old) & is_leader & (start_step < k)
            noise = rng.standard_normal((replicates, n)) * scale
            new = np.where(active, old + noise, old)
            _merge_step(old, new, active, leader, rows, diffusion**2 * step, rng)
            pos = new
        # followers sit on their leader
        pos = np.where(np.isnan(pos), pos, pos[rows[:, None], leader])
        out[:, :, k] = pos
    return out


def _merge_step(old, new, active, leader, rows, var_step, rng):
    n = old.shape[1]
    key = np.where(active, old, np.inf)
    order = np.argsort(key, axis=1, kind="stable")
    n_active = active.sum(axis=1)
    uniforms = rng.random((old.shape[0], max(n - 1, 1)))
    # sweep left to right; ``cur`` is the running left neighbour (index)
    cur = order[:, 0]
    for i in range(1, n):
        nxt = order[:, i]
        valid = i < n_active
        d1 = old[rows, nxt] - old[rows, cur]
        d2 = new[rows, nxt] - new[rows, cur]
        with np.errstate(invalid="ignore", over="ignore"):
            bridge = np.exp(-np.clip(d1 * d2, 0, None) / var_step)
        merge = valid & ((d2 <= 0) | (uniforms[:, i - 1] < bridge))
        if merge.any():
            r = rows[merge]
            a, b = cur[merge], nxt[merge]
            moved = leader[r] == b[:, None]
            leader[r] = np.where(moved, a[:, None], leader[r])
            new[r, b] = new[r, a]
        cur = np.where(valid & ~merge, nxt, cur)


def pair_survival_mc(epsilon: float, t: float, replicates: int, seed: int,
                     diffusion: float = 1.0, step: float | None = None) -> tuple[float, float]:
    """Monte Carlo P(no meeting by t) for two paths epsilon apart, with stderr."""
    step = 1e-4 * t if step is None else step
    paths = simulate_coalescing_bm([(0.0, 0.0), (epsilon, 0.0)], step, t, seed,
                                   diffusion=diffusion, replicates=replicates)
    alive = paths[:, 1, -1] != paths[:, 0, -1]
    v = alive.mean()
    return float(v), math.sqrt(v * (1 - v) / replicates)
