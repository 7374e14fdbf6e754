"""Lazily evaluated Bernoulli site fields over Z^2.

A site's (omega, upsilon) pair is a keyed pseudorandom function of
(seed, x, level): Philox-4x32-10 with the lattice coordinates as the 128-bit
counter and the 64-bit seed as key. Nothing is stored, so paths may query
sites in any order, from any thread, and always see the same field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import _kernels

U64 = (1 << 64) - 1


class SiteCoord(NamedTuple):
    x: int
    level: int


class SiteState(NamedTuple):
    omega: int
    upsilon: int


def open_threshold(p: float) -> int:
    """Integer cut on the top 53 output bits: a site is open iff bits < cut."""
    return math.ceil(p * 2.0**53)


@dataclass(frozen=True)
class Environment:
    """One realization of (Omega, Upsilon) with open probability ``p``."""

    seed: int
    p: float
    # diagnostics only; never feeds back into site values
    counters: dict = field(default_factory=lambda: {"queried": 0, "open": 0},
                           compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not 0 <= self.seed <= U64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def key(self) -> np.uint64:
        return np.uint64(self.seed)

    @property
    def threshold(self) -> np.uint64:
        return np.uint64(open_threshold(self.p))


def site_state(env: Environment, z) -> SiteState:
    x, level = z
    w0, w1, w2, _ = _kernels.site_words(env.key, x, level)
    omega = int(((w0 << 32) | w1) >> 11 < open_threshold(env.p))
    env.counters["queried"] += 1
    env.counters["open"] += omega
    return SiteState(omega, int(w2 & 1))


def site_arrays(env: Environment, xs, levels) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized site_state: boolean omega and upsilon arrays."""
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    levels = np.ascontiguousarray(np.broadcast_to(levels, xs.shape), dtype=np.int64)
    omega = np.empty(xs.shape, dtype=np.bool_)
    upsilon = np.empty(xs.shape, dtype=np.bool_)
    _kernels.site_block(env.key, env.threshold, xs, levels, omega, upsilon)
    return omega, upsilon


def replicate_seed(master_seed: int, index: int) -> int:
    """Environment seed of replicate ``index`` (SplitMix64 stream of the master)."""
    return int(_kernels.splitmix64(np.uint64(master_seed), index))


@dataclass
class BernoulliReport:
    n_sites: int
    p: float
    omega_freq: float
    upsilon_freq: float
    product_freq: float
    horizontal_corr: float
    vertical_corr: float
    z_scores: dict
    alpha: float
    passed: bool


def empirical_bernoulli_check(env: Environment, n_sites: int, alpha: float = 1e-3,
                              row_length: int = 1000) -> BernoulliReport:
    """Frequency and adjacent-correlation checks on an ``n_sites`` block.

    Sites are laid out row by row (``row_length`` per level, rows centred on
    zero) so that horizontal and vertical neighbours are both available.
    """
    if n_sites < 10_000:
        raise ValueError("n_sites must be at least 1e4")
    idx = np.arange(n_sites, dtype=np.int64)
    xs = idx % row_length - row_length // 2
    levels = idx // row_length - 7
    omega, upsilon = site_arrays(env, xs, levels)
    w = omega.astype(float)
    u = upsilon.astype(float)
    p = env.p

    def zscore(freq, mean, var, n):
        return 0.0 if var == 0 else (freq - mean) / math.sqrt(var / n)

    grid_rows = n_sites // row_length
    wg = w[: grid_rows * row_length].reshape(grid_rows, row_length)
    h_corr = _corr(wg[:, :-1].ravel(), wg[:, 1:].ravel())
    v_corr = _corr(wg[:-1, :].ravel(), wg[1:, :].ravel()) if grid_rows > 1 else 0.0
    n_h = wg[:, :-1].size
    n_v = max(wg[:-1, :].size, 1)

    z = {
        "omega": zscore(w.mean(), p, p * (1 - p), n_sites),
        "upsilon": zscore(u.mean(), 0.5, 0.25, n_sites),
        "product": zscore((w * u).mean(), p / 2, p / 2 * (1 - p / 2), n_sites),
        "horizontal_corr": h_corr * math.sqrt(n_h),
        "vertical_corr": v_corr * math.sqrt(n_v),
    }
    crit = stats.norm.ppf(1 - alpha / 2)
    passed = all(abs(v) <= crit for v in z.values())
    return BernoulliReport(n_sites, p, float(w.mean()), float(u.mean()), float((w * u).mean()),
                           h_corr, v_corr, z, alpha, passed)


def _corr(a, b):
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))
