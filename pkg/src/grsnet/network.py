"""Hop map, path tracing, difference process and eta counts on one environment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .environment import Environment, SiteCoord


class SearchOverflow(RuntimeError):
    """No open site within ``search_cap(p)`` of the current abscissa."""


class CrossingError(AssertionError):
    """Two paths of one environment crossed; the hop map is broken."""


MAX_CAP = 2**31 - 1


def search_cap(p: float) -> int:
    """K_max = ceil(64 / log2(1/q)) + 64; missing an open site has prob < 2^-128.

    Clamped to 2^31 - 1 so that absurdly small p cannot overflow the kernels.
    """
    q = 1.0 - p
    if q <= 0.0:
        return 64
    if q >= 1.0:
        return MAX_CAP
    return min(math.ceil(64.0 / -math.log2(q)) + 64, MAX_CAP)


def _check(status):
    if status == _kernels.OVERFLOW:
        raise SearchOverflow("no open site within the search cap")
    if status == _kernels.CROSSING:
        raise CrossingError("paths crossed")


@dataclass(frozen=True)
class LatticePath:
    start: SiteCoord
    positions: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.positions) - 1

    def at(self, level: int) -> int:
        return int(self.positions[level - self.start.level])


@dataclass(frozen=True)
class DifferenceProcess:
    u: SiteCoord
    v: SiteCoord
    values: np.ndarray


@dataclass(frozen=True)
class CoalescenceTime:
    tau: int | None
    horizon: int

    @property
    def censored(self) -> bool:
        return self.tau is None


def hop(env: Environment, z) -> SiteCoord:
    x, level = z
    y, status = _kernels.hop(env.key, env.threshold, x, level, search_cap(env.p))
    _check(status)
    return SiteCoord(int(y), level + 1)


def trace(env: Environment, z, steps: int) -> LatticePath:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    z = SiteCoord(*z)
    out = np.empty(steps + 1, dtype=np.int64)
    _check(_kernels.trace_into(env.key, env.threshold, z.x, z.level, search_cap(env.p), out))
    return LatticePath(z, out)


def _validate_pair(u, v):
    u, v = SiteCoord(*u), SiteCoord(*v)
    if u.level != v.level:
        raise ValueError("u and v must start on the same level")
    if u.x > v.x:
        raise ValueError("need u.x <= v.x")
    return u, v


def difference_process(env: Environment, u, v, horizon: int) -> DifferenceProcess:
    u, v = _validate_pair(u, v)
    left = trace(env, u, horizon).positions
    right = trace(env, v, horizon).positions
    z = right - left
    if np.any(z < 0):
        raise CrossingError(f"Z_t < 0 for u={u}, v={v}")
    return DifferenceProcess(u, v, z)


def coalescence_time(env: Environment, u, v, horizon: int) -> CoalescenceTime:
    u, v = _validate_pair(u, v)
    tau, status = _kernels.pair_tau(env.key, env.threshold, u.x, v.x, u.level, horizon,
                                    search_cap(env.p))
    _check(status)
    return CoalescenceTime(None if tau == _kernels.CENSORED else int(tau), horizon)


def eta_count(env: Environment, a: int, b: int, t0: int, t: int) -> int:
    """Distinct abscissas at level t0 + t of the paths from [a, b] x {t0}."""
    if a > b:
        raise ValueError("need a <= b")
    if t < 1:
        raise ValueError("need t >= 1")
    counts = np.zeros(1, dtype=np.int64)
    status = _kernels.eta_counts(env.key, env.threshold, a, b, t0,
                                 np.array([t], dtype=np.int64), search_cap(env.p), counts)
    _check(status)
    return int(counts[0])
