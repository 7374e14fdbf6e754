"""Exact conditional probabilities of left/right events given a path.

Two independent routes:

* ``endpoint_law`` runs a Markov recursion over levels. Given the path, the
  conditional field law factorizes across levels except for the tie bit on
  the path itself, which a path not sitting on pi never reads. So the law of
  X_k(l+1) given X_k(l) = x is one exactly enumerated hop under the
  conditional law.
* ``bayes_*`` use the unconditioned field: trace X_j, reject every branch in
  which it leaves pi, and normalise. Nothing about the conditional law is
  assumed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from ..analytics import hop_query
from ..exact import (DEFAULT_BUDGET, EnumerationBudgetExceeded, FieldLaw, Reject,
                     as_fraction, enumerate_outcomes)
from .law import ConditioningPath, conditional_law

LEFT, RIGHT = "left", "right"
MAX_BITS = 24


@dataclass(frozen=True)
class GridSpec:
    """Columns [0, width) on levels 0..height; the conditioning path starts at column j."""

    height: int
    width: int
    j: int | None = None
    max_bits: int = MAX_BITS

    def __post_init__(self):
        if self.height < 1 or self.width < 2:
            raise ValueError("need height >= 1 and width >= 2")
        if self.j is None:
            object.__setattr__(self, "j", self.width // 2)
        if not 0 < self.j < self.width - 1:
            raise ValueError("j must leave room on both sides")
        if self.bits > self.max_bits:
            raise EnumerationBudgetExceeded(
                f"grid needs {self.bits} enumeration bits, budget is {self.max_bits}")

    @property
    def bits(self) -> int:
        return 2 * self.width * self.height

    def contains(self, path: ConditioningPath) -> bool:
        return path.j == self.j and path.length == self.height and all(
            0 <= x < self.width for x in path.positions)


class _KernelCache:
    """One-hop transition laws under a fixed conditional law."""

    def __init__(self, law: FieldLaw, path: ConditioningPath, budget: int):
        self.law, self.path, self.budget = law, path, budget
        self._cache = {}

    def __call__(self, x: int, level: int) -> dict:
        key = (x, level)
        if key not in self._cache:
            if x == self.path(level):
                self._cache[key] = {self.path(level + 1): Fraction(1)}
            else:
                res = enumerate_outcomes(lambda q: hop_query(q, x, level), self.law, self.budget)
                self._cache[key] = res.law
        return self._cache[key]


def endpoint_law(path: ConditioningPath, start: int, p, upto: int | None = None,
                 budget: int = DEFAULT_BUDGET, kernels=None) -> dict:
    """Exact law of X_start(upto) given X_j = path (default: the full length)."""
    upto = path.length if upto is None else upto
    kernels = kernels or _KernelCache(conditional_law(path, p), path, budget)
    dist = {start: Fraction(1)}
    for level in range(upto):
        nxt = defaultdict(Fraction)
        for x, mass in dist.items():
            for y, m in kernels(x, level).items():
                nxt[y] += mass * m
        dist = dict(nxt)
    return dist


def exact_conditional_probability(path: ConditioningPath, start: int, p, event: str = LEFT,
                                  grid: GridSpec | None = None, upto: int | None = None,
                                  budget: int = DEFAULT_BUDGET, kernels=None) -> Fraction:
    """P(X_start(H) < X_j(H) | X_j = path) for ``event='left'``, or > for 'right'."""
    if grid is not None and not grid.contains(path):
        raise ValueError("conditioning path leaves the grid")
    if event == LEFT and start > path.j or event == RIGHT and start < path.j:
        raise ValueError(f"start {start} is on the wrong side for the {event} event")
    upto = path.length if upto is None else upto
    law = endpoint_law(path, start, p, upto, budget, kernels)
    end = path(upto)
    if event == LEFT:
        return sum((m for x, m in law.items() if x < end), Fraction(0))
    return sum((m for x, m in law.items() if x > end), Fraction(0))


def right_via_symmetry(path: ConditioningPath, start: int, p, **kw) -> Fraction:
    """Right event under pi from ``start`` as the left event under pi^- from 2j - start."""
    return exact_conditional_probability(path.mirrored(), 2 * path.j - start, p, LEFT, **kw)


# ---------------------------------------------------------------------------
# Bayes oracle on the unconditioned field


def _follow(query, path: ConditioningPath):
    pos = path.positions
    for level in range(path.length):
        if hop_query(query, pos[level], level, limit=abs(pos[level + 1] - pos[level])) != pos[level + 1]:
            raise Reject


def _trace(query, start, path: ConditioningPath, upto):
    x = start
    pos = path.positions
    for level in range(upto):
        if x == pos[level]:
            x = pos[level + 1]
        else:
            x = hop_query(query, x, level)
    return x


def bayes_endpoint_law(path: ConditioningPath, starts, p, budget: int = DEFAULT_BUDGET) -> dict:
    """Exact joint law of (X_s(H) for s in starts) given X_j = path, by rejection."""
    starts = tuple(starts)

    def program(query):
        _follow(query, path)
        return tuple(_trace(query, s, path, path.length) for s in starts)

    res = enumerate_outcomes(program, FieldLaw(as_fraction(p)), budget)
    return res.conditional()


def bayes_conditional_probability(path: ConditioningPath, start: int, p, event: str = LEFT,
                                  budget: int = DEFAULT_BUDGET) -> Fraction:
    law = bayes_endpoint_law(path, [start], p, budget)
    end = path(path.length)
    if event == LEFT:
        return sum((m for (x,), m in law.items() if x < end), Fraction(0))
    return sum((m for (x,), m in law.items() if x > end), Fraction(0))


def bayes_field_law(path: ConditioningPath, variables, p, budget: int = DEFAULT_BUDGET) -> dict:
    """Exact joint law of the listed site variables given X_j = path."""
    variables = tuple(variables)

    def program(query):
        _follow(query, path)
        return tuple(query(v) for v in variables)

    return enumerate_outcomes(program, FieldLaw(as_fraction(p)), budget).conditional()


@dataclass
class IndependenceCheck:
    path: ConditioningPath
    left: int
    right: int
    factorizes: bool
    max_abs_gap: Fraction


def conditional_independence(path: ConditioningPath, left: int, right: int, p,
                             budget: int = DEFAULT_BUDGET) -> IndependenceCheck:
    """Is (X_left(H), X_right(H)) given X_j = path the product of its marginals?"""
    joint = bayes_endpoint_law(path, [left, right], p, budget)
    ml, mr = defaultdict(Fraction), defaultdict(Fraction)
    for (a, b), m in joint.items():
        ml[a] += m
        mr[b] += m
    gap = Fraction(0)
    for a, pa in ml.items():
        for b, pb in mr.items():
            gap = max(gap, abs(joint.get((a, b), Fraction(0)) - pa * pb))
    return IndependenceCheck(path, left, right, gap == 0, gap)
