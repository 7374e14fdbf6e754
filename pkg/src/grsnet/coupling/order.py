"""The partial order on path increments."""

from __future__ import annotations

from dataclasses import dataclass

from .law import ConditioningPath


@dataclass(frozen=True)
class IncrementOrderWitness:
    first: ConditioningPath
    second: ConditioningPath
    holds: bool
    violation: tuple | None = None  # (k, l) with pi1(l)-pi1(k) > pi2(l)-pi2(k)


def check_increment_order(pi1: ConditioningPath, pi2: ConditioningPath) -> IncrementOrderWitness:
    """pi1 < pi2 iff pi1(l) - pi1(k) <= pi2(l) - pi2(k) for all 0 <= k <= l."""
    if pi1.length != pi2.length:
        raise ValueError("paths must have equal lengths")
    a, b = pi1.positions, pi2.positions
    for k in range(len(a)):
        for l in range(k, len(a)):
            if a[l] - a[k] > b[l] - b[k]:
                return IncrementOrderWitness(pi1, pi2, False, (k, l))
    return IncrementOrderWitness(pi1, pi2, True)
