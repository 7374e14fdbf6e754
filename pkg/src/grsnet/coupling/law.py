"""Conditioning paths and the environment law they induce."""

from __future__ import annotations

from dataclasses import dataclass

from ..exact import HALF, U, W, Factor, FieldLaw, as_fraction, point


@dataclass(frozen=True)
class ConditioningPath:
    """A path from (j, 0) given by its increments; positions[k] = pi(k)."""

    j: int
    increments: tuple

    def __post_init__(self):
        object.__setattr__(self, "increments", tuple(int(d) for d in self.increments))

    @classmethod
    def from_positions(cls, positions) -> "ConditioningPath":
        positions = [int(x) for x in positions]
        return cls(positions[0], tuple(b - a for a, b in zip(positions, positions[1:])))

    @property
    def length(self) -> int:
        return len(self.increments)

    @property
    def positions(self) -> tuple:
        out = [self.j]
        for d in self.increments:
            out.append(out[-1] + d)
        return tuple(out)

    def __call__(self, level: int) -> int:
        return self.positions[level]

    def mirrored(self) -> "ConditioningPath":
        """pi^-: same start, opposite increments."""
        return ConditioningPath(self.j, tuple(-d for d in self.increments))

    def shifted_from(self, t0: int) -> "ConditioningPath":
        """The path equal to this one before t0 and one unit to the right from t0 on."""
        if not 1 <= t0 <= self.length:
            raise ValueError("t0 must lie in [1, length]")
        inc = list(self.increments)
        inc[t0 - 1] += 1
        return ConditioningPath(self.j, tuple(inc))

    def far_end(self, k: int) -> int:
        """Endpoint 2*pi(k-1) - pi(k) of I_k opposite to pi(k)."""
        pos = self.positions
        return 2 * pos[k - 1] - pos[k]

    def interval(self, k: int) -> tuple:
        a, b = sorted((self.far_end(k), self(k)))
        return a, b


def conditional_law(path: ConditioningPath, p) -> FieldLaw:
    """Law of the site fields given that the path from (j, 0) equals ``path``.

    On level k the target pi(k) is open and the sites strictly inside I_k are
    closed. If the increment d is nonzero, the far endpoint is open with
    probability p' = p/(2-p) jointly with the tie bit at (pi(k-1), k-1): an
    open far endpoint means the tie went towards pi(k), i.e. upsilon = 1 when
    d > 0 and 0 when d < 0. A closed far endpoint leaves the tie bit fair.
    Everything else keeps its unconditional law.
    """
    p = as_fraction(p)
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    pp = p / (2 - p)
    factors = []
    pos = path.positions
    for k in range(1, path.length + 1):
        target, d = pos[k], pos[k] - pos[k - 1]
        factors.append(point(W(target, k), 1))
        if d == 0:
            continue
        step = 1 if d > 0 else -1
        for z in range(pos[k - 1] - d + step, target, step):
            factors.append(point(W(z, k), 0))
        towards = 1 if d > 0 else 0
        table = {(1, towards): pp, (0, 0): (1 - pp) * HALF, (0, 1): (1 - pp) * HALF}
        factors.append(Factor((W(path.far_end(k), k), U(pos[k - 1], k - 1)), table))
    return FieldLaw(p, factors)


def left_relevant_vars(path: ConditioningPath, width: int) -> list:
    """Variables a left-of-path event can read, within ``width`` of the path.

    Omega to the left of and including pi on levels 1..H, upsilon strictly to
    the left on levels 0..H-1.
    """
    out = []
    pos = path.positions
    for k in range(1, path.length + 1):
        out.extend(W(z, k) for z in range(pos[k] - width, pos[k] + 1))
    for k in range(path.length):
        out.extend(U(z, k) for z in range(pos[k] - width, pos[k]))
    return out


def window_vars(path: ConditioningPath, width: int) -> list:
    """All omega and upsilon within ``width`` of the path (both sides)."""
    out = []
    pos = path.positions
    for k in range(1, path.length + 1):
        out.extend(W(z, k) for z in range(pos[k] - width, pos[k] + width + 1))
    for k in range(path.length):
        out.extend(U(z, k) for z in range(pos[k] - width, pos[k] + width + 1))
    return out

