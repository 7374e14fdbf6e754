"""Closed-form model quantities and exact enumeration oracles.

The single-step increment of a path has law

    P(0) = p,    P(k) = q^(2|k|-1) * p * (q + p/2)   for |k| >= 1,

(all sites closer than |k| closed, then the k-side open and the other side
closed, or both open and the fair tie bit pointing to k). Its variance is the
diffusion constant sigma^2 = q(1+q^2) / (p^2 (1+q)^2).

Functions accept floats or ``Fraction``; with a ``Fraction`` the result is
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exact import U, W, as_fraction, enumerate_outcomes, FieldLaw
from .network import search_cap

RESIDUAL = "residual"


def _check_p(p):
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def increment_pmf(p, k: int):
    _check_p(p)
    q = 1 - p
    if k == 0:
        return p
    return q ** (2 * abs(k) - 1) * p * (q + p / 2)


def sigma2(p):
    _check_p(p)
    q = 1 - p
    return q * (1 + q * q) / (p * p * (1 + q) ** 2)


def c1_bound(p):
    _check_p(p)
    q = 1 - p
    return p * p + (1 - q * q) / (2 * (1 + q * q)) * q * q


def p_prime(p):
    """Open probability of the far endpoint of I_k given the conditioning path."""
    _check_p(p)
    return p / (2 - p)


@dataclass(frozen=True)
class ModelConstants:
    p: float
    q: float
    sigma2: float
    c1_bound: float
    p_prime: float


def model_constants(p) -> ModelConstants:
    return ModelConstants(p, 1 - p, sigma2(p), c1_bound(p), p_prime(p))


@dataclass
class IncrementLaw:
    p: float
    pmf: dict = field(repr=False)

    @property
    def support(self):
        return max(self.pmf)

    def moment(self, order: int) -> float:
        terms = sorted((k**order * v for k, v in self.pmf.items()), key=abs)
        return math.fsum(terms)

    def total(self) -> float:
        return math.fsum(self.pmf.values())


def increment_law(p: float, k_max: int | None = None) -> IncrementLaw:
    """Closed-form pmf truncated at ``k_max`` (default: the hop search cap)."""
    k_max = search_cap(p) if k_max is None else k_max
    return IncrementLaw(p, {k: increment_pmf(p, k) for k in range(-k_max, k_max + 1)})


# ---------------------------------------------------------------------------
# exact oracles


def hop_query(query, x, level, limit=None):
    """h((x, level)) read through ``query``; None if nothing open within ``limit``."""
    nxt = level + 1
    if query(W(x, nxt)):
        return x
    d = 1
    while limit is None or d <= limit:
        left = query(W(x - d, nxt))
        right = query(W(x + d, nxt))
        if left and right:
            return x + d if query(U(x, level)) else x - d
        if left:
            return x - d
        if right:
            return x + d
        d += 1
    return None


def enumerate_increment_pmf(p, k_max: int) -> tuple[dict, Fraction]:
    """Exact law of one hop from the origin for |k| <= k_max, plus the mass beyond."""
    p = as_fraction(p)
    _check_p(p)

    def program(query):
        y = hop_query(query, 0, 0, limit=k_max)
        return RESIDUAL if y is None else y

    law = enumerate_outcomes(program, FieldLaw(p)).law
    residual = law.pop(RESIDUAL, Fraction(0))
    return law, residual


@dataclass
class JointStepLaw:
    """Exact joint law of the one-step displacements from (0, 0) and (m, 0).

    ``pmf`` covers every realization in which the left search finds an open
    site within ``window``. The complement (all of [-window, window] closed
    at level 1) is kept as a residual whose mass and gap moments are summed
    in closed form, so nothing is truncated.
    """

    p: Fraction
    m: int
    window: int
    pmf: dict
    residual_mass: Fraction
    runs: int

    def _split_weight(self, delta):
        # delta = s_R - s_L; left path goes left and right path goes right
        if 0 < delta < 2 * self.m:
            return Fraction(1)
        if delta in (0, 2 * self.m):
            return Fraction(1, 2)
        return Fraction(0)

    def residual_gap_pmf(self, gap: int) -> Fraction:
        """P(Z_1 = gap, residual) for gap > 0."""
        p, q, A = self.p, 1 - self.p, self.window
        total = Fraction(0)
        s = gap - 2 * A
        for s_left in range(1, s):
            s_right = s - s_left
            w = self._split_weight(s_right - s_left)
            if w:
                total += w * p * p * q ** (s - 2)
        return q ** (2 * A + 1) * total

    def residual_split_mass(self) -> Fraction:
        p, q = self.p, 1 - self.p
        r = q * q
        inner = sum((self._split_weight(d) * q**d for d in range(0, 2 * self.m + 1)), Fraction(0))
        return q ** (2 * self.window + 1) * p * p * inner / (1 - r)

    def residual_gap_moment(self) -> Fraction:
        """E[Z_1 ; residual] in closed form."""
        p, q, A = self.p, 1 - self.p, self.window
        r = q * q
        total = Fraction(0)
        for d in range(0, 2 * self.m + 1):
            w = self._split_weight(d)
            if w:
                total += w * q**d * ((2 * A + d) / (1 - r) + 2 / (1 - r) ** 2)
        return q ** (2 * A + 1) * p * p * total

    def total_mass(self) -> Fraction:
        return sum(self.pmf.values(), Fraction(0)) + self.residual_mass

    def expected_gap(self) -> Fraction:
        """E[Z_1 | Z_0 = m]."""
        finite = sum(((self.m + dr - dl) * v for (dl, dr), v in self.pmf.items()), Fraction(0))
        return finite + self.residual_gap_moment()

    def prob_gap(self, gap: int) -> Fraction:
        """P(Z_1 = gap | Z_0 = m)."""
        total = sum((v for (dl, dr), v in self.pmf.items() if self.m + dr - dl == gap), Fraction(0))
        if gap == 0:
            total += self.residual_mass - self.residual_split_mass()
        elif gap > 2 * self.window:
            total += self.residual_gap_pmf(gap)
        return total

    def marginal_left(self) -> dict:
        out = {}
        for (dl, _), v in self.pmf.items():
            out[dl] = out.get(dl, 0) + v
        return out

    def marginal_right(self) -> dict:
        out = {}
        for (_, dr), v in self.pmf.items():
            out[dr] = out.get(dr, 0) + v
        return out


def joint_one_step_pmf(p, m: int, window: int | None = None, m_max: int = 12,
                       budget: int = 2**24) -> JointStepLaw:
    p = as_fraction(p)
    _check_p(p)
    if not 1 <= m <= m_max:
        raise ValueError(f"separation must lie in [1, {m_max}]")
    A = max(m, 12) if window is None else window
    if A < m:
        raise ValueError("window must be at least the separation")

    def program(query):
        y = hop_query(query, 0, 0, limit=A)
        if y is None:
            return RESIDUAL
        z = hop_query(query, m, 0)
        return (y, z - m)

    result = enumerate_outcomes(program, FieldLaw(p), budget=budget)
    pmf = dict(result.law)
    residual = pmf.pop(RESIDUAL, Fraction(0))
    assert residual == (1 - p) ** (2 * A + 1)
    return JointStepLaw(p, m, A, pmf, residual, result.runs)


# ---------------------------------------------------------------------------
# tail report


@dataclass
class TailReport:
    horizons: list
    survival: list
    scaled: list
    max_scaled: float
    slope: float
    bounded: bool
    slope_in_window: bool
    degenerate: bool
    notes: list

    @property
    def passed(self) -> bool:
        return self.bounded and self.slope_in_window and not self.degenerate


def tail_exponent_check(series, slope_window=(-0.65, -0.35), z: float = 3.0) -> TailReport:
    """Check a survival series against the c/sqrt(t) bound.

    ``series`` holds ``(t, value)`` or ``(t, value, stderr)`` entries, or
    ``(t, estimate)`` with an object exposing ``value`` and ``stderr``.
    """
    ts, vals, ses = [], [], []
    for entry in series:
        t, rest = entry[0], entry[1:]
        if len(rest) == 1 and hasattr(rest[0], "value"):
            v, se = rest[0].value, rest[0].stderr
        else:
            v, se = rest[0], (rest[1] if len(rest) > 1 else 0.0)
        ts.append(float(t))
        vals.append(float(v))
        ses.append(float(se))
    ts, vals, ses = np.array(ts), np.array(vals), np.array(ses)
    if len(ts) < 5 or ts.min() <= 0 or ts.max() / ts.min() < 100:
        raise ValueError("need at least 5 horizons spanning two decades")

    scaled = np.sqrt(ts) * vals
    scaled_se = np.sqrt(ts) * ses
    notes = []
    degenerate = bool(np.all(vals >= 1.0) or np.all(vals <= 0.0))
    if degenerate:
        notes.append("degenerate series (all survivals 0 or 1)")

    bounded = True
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            slack = z * math.hypot(scaled_se[i], scaled_se[j]) + 1e-12 * abs(scaled[i])
            if scaled[j] - scaled[i] > slack:
                bounded = False
    if not bounded:
        notes.append("sqrt(t) * survival trends upward beyond the confidence band")

    if np.any(vals <= 0):
        slope = float("nan")
        notes.append("zero survival estimate; slope undefined")
    else:
        slope = float(np.polyfit(np.log(ts), np.log(vals), 1)[0])
    lo, hi = slope_window
    in_window = bool(lo <= slope <= hi)
    if slope < lo:
        notes.append("decays faster than c/sqrt(t): steeper than the bound")
    return TailReport(ts.tolist(), vals.tolist(), scaled.tolist(), float(scaled.max()),
                      slope, bounded, in_window, degenerate, notes)
