"""Site-level couplings of the conditional laws given pi1 and pi2 = pi1 + 1 from t0.

A coupling is a map from an *input* realization (a query function) to an
*output* realization, site by site: each output variable is a function of a
few input variables and, for some rules, of fresh auxiliary coins. Because
the map is exposed lazily, every check below is an exact enumeration over
the input conditional law plus the coins.

* ``case1`` (pi1 steps left at t0): input given pi1, output given pi2.
* ``auxiliary`` (pi1 does not step left): input given pi2, output given pi1.
* ``k_ge_2`` (pi1 does not step left): input given pi1, output given pi2,
  with the far endpoint of pi2 thinned by a Bernoulli(1/(2-p)) coin.
  ``rule3`` selects where the dependent tie bit is written: ``'partner'``
  writes it to upsilon(pi(t0-1), t0-1), the bit paired with the far
  endpoint in the conditional law; ``'literal'`` writes it to the tie bit
  of the far endpoint site itself.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from ..analytics import hop_query
from ..exact import (DEFAULT_BUDGET, HALF, FieldLaw, U, W, as_fraction, bernoulli,
                     enumerate_outcomes, joint_table)
from .law import ConditioningPath, conditional_law, left_relevant_vars, window_vars

CASES = ("case1", "auxiliary", "k_ge_2")
XI = ("xi",)
TIE_COIN = ("tie_coin",)


def _coin(z, level):
    return ("coin", z, level)


class Coupling:
    def __init__(self, case: str, pi1: ConditioningPath, t0: int, p, rule3: str = "partner"):
        if case not in CASES:
            raise ValueError(f"unknown coupling {case!r}")
        if rule3 not in ("partner", "literal"):
            raise ValueError("rule3 must be 'partner' or 'literal'")
        self.case, self.t0, self.rule3 = case, t0, rule3
        self.p = as_fraction(p)
        self.pi1 = pi1
        self.pi2 = pi1.shifted_from(t0)
        self.d1 = pi1(t0) - pi1(t0 - 1)
        if case == "case1" and self.d1 >= 0:
            raise ValueError("case1 needs pi1(t0) < pi1(t0-1)")
        if case != "case1" and self.d1 < 0:
            raise ValueError(f"{case} needs pi1(t0) >= pi1(t0-1)")
        if case == "auxiliary":
            self.source, self.target = self.pi2, self.pi1
        else:
            self.source, self.target = self.pi1, self.pi2
        self.far1 = pi1(t0) - 2 * self.d1  # left endpoint of I_t0 under pi1 when d1 >= 0

    # -- laws ---------------------------------------------------------------

    def input_law(self) -> FieldLaw:
        law = conditional_law(self.source, self.p)
        if self.case == "k_ge_2":
            law.add(bernoulli(XI, 1 / (2 - self.p)))
            law.add(bernoulli(TIE_COIN, HALF))
        return law

    def target_law(self) -> FieldLaw:
        return conditional_law(self.target, self.p)

    def _fresh(self, var, law):
        # lazily registered coins for rule 2 of k_ge_2
        if var[0] == "coin":
            try:
                return law.factor_of(var)
            except KeyError:
                law.add(bernoulli(var, HALF))
        return None

    # -- the map ------------------------------------------------------------

    def sources(self, var) -> tuple:
        """Input variables the output variable ``var`` is a function of."""
        kind, z, level = var
        t0 = self.t0
        if level < t0:
            if (self.case == "k_ge_2" and self.rule3 == "partner" and kind == "u"
                    and (z, level) == (self.pi1(t0 - 1), t0 - 1)):
                return (W(self.far1 - 1, t0), XI, TIE_COIN)
            return (var,)
        if level > t0:
            return ((kind, z - 1, level) if self.case != "auxiliary" else (kind, z + 1, level),)
        if self.case == "case1":
            return ((kind, z - 1, level) if z <= self.pi2(t0) else (kind, z + 1, level),)
        if self.case == "auxiliary":
            return ((kind, z + 1, level) if z >= self.pi1(t0) else (kind, z - 1, level),)
        # k_ge_2 at level t0
        if z > self.pi1(t0):
            return ((kind, z - 1, level),)
        if self.far1 <= z <= self.pi1(t0):
            return () if kind == "w" else (_coin(z, level),)
        if z == self.far1 - 1:
            if kind == "w":
                return (W(z, level), XI)
            if self.rule3 == "literal":
                return (W(z, level), XI, TIE_COIN)
        return (var,)

    def value(self, var, get) -> int:
        src = self.sources(var)
        if self.case == "k_ge_2":
            kind, z, level = var
            if level == self.t0 and self.far1 <= z <= self.pi1(self.t0) and kind == "w":
                return 0
            if len(src) == 2:  # thinned far endpoint
                return get(src[0]) * get(src[1])
            if len(src) == 3:  # dependent tie bit
                return 1 if get(src[0]) * get(src[1]) else get(src[2])
        return get(src[0])

    def view(self, query):
        """Output realization as a query function over the input one."""
        return lambda var: self.value(var, query)


# ---------------------------------------------------------------------------
# checks


def _trace(query, start, path: ConditioningPath, upto):
    x = start
    pos = path.positions
    for level in range(upto):
        x = pos[level + 1] if x == pos[level] else hop_query(query, x, level)
    return x


def _prepared_law(c: Coupling, variables=()):
    law = c.input_law()
    for v in variables:
        for s in c.sources(v):
            c._fresh(s, law)
    if c.case == "k_ge_2":
        pos = c.pi1.positions
        for z in range(c.far1, pos[c.t0] + 1):
            c._fresh(_coin(z, c.t0), law)
    return law


def realization_validity(c: Coupling, budget: int = DEFAULT_BUDGET) -> dict:
    """Does the output always make X_j follow the target path?"""
    law = _prepared_law(c)

    def program(query):
        out = c.view(query)
        x, pos = c.target.j, [c.target.j]
        for level in range(c.target.length):
            x = hop_query(out, x, level)
            pos.append(x)
        return tuple(pos)

    res = enumerate_outcomes(program, law, budget)
    bad = {k: v for k, v in res.law.items() if k != c.target.positions}
    return {"valid": not bad, "bad_mass": float(sum(bad.values(), Fraction(0)))}


def pushforward_mismatches(c: Coupling, variables, budget: int = DEFAULT_BUDGET) -> list:
    """Blocks of ``variables`` on which the output law differs from the target law."""
    variables = list(dict.fromkeys(variables))
    law = _prepared_law(c, variables)
    target = c.target_law()

    # group output variables that share an input factor or a target factor
    parent = {v: v for v in variables}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    owner = {}
    vset = set(variables)
    for v in variables:
        for s in c.sources(v):
            for s2 in law.factor_of(s).vars:
                if s2 in owner:
                    parent[find(v)] = find(owner[s2])
                else:
                    owner[s2] = v
        for v2 in target.factor_of(v).vars:
            if v2 in vset:
                parent[find(v)] = find(v2)
    blocks = defaultdict(list)
    for v in variables:
        blocks[find(v)].append(v)

    mismatches = []
    for block in blocks.values():
        block = tuple(sorted(block, key=repr))
        res = enumerate_outcomes(lambda q: tuple(c.view(q)(v) for v in block), law, budget)
        got = {k: m for k, m in res.law.items() if m}
        want = {k: m for k, m in joint_table(target.restrict(block), block).items() if m}
        if got != want:
            mismatches.append({"block": block, "got": got, "expected": want})
    return mismatches


def containment(c: Coupling, start: int, horizon: int | None = None,
                budget: int = DEFAULT_BUDGET) -> dict:
    """Realizations with {X_start(h) < X_j(h)} under one side but not the other.

    The check is oriented as in the proof: pi1 event implies pi2 event. For
    the auxiliary coupling pi1 is the output side.
    """
    h = c.t0 if horizon is None else horizon
    law = _prepared_law(c)

    def program(query):
        out = c.view(query)
        e_in = _trace(query, start, c.source, h) < c.source(h)
        e_out = _trace(out, start, c.target, h) < c.target(h)
        return (e_in, e_out) if c.case != "auxiliary" else (e_out, e_in)

    res = enumerate_outcomes(program, law, budget)
    bad = res.law.get((True, False), Fraction(0))
    return {"holds": bad == 0, "counterexample_mass": bad}


def threshold_containment(c: Coupling, start: int, thresholds, budget: int = DEFAULT_BUDGET) -> dict:
    """{D1 >= c} subset {D2 >= c} with D = pi1(t0) - 2 d1 - X_start(t0)."""
    if c.case != "k_ge_2":
        raise ValueError("threshold containment applies to the k_ge_2 coupling")
    law = _prepared_law(c)

    def program(query):
        out = c.view(query)
        d_in = c.far1 - _trace(query, start, c.source, c.t0)
        d_out = c.far1 - _trace(out, start, c.target, c.t0)
        return d_in, d_out

    res = enumerate_outcomes(program, law, budget)
    failures = {t: sum((m for (a, b), m in res.law.items() if a >= t and b < t), Fraction(0))
                for t in thresholds}
    return {"holds": all(v == 0 for v in failures.values()),
            "failures": {t: v for t, v in failures.items() if v}}


def domination(pi1: ConditioningPath, t0: int, start: int, p) -> dict:
    """P(D2 >= k-1) >= P(D1 >= k) for all k >= 0, exactly."""
    from .probability import endpoint_law

    pi2 = pi1.shifted_from(t0)
    far1 = 2 * pi1(t0 - 1) - pi1(t0)
    d1 = {far1 - x: m for x, m in endpoint_law(pi1, start, p, t0).items()}
    d2 = {far1 - x: m for x, m in endpoint_law(pi2, start, p, t0).items()}
    top = max(list(d1) + list(d2) + [0]) + 1
    bad = []
    for k in range(0, top + 1):
        lhs = sum((m for v, m in d2.items() if v >= k - 1), Fraction(0))
        rhs = sum((m for v, m in d1.items() if v >= k), Fraction(0))
        if lhs < rhs:
            bad.append(k)
    return {"holds": not bad, "failing_k": bad}


def relevant_vars(c: Coupling, width: int) -> list:
    return left_relevant_vars(c.target, width)


def full_window_vars(c: Coupling, width: int) -> list:
    return window_vars(c.target, width)
