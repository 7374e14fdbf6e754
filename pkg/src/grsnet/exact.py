"""Exact enumeration over lazily revealed site variables.

A *program* is a deterministic function of a ``query(var)`` callback. The
enumerator replays it, and each time it asks for a variable that has not been
fixed yet the enumerator branches over that variable's values (weighted by
the law, conditionally on what is already fixed). Every leaf is a cylinder
set of field realizations, so the leaves partition the probability space and
the outcome law is exact. Only the variables a program actually reads are
ever enumerated.

Variables are tuples: ``("w", x, level)`` for omega, ``("u", x, level)`` for
upsilon, and anything else for auxiliary coins, which must be given an
explicit factor.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

HALF = Fraction(1, 2)
DEFAULT_BUDGET = 2**24


def W(x, level):
    return ("w", x, level)


def U(x, level):
    return ("u", x, level)


def as_fraction(p) -> Fraction:
    """Exact rational for a model parameter; floats go through their repr (0.3 -> 3/10)."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


class Reject(Exception):
    """Raised by a program to discard the current branch (conditioning)."""


class EnumerationBudgetExceeded(RuntimeError):
    pass


class _Need(Exception):
    def __init__(self, var):
        self.var = var


@dataclass(frozen=True)
class Factor:
    """Joint law of a few variables; ``table`` maps value tuples to masses."""

    vars: tuple
    table: dict

    def conditional(self, var, assigned):
        i = self.vars.index(var)
        out = defaultdict(Fraction)
        for values, mass in self.table.items():
            if all(values[k] == assigned[v] for k, v in enumerate(self.vars)
                   if k != i and v in assigned):
                out[values[i]] += mass
        total = sum(out.values())
        return [(value, mass / total) for value, mass in sorted(out.items()) if mass]

    def marginal(self, keep) -> "Factor":
        idx = [k for k, v in enumerate(self.vars) if v in keep]
        out = defaultdict(Fraction)
        for values, mass in self.table.items():
            out[tuple(values[k] for k in idx)] += mass
        return Factor(tuple(self.vars[k] for k in idx), dict(out))


def point(var, value) -> Factor:
    return Factor((var,), {(value,): Fraction(1)})


def bernoulli(var, prob) -> Factor:
    prob = as_fraction(prob)
    return Factor((var,), {(0,): 1 - prob, (1,): prob})


class FieldLaw:
    """Product law of the site fields, overridden by explicit factors.

    Variables without a factor are independent: omega ~ Bernoulli(p),
    upsilon ~ Bernoulli(1/2).
    """

    def __init__(self, p, factors=()):
        self.p = as_fraction(p)
        self.factors: list[Factor] = []
        self._factor_of: dict = {}
        for f in factors:
            self.add(f)

    def add(self, factor: Factor):
        for v in factor.vars:
            if v in self._factor_of:
                raise ValueError(f"variable {v} already has a factor")
            self._factor_of[v] = factor
        self.factors.append(factor)

    def with_factors(self, factors) -> "FieldLaw":
        law = FieldLaw(self.p, self.factors)
        for f in factors:
            law.add(f)
        return law

    def factor_of(self, var) -> Factor:
        f = self._factor_of.get(var)
        if f is not None:
            return f
        if var[0] == "w":
            return bernoulli(var, self.p)
        if var[0] == "u":
            return bernoulli(var, HALF)
        raise KeyError(f"no law for auxiliary variable {var}")

    def dist(self, var, assigned):
        return self.factor_of(var).conditional(var, assigned)

    def restrict(self, variables) -> list[Factor]:
        """Factors of the marginal law on ``variables`` (a finite set)."""
        variables = set(variables)
        seen, out = set(), []
        for v in variables:
            f = self.factor_of(v)
            if id(f) in seen and v in self._factor_of:
                continue
            if v in self._factor_of:
                seen.add(id(f))
            out.append(f.marginal(variables))
        return out

    def total_mass(self) -> Fraction:
        mass = Fraction(1)
        for f in self.factors:
            mass *= sum(f.table.values())
        return mass


@dataclass
class Enumeration:
    law: dict
    rejected: Fraction
    runs: int

    @property
    def accepted(self):
        return sum(self.law.values(), Fraction(0))

    def conditional(self) -> dict:
        total = self.accepted
        return {k: v / total for k, v in self.law.items()}

    def probability(self, predicate) -> Fraction:
        return sum((v for k, v in self.law.items() if predicate(k)), Fraction(0))


def enumerate_outcomes(program, law: FieldLaw, budget: int = DEFAULT_BUDGET) -> Enumeration:
    """Exact law of ``program(query)`` under ``law``; see the module docstring."""
    results = defaultdict(Fraction)
    rejected = Fraction(0)
    stack = [({}, Fraction(1))]
    runs = 0
    while stack:
        assigned, prob = stack.pop()
        runs += 1
        if runs > budget:
            raise EnumerationBudgetExceeded(f"more than {budget} program runs")

        def query(var, assigned=assigned):
            try:
                return assigned[var]
            except KeyError:
                pass
            choices = law.dist(var, assigned)
            if len(choices) == 1:
                assigned[var] = choices[0][0]
                return choices[0][0]
            raise _Need(var)

        try:
            outcome = program(query)
        except _Need as need:
            for value, mass in law.dist(need.var, assigned):
                branch = dict(assigned)
                branch[need.var] = value
                stack.append((branch, prob * mass))
            continue
        except Reject:
            rejected += prob
            continue
        results[outcome] += prob
    return Enumeration(dict(results), rejected, runs)


def joint_table(factors, variables) -> dict:
    """Joint law on ``variables`` of independent factors covering them exactly."""
    order = list(variables)
    pos = {v: i for i, v in enumerate(order)}
    out = {}
    rows = [list(f.table.items()) for f in factors]
    for combo in product(*rows):
        values = [None] * len(order)
        mass = Fraction(1)
        for f, (vals, m) in zip(factors, combo):
            mass *= m
            for v, val in zip(f.vars, vals):
                values[pos[v]] = val
        if mass:
            key = tuple(values)
            out[key] = out.get(key, 0) + mass
    return out


def compare_product_laws(a: list[Factor], b: list[Factor]) -> list[dict]:
    """Blocks on which two factorized laws over the same variables differ.

    Variables are grouped into the finest blocks that are unions of factors
    of both laws; within a block the two joint tables are compared exactly.
    """
    parent = {}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for f in a + b:
        for v in f.vars:
            parent.setdefault(v, v)
        for v in f.vars[1:]:
            ra, rb = find(f.vars[0]), find(v)
            if ra != rb:
                parent[rb] = ra
    va = {v for f in a for v in f.vars}
    vb = {v for f in b for v in f.vars}
    if va != vb:
        return [{"block": sorted(va ^ vb, key=repr), "reason": "variable sets differ"}]
    blocks = defaultdict(list)
    for v in va:
        blocks[find(v)].append(v)
    mismatches = []
    for members in blocks.values():
        members = sorted(members, key=repr)
        ms = set(members)
        ta = joint_table([f for f in a if f.vars and f.vars[0] in ms], members)
        tb = joint_table([f for f in b if f.vars and f.vars[0] in ms], members)
        ta = {k: v for k, v in ta.items() if v}
        tb = {k: v for k, v in tb.items() if v}
        if ta != tb:
            mismatches.append({"block": members, "got": ta, "expected": tb})
    return mismatches
