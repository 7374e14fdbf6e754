"""Exhaustive verification of the monotonicity inequalities and the couplings."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..exact import DEFAULT_BUDGET, as_fraction
from .couplings import (Coupling, containment, domination, full_window_vars,
                        pushforward_mismatches, realization_validity, relevant_vars,
                        threshold_containment)
from .law import ConditioningPath, conditional_law
from .order import check_increment_order
from .probability import (LEFT, RIGHT, GridSpec, _KernelCache, conditional_independence,
                          exact_conditional_probability)

DEFAULT_GRIDS = (GridSpec(1, 12), GridSpec(2, 6), GridSpec(3, 4))


def grid_paths(grid: GridSpec):
    """All conditioning paths from (j, 0) that stay inside the grid columns."""
    for positions in itertools.product(range(grid.width), repeat=grid.height):
        yield ConditioningPath.from_positions((grid.j,) + positions)


def canonical_pairs(grid: GridSpec):
    """(pi1, pi2, t0) with pi2 = pi1 + 1 from t0 on, both inside the grid."""
    for pi1 in grid_paths(grid):
        for t0 in range(1, grid.height + 1):
            pi2 = pi1.shifted_from(t0)
            if grid.contains(pi2):
                yield pi1, pi2, t0


class _Probabilities:
    """Memoized exact left/right probabilities with per-path kernel caches."""

    def __init__(self, p, budget):
        self.p, self.budget = as_fraction(p), budget
        self._kernels, self._values = {}, {}

    def _kc(self, path):
        if path not in self._kernels:
            self._kernels[path] = _KernelCache(conditional_law(path, self.p), path, self.budget)
        return self._kernels[path]

    def left(self, path, start):
        key = (path, start, LEFT)
        if key not in self._values:
            self._values[key] = exact_conditional_probability(
                path, start, self.p, LEFT, budget=self.budget, kernels=self._kc(path))
        return self._values[key]

    def right_direct(self, path, start):
        key = (path, start, RIGHT)
        if key not in self._values:
            self._values[key] = exact_conditional_probability(
                path, start, self.p, RIGHT, budget=self.budget, kernels=self._kc(path))
        return self._values[key]

    def right(self, path, start):
        return self.left(path.mirrored(), 2 * path.j - start)


@dataclass
class MonotonicityReport:
    p: float
    height: int
    width: int
    pairs: int = 0
    comparisons: int = 0
    violations: list = field(default_factory=list)
    symmetry_mismatches: list = field(default_factory=list)
    order_failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not (self.violations or self.symmetry_mismatches or self.order_failures)

    def to_dict(self) -> dict:
        return {"p": self.p, "height": self.height, "width": self.width, "pairs": self.pairs,
                "comparisons": self.comparisons, "violations": self.violations,
                "symmetry_mismatches": self.symmetry_mismatches,
                "order_failures": self.order_failures, "passed": self.passed}


def verify_monotonicity(grid: GridSpec, p, budget: int = DEFAULT_BUDGET) -> MonotonicityReport:
    """Check both monotonicity inequalities on every canonical pair of the grid.

    The right-event probabilities are taken through the mirror symmetry and
    also computed directly; the two must agree exactly.
    """
    probs = _Probabilities(p, budget)
    rep = MonotonicityReport(float(p), grid.height, grid.width)
    j = grid.j
    for pi1, pi2, t0 in canonical_pairs(grid):
        rep.pairs += 1
        if not check_increment_order(pi1, pi2).holds:
            rep.order_failures.append({"pi1": pi1.positions, "pi2": pi2.positions})
        for k in range(0, j):
            a, b = probs.left(pi1, k), probs.left(pi2, k)
            rep.comparisons += 1
            if a > b:
                rep.violations.append({"inequality": "left", "pi1": pi1.positions,
                                       "pi2": pi2.positions, "start": k,
                                       "p1": str(a), "p2": str(b)})
        for n in range(j + 1, grid.width):
            a, b = probs.right(pi1, n), probs.right(pi2, n)
            rep.comparisons += 1
            if a < b:
                rep.violations.append({"inequality": "right", "pi1": pi1.positions,
                                       "pi2": pi2.positions, "start": n,
                                       "p1": str(a), "p2": str(b)})
            for path in (pi1, pi2):
                if probs.right_direct(path, n) != probs.right(path, n):
                    rep.symmetry_mismatches.append({"pi": path.positions, "start": n})
    return rep


@dataclass
class CouplingReport:
    p: float
    height: int
    width: int
    checked: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    # informational: full-window pushforward mismatches, auxiliary full-horizon
    # counterexamples, and the literal rule-3 reading
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"p": self.p, "height": self.height, "width": self.width,
                "checked": self.checked, "failures": self.failures,
                "notes": self.notes, "passed": self.passed}


def _bump(d, key, n=1):
    d[key] = d.get(key, 0) + n


def verify_couplings(grid: GridSpec, p, width: int = 2, literal: bool = True,
                     budget: int = DEFAULT_BUDGET) -> CouplingReport:
    """Run every coupling check on every canonical pair of the grid.

    Required: output realizations follow the target path; exact pushforward
    on the variables a left event can read; (cont) for case1; the level-t0
    containment for the auxiliary coupling; threshold containment for c >= 2
    and the domination inequality for k_ge_2.
    """
    p = as_fraction(p)
    rep = CouplingReport(float(p), grid.height, grid.width)
    notes = rep.notes
    notes.update({"full_window_mismatch_pairs": 0, "auxiliary_full_cont_counterexamples": 0,
                  "literal_rule3_invalid_pairs": 0, "literal_rule3_pushforward_failures": 0})
    j = grid.j
    starts = range(0, j)

    def fail(kind, c, **extra):
        rep.failures.append({"check": kind, "case": c.case, "pi1": c.pi1.positions,
                             "t0": c.t0, **extra})

    for pi1, _, t0 in canonical_pairs(grid):
        d1 = pi1(t0) - pi1(t0 - 1)
        cases = ("case1",) if d1 < 0 else ("auxiliary", "k_ge_2")
        for case in cases:
            c = Coupling(case, pi1, t0, p)
            _bump(rep.checked, case)
            if not realization_validity(c, budget)["valid"]:
                fail("realization", c)
            mism = pushforward_mismatches(c, relevant_vars(c, width), budget)
            if mism:
                fail("pushforward", c, blocks=[list(map(list, m["block"])) for m in mism])
            if pushforward_mismatches(c, full_window_vars(c, width), budget):
                notes["full_window_mismatch_pairs"] += 1
            for k in starts:
                if case == "case1":
                    if not containment(c, k, grid.height, budget)["holds"]:
                        fail("cont", c, start=k)
                elif case == "auxiliary":
                    if not containment(c, k, t0, budget)["holds"]:
                        fail("cont_aux", c, start=k)
                    if not containment(c, k, grid.height, budget)["holds"]:
                        notes["auxiliary_full_cont_counterexamples"] += 1
                else:
                    if not threshold_containment(c, k, range(2, grid.width + 3), budget)["holds"]:
                        fail("cont1", c, start=k)
                    if not domination(pi1, t0, k, p)["holds"]:
                        fail("dom", c, start=k)
            if case == "k_ge_2" and literal:
                lit = Coupling(case, pi1, t0, p, rule3="literal")
                if not realization_validity(lit, budget)["valid"]:
                    notes["literal_rule3_invalid_pairs"] += 1
                if pushforward_mismatches(lit, relevant_vars(lit, width), budget):
                    notes["literal_rule3_pushforward_failures"] += 1
    return rep


@dataclass
class IndependenceReport:
    p: float
    height: int
    width: int
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"p": self.p, "height": self.height, "width": self.width,
                "checked": self.checked, "failures": self.failures, "passed": self.passed}


def verify_independence(grid: GridSpec, p, offsets=(1,), budget: int = DEFAULT_BUDGET) -> IndependenceReport:
    """Endpoints left and right of the conditioning path are independent given it."""
    rep = IndependenceReport(float(p), grid.height, grid.width)
    for path in grid_paths(grid):
        for off in offsets:
            if grid.j - off < 0 or grid.j + off >= grid.width:
                continue
            chk = conditional_independence(path, grid.j - off, grid.j + off, p, budget)
            rep.checked += 1
            if not chk.factorizes:
                rep.failures.append({"pi": path.positions, "offset": off,
                                     "max_gap": str(chk.max_abs_gap)})
    return rep


def verify_all(p, grids=DEFAULT_GRIDS, couplings: bool = True, independence: bool = True,
               budget: int = DEFAULT_BUDGET) -> dict:
    out = {"p": float(p), "monotonicity": [], "couplings": [], "independence": []}
    for grid in grids:
        out["monotonicity"].append(verify_monotonicity(grid, p, budget).to_dict())
        if couplings:
            out["couplings"].append(verify_couplings(grid, p, budget=budget).to_dict())
        if independence:
            out["independence"].append(verify_independence(grid, p, budget=budget).to_dict())
    out["violations"] = [v for m in out["monotonicity"] for v in m["violations"]]
    out["passed"] = all(r["passed"] for key in ("monotonicity", "couplings", "independence")
                        for r in out[key])
    return out
