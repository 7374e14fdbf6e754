from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from grsnet.coupling import (ConditioningPath, Coupling, GridSpec, check_increment_order,
                             conditional_law, exact_conditional_probability, verify_couplings,
                             verify_independence, verify_monotonicity)
from grsnet.coupling.couplings import (containment, domination, pushforward_mismatches,
                                       realization_validity, relevant_vars, threshold_containment)
from grsnet.coupling.law import left_relevant_vars, window_vars
from grsnet.coupling.probability import (RIGHT, bayes_conditional_probability, bayes_field_law,
                                         conditional_independence, right_via_symmetry)
from grsnet.exact import U, W, EnumerationBudgetExceeded, joint_table

HALF = Fraction(1, 2)


def test_path_basics():
    pi = ConditioningPath.from_positions([3, 1, 1, 4])
    assert pi.increments == (-2, 0, 3) and pi.length == 3 and pi(3) == 4
    assert pi.mirrored().positions == (3, 5, 5, 2)
    assert pi.mirrored().mirrored() == pi
    assert pi.shifted_from(2).positions == (3, 1, 2, 5)
    assert pi.far_end(1) == 5 and pi.interval(3) == (-2, 4)
    with pytest.raises(ValueError):
        pi.shifted_from(0)


def test_conditional_law_factors():
    law = conditional_law(ConditioningPath.from_positions([2, 4]), HALF)
    # target open, interior closed, far endpoint paired with the tie bit
    def table(*vs):
        return {k: v for k, v in joint_table(law.restrict(vs), vs).items() if v}

    assert table(W(4, 1)) == {(1,): 1}
    assert table(W(3, 1)) == {(0,): 1}
    pp = Fraction(1, 3)
    assert table(W(0, 1), U(2, 0)) == {(1, 1): pp, (0, 0): (1 - pp) / 2, (0, 1): (1 - pp) / 2}
    assert table(W(7, 1)) == {(0,): HALF, (1,): HALF}
    with pytest.raises(ValueError):
        conditional_law(ConditioningPath(0, (1,)), 1)


@pytest.mark.parametrize("positions", [[2, 4], [2, 0], [2, 2, 1], [3, 4, 2]])
def test_conditional_law_matches_bayes(positions):
    path = ConditioningPath.from_positions(positions)
    variables = window_vars(path, 1)
    bayes = bayes_field_law(path, variables, HALF)
    law = conditional_law(path, HALF)
    table = joint_table(law.restrict(variables), variables)
    assert {k: v for k, v in table.items() if v} == bayes


def test_increment_order():
    a = ConditioningPath.from_positions([0, -1, 0, 0])
    b = ConditioningPath.from_positions([0, 0, 1, 1])
    assert check_increment_order(a, b).holds
    w = check_increment_order(b, a)
    assert not w.holds and w.violation == (0, 1)
    assert check_increment_order(a, a).holds
    with pytest.raises(ValueError):
        check_increment_order(a, ConditioningPath(0, (1,)))


def test_start_on_path_is_never_left():
    path = ConditioningPath.from_positions([3, 2, 4])
    assert exact_conditional_probability(path, 3, HALF) == 0
    with pytest.raises(ValueError):
        exact_conditional_probability(path, 4, HALF)
    with pytest.raises(ValueError):
        exact_conditional_probability(path, 2, HALF, RIGHT)


@settings(max_examples=25, deadline=None)
@given(inc=st.lists(st.integers(-2, 2), min_size=1, max_size=2), off=st.integers(1, 2),
       p=st.sampled_from([Fraction(3, 10), HALF, Fraction(7, 10)]))
def test_dp_matches_bayes_and_symmetry(inc, off, p):
    path = ConditioningPath(4, tuple(inc))
    left = exact_conditional_probability(path, 4 - off, p)
    assert left == bayes_conditional_probability(path, 4 - off, p)
    right = exact_conditional_probability(path, 4 + off, p, RIGHT)
    assert right == bayes_conditional_probability(path, 4 + off, p, RIGHT)
    assert right == right_via_symmetry(path, 4 + off, p)


def test_grid_spec():
    g = GridSpec(2, 6)
    assert g.j == 3 and g.bits == 24
    assert g.contains(ConditioningPath.from_positions([3, 0, 5]))
    assert not g.contains(ConditioningPath.from_positions([3, 0, 6]))
    with pytest.raises(EnumerationBudgetExceeded):
        GridSpec(3, 5)
    with pytest.raises(ValueError):
        GridSpec(1, 4, j=0)


def test_case1_coupling():
    pi1 = ConditioningPath.from_positions([3, 2, 2])
    c = Coupling("case1", pi1, 1, HALF)
    assert c.target == pi1.shifted_from(1)
    assert realization_validity(c)["valid"]
    assert pushforward_mismatches(c, relevant_vars(c, 2)) == []
    for k in (0, 1, 2):
        assert containment(c, k, 2)["holds"]
    with pytest.raises(ValueError):
        Coupling("case1", ConditioningPath.from_positions([3, 3]), 1, HALF)


def test_auxiliary_coupling_runs_backwards():
    pi1 = ConditioningPath.from_positions([2, 2, 1])
    c = Coupling("auxiliary", pi1, 1, HALF)
    assert c.source == pi1.shifted_from(1) and c.target == pi1
    assert realization_validity(c)["valid"]
    assert pushforward_mismatches(c, relevant_vars(c, 2)) == []
    for k in (0, 1):
        assert containment(c, k, 1)["holds"]


def test_auxiliary_full_horizon_counterexample_exists():
    grid = GridSpec(2, 6)
    rep = verify_couplings(grid, HALF, literal=False)
    assert rep.passed
    assert rep.notes["auxiliary_full_cont_counterexamples"] > 0


def test_k_ge_2_coupling_partner_and_literal():
    pi1 = ConditioningPath.from_positions([3, 4, 4])
    c = Coupling("k_ge_2", pi1, 1, HALF)
    assert realization_validity(c)["valid"]
    assert pushforward_mismatches(c, relevant_vars(c, 2)) == []
    for k in (0, 1, 2):
        assert threshold_containment(c, k, range(2, 8))["holds"]
        assert domination(pi1, 1, k, HALF)["holds"]
    lit = Coupling("k_ge_2", pi1, 1, HALF, rule3="literal")
    assert not realization_validity(lit)["valid"]
    with pytest.raises(ValueError):
        threshold_containment(Coupling("case1", ConditioningPath.from_positions([3, 2]), 1, HALF),
                              0, [2])


def test_relevant_vars_are_left_of_path():
    path = ConditioningPath.from_positions([3, 4])
    vs = left_relevant_vars(path, 1)
    assert W(3, 1) in vs and W(4, 1) in vs and W(5, 1) not in vs
    assert U(2, 0) in vs and U(3, 0) not in vs


@pytest.mark.parametrize("p", [Fraction(3, 10), HALF])
def test_verify_height_one(p):
    grid = GridSpec(1, 12)
    mono = verify_monotonicity(grid, p)
    assert mono.passed and mono.to_dict()["violations"] == []
    assert verify_couplings(grid, p).passed
    assert verify_independence(grid, p).passed


def test_conditional_independence_example():
    path = ConditioningPath.from_positions([3, 2, 4])
    chk = conditional_independence(path, 2, 4, HALF)
    assert chk.factorizes and chk.max_abs_gap == 0
