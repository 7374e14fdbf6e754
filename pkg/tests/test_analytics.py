import math
from fractions import Fraction

import numpy as np
import pytest

from grsnet.analytics import (c1_bound, enumerate_increment_pmf, increment_law, increment_pmf,
                              joint_one_step_pmf, model_constants, p_prime, sigma2,
                              tail_exponent_check)
from grsnet.mc import ExperimentConfig, persistence_frequencies, sample_tau

P_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def test_increment_pmf_values():
    assert increment_pmf(0.5, 0) == 0.5
    assert increment_pmf(0.5, 1) == pytest.approx(0.1875, abs=1e-15)
    assert increment_pmf(Fraction(1, 2), 1) == Fraction(3, 16)


def test_increment_pmf_brute_force_window():
    # the 3-site window {-1, 0, 1} plus the tie bit, p = 1/2: all 16 cases
    left = 0
    for w in range(8):
        wl, w0, wr = (w >> 2) & 1, (w >> 1) & 1, w & 1
        for tie in (0, 1):
            if not w0 and wl and (not wr or tie == 0):
                left += 1
    assert Fraction(left, 16) == increment_pmf(Fraction(1, 2), -1)


@pytest.mark.parametrize("p", P_GRID)
def test_increment_law_invariants(p):
    law = increment_law(p)
    for k in range(1, 30):
        assert law.pmf[k] == law.pmf[-k]
    assert law.pmf[0] == p
    assert abs(law.total() - 1) < 1e-12
    assert abs(law.moment(1)) < 1e-12
    assert abs(sigma2(p) - law.moment(2)) < 1e-10


def test_sigma2_values():
    assert sigma2(0.5) == pytest.approx(10 / 9, rel=1e-15)
    assert sigma2(Fraction(1, 2)) == Fraction(10, 9)
    assert sigma2(1 - 1e-9) < 1e-8


def test_constants():
    assert c1_bound(0.5) == pytest.approx(0.325, abs=1e-15)
    assert c1_bound(1 - 1e-9) == pytest.approx(1, abs=1e-8)
    assert p_prime(Fraction(1, 2)) == Fraction(1, 3)
    for p in P_GRID:
        c = model_constants(p)
        assert 0 < c.sigma2 < math.inf and 0 < c.c1_bound < 1 and 0 < c.p_prime < 1


@pytest.mark.parametrize("f", [increment_law, sigma2, c1_bound, p_prime])
@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_domain_errors(f, p):
    with pytest.raises(ValueError):
        f(p) if f is not increment_law else increment_pmf(p, 0)


@pytest.mark.parametrize("p", [Fraction(3, 10), Fraction(1, 2), Fraction(7, 10)])
def test_enumerated_pmf_exact(p):
    pmf, residual = enumerate_increment_pmf(p, 6)
    for k in range(-6, 7):
        assert pmf[k] == increment_pmf(p, k)
    assert residual == (1 - p) ** 13


@pytest.mark.parametrize("p", [0.3, 0.5])
@pytest.mark.parametrize("m", [1, 2, 4])
def test_joint_law_martingale_and_marginal(p, m):
    law = joint_one_step_pmf(p, m)
    assert law.total_mass() == 1
    assert law.expected_gap() == m
    q = Fraction(p) if isinstance(p, Fraction) else Fraction(repr(p))
    for k, v in law.marginal_left().items():
        assert v == increment_pmf(q, k)
    assert law.prob_gap(m) <= c1_bound(q)


def test_joint_law_validation():
    with pytest.raises(ValueError):
        joint_one_step_pmf(0.5, 0)
    with pytest.raises(ValueError):
        joint_one_step_pmf(0.5, 13)
    with pytest.raises(ValueError):
        joint_one_step_pmf(0.5, 3, window=2)


def test_tau_equals_one_exact_vs_mc():
    n = 200_000
    exact = float(joint_one_step_pmf(0.5, 1).prob_gap(0))
    taus, _ = sample_tau(0.5, 0, 1, 1, n, master_seed=77)
    est = np.mean(taus == 1)
    assert abs(est - exact) < 3 * math.sqrt(exact * (1 - exact) / n)


def test_persistence_exact_vs_mc():
    n = 200_000
    exact = float(joint_one_step_pmf(0.5, 1).prob_gap(1))
    est = persistence_frequencies(ExperimentConfig(p=0.5, replicates=n, master_seed=5), [1])[1]
    assert abs(est.value - exact) < 3 * math.sqrt(exact * (1 - exact) / n)


T = [10**2, 10**2.5, 10**3, 10**3.5, 10**4]


def test_tail_check_sqrt_series():
    rep = tail_exponent_check([(t, 0.5 / math.sqrt(t)) for t in T])
    assert rep.slope == pytest.approx(-0.5, abs=1e-12)
    assert rep.passed and rep.bounded
    assert max(rep.scaled) - min(rep.scaled) < 1e-12


def test_tail_check_steeper_series():
    rep = tail_exponent_check([(t, 5.0 / t) for t in T])
    assert rep.slope == pytest.approx(-1.0, abs=1e-12)
    assert rep.bounded and not rep.slope_in_window
    assert any("steeper" in n for n in rep.notes)


def test_tail_check_upward_trend():
    rep = tail_exponent_check([(t, 0.05 * t**-0.3, 1e-5) for t in T])
    assert not rep.bounded and not rep.passed


def test_tail_check_degenerate_and_validation():
    rep = tail_exponent_check([(t, 1.0) for t in T])
    assert rep.degenerate and not rep.passed
    with pytest.raises(ValueError):
        tail_exponent_check([(t, 0.1) for t in T[:4]])
    with pytest.raises(ValueError):
        tail_exponent_check([(t, 0.1) for t in (10, 12, 14, 16, 18)])
