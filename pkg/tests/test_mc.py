import math
from fractions import Fraction

import numpy as np
import pytest

from grsnet.coupling import ConditioningPath, exact_conditional_probability
from grsnet.environment import Environment
from grsnet.mc import (CHUNK, ExperimentConfig, boundary_survival, conditional_left_mc,
                       estimate_eta_ge, estimate_marginal, estimate_pair_meeting_scaled,
                       estimate_tau_tail, proportion, sample_eta, sample_increments,
                       sample_pair_increments, sample_tau, scaled_width)
from grsnet.network import coalescence_time, eta_count, hop


@pytest.mark.parametrize("kw", [dict(p=0.0), dict(p=1.2), dict(master_seed=-1),
                                dict(replicates=0), dict(horizons=(10, 5)), dict(epsilon=0.0),
                                dict(n_scale=0), dict(workers=0), dict(t=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_hash_ignores_workers():
    a = ExperimentConfig(workers=1)
    assert a.config_hash == ExperimentConfig(workers=8).config_hash
    assert a.config_hash != ExperimentConfig(master_seed=1).config_hash
    assert len(a.config_hash) == 16


def test_proportion_stderr():
    e = proportion(30, 100)
    assert e.value == 0.3 and e.stderr == pytest.approx(math.sqrt(0.21 / 100))
    assert proportion(0, 0).value == 0.0


def test_batch_increments_match_scalar_hops():
    from grsnet.environment import replicate_seed
    d = sample_increments(0.4, 300, 12)
    for i in range(300):
        env = Environment(replicate_seed(12, i), 0.4)
        assert d[i] == hop(env, (0, 0)).x


def test_batch_tau_matches_scalar():
    from grsnet.environment import replicate_seed
    taus, _ = sample_tau(0.5, 0, 3, 200, 200, 4)
    for i in range(200):
        ct = coalescence_time(Environment(replicate_seed(4, i), 0.5), (0, 0), (3, 0), 200)
        assert taus[i] == (-1 if ct.censored else ct.tau)


def test_batch_eta_matches_scalar():
    from grsnet.environment import replicate_seed
    cfg = ExperimentConfig(replicates=100, epsilon=0.1, n_scale=2500, master_seed=3)
    width = scaled_width(cfg)
    counts = sample_eta(cfg, checkpoints=[1, 10, 100])
    for i in range(100):
        env = Environment(replicate_seed(3, i), 0.5)
        assert list(counts[i]) == [eta_count(env, 0, width, 0, t) for t in (1, 10, 100)]


def test_worker_count_invariance():
    n = 3 * CHUNK + 17
    a = sample_increments(0.5, n, 9, workers=1)
    assert np.array_equal(a, sample_increments(0.5, n, 9, workers=4))
    l1, r1 = sample_pair_increments(0.5, [1, 2], n, 9, workers=1)
    l3, r3 = sample_pair_increments(0.5, [1, 2], n, 9, workers=3)
    assert np.array_equal(l1, l3) and np.array_equal(r1, r3)
    t1, _ = sample_tau(0.5, 0, 1, 500, n, 9, workers=1)
    t5, _ = sample_tau(0.5, 0, 1, 500, n, 9, workers=5)
    assert np.array_equal(t1, t5)


def test_tau_tail_degenerate_cases():
    cfg = ExperimentConfig(replicates=500, horizons=(0, 10, 100))
    series = estimate_tau_tail(cfg)
    t0, e0 = series[0]
    assert t0 == 0 and e0.value == 1.0
    for _, e in series:
        assert e.censored + (e.n - e.censored) == cfg.replicates
    vals = [e.value for _, e in series]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    frozen = estimate_tau_tail(ExperimentConfig(p=1.0, replicates=200, horizons=(1, 100)))
    assert all(e.value == 1.0 for _, e in frozen)
    with pytest.raises(ValueError):
        estimate_tau_tail(cfg, separation=0)


def test_eta_zero_width():
    cfg = ExperimentConfig(replicates=100, epsilon=1e-6)
    assert scaled_width(cfg) == 0
    assert estimate_eta_ge(cfg, 2).value == 0.0
    with pytest.raises(ValueError):
        estimate_eta_ge(cfg, 4)


def test_eta_ge_two_is_boundary_survival():
    cfg = ExperimentConfig(replicates=2000, epsilon=0.3, n_scale=2500, master_seed=21)
    counts = sample_eta(cfg)[:, 0]
    assert np.array_equal(counts >= 2, boundary_survival(cfg))


def test_marginal_zero_time_and_validation():
    res = estimate_marginal(ExperimentConfig(replicates=100, t=0.0, n_scale=1000))
    assert res.passed and res.ks_statistic is None
    with pytest.raises(ValueError):
        estimate_marginal(ExperimentConfig(n_scale=10))


def test_pair_meeting_scaled_close_to_brownian():
    cfg = ExperimentConfig(replicates=4000, epsilon=1.0, n_scale=2500, horizons=(1250, 2500))
    for t, est, ref in estimate_pair_meeting_scaled(cfg):
        assert abs(est.value - ref) < 4 * est.stderr + 0.03


def test_conditional_mc_matches_exact():
    # H = 1, zero increment from j = 6, second path one step to the left
    j, k, positions = 6, 5, [6, 6]
    exact = exact_conditional_probability(ConditioningPath.from_positions(positions), k,
                                          Fraction(1, 2))
    est = conditional_left_mc(0.5, j, k, positions, 10**6, 31)
    assert abs(est.n - 5 * 10**5) < 5 * math.sqrt(2.5e5)
    assert abs(est.value - float(exact)) < 4 * math.sqrt(float(exact) * (1 - float(exact)) / est.n)
    with pytest.raises(ValueError):
        conditional_left_mc(0.5, j, k, [5, 5], 10, 1)
