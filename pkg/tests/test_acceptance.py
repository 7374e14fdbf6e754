"""Acceptance suite: one test per criterion, summarized at the end of the run."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from grsnet.analytics import (c1_bound, enumerate_increment_pmf, increment_law, increment_pmf,
                              joint_one_step_pmf, sigma2, tail_exponent_check)
from grsnet.bw import BmPairSpec, bw_meet_survival
from grsnet.cli import main
from grsnet.coupling.verify import DEFAULT_GRIDS, verify_all
from grsnet.mc import (CHUNK, ExperimentConfig, estimate_marginal, estimate_tau_tail,
                       persistence_frequencies, proportion, sample_eta, sample_increments,
                       scaled_width)

pytestmark = pytest.mark.acceptance

P_GRID = (Fraction(3, 10), Fraction(1, 2), Fraction(7, 10))
SEED = 20240601
EPSILONS = (0.8, 0.4, 0.2)


@pytest.fixture(scope="module")
def increments():
    return {p: sample_increments(float(p), 10**6, SEED) for p in P_GRID}


@pytest.fixture(scope="module")
def eta_samples():
    out = {}
    for eps in EPSILONS:
        cfg = ExperimentConfig(p=0.5, master_seed=SEED, replicates=10**4, epsilon=eps,
                               n_scale=10**4, t=1.0)
        out[eps] = (cfg, sample_eta(cfg)[:, 0])
    return out


@pytest.mark.criterion(1, "increment law exact and MC")
def test_criterion_1_increment_law(increments, record_property):
    worst_gap, worst_z = 0.0, 0.0
    for p in P_GRID:
        enum, _ = enumerate_increment_pmf(p, 10)
        d = increments[p]
        n = len(d)
        for k in range(-10, 11):
            exact = increment_pmf(p, k)
            assert enum[k] == exact
            worst_gap = max(worst_gap, abs(increment_pmf(float(p), k) - float(enum[k])))
            freq = np.count_nonzero(d == k) / n
            f = float(exact)
            worst_z = max(worst_z, abs(freq - f) / math.sqrt(f * (1 - f) / n))
    record_property("detail", f"max |closed-enum| = {worst_gap:.1e}, max |z| = {worst_z:.2f}")
    assert worst_gap <= 1e-10
    assert worst_z <= 4


@pytest.mark.criterion(2, "diffusion constant")
def test_criterion_2_sigma2(increments, record_property):
    worst_gap, worst_z = 0.0, 0.0
    for p in P_GRID:
        law = increment_law(float(p))
        worst_gap = max(worst_gap, abs(sigma2(float(p)) - law.moment(2)))
        d = increments[p].astype(float)
        n = len(d)
        s2 = sigma2(float(p))
        se = math.sqrt((law.moment(4) - s2**2) / n)
        worst_z = max(worst_z, abs(d.var(ddof=1) - s2) / se)
    record_property("detail", f"max |sigma2-series| = {worst_gap:.1e}, max |z| = {worst_z:.2f}")
    assert worst_gap <= 1e-10
    assert worst_z <= 3


@pytest.mark.criterion(3, "exact martingale")
def test_criterion_3_martingale(record_property):
    checked = 0
    for p in P_GRID:
        for m in range(1, 13):
            law = joint_one_step_pmf(p, m)
            assert law.total_mass() == 1
            assert law.expected_gap() == m
            checked += 1
    record_property("detail", f"{checked} (p, m) pairs, E[Z1|Z0=m] = m exactly")


@pytest.mark.criterion(4, "persistence bound")
def test_criterion_4_persistence(record_property):
    worst_z, slack = 0.0, []
    for p in P_GRID:
        bound = c1_bound(p)
        exact = {m: joint_one_step_pmf(p, m).prob_gap(m) for m in range(1, 13)}
        for m, v in exact.items():
            assert v <= bound
        slack.append(float(bound - max(exact.values())))
        n = 10**6
        cfg = ExperimentConfig(p=float(p), master_seed=SEED, replicates=n)
        for m, est in persistence_frequencies(cfg, [1, 2, 3, 4]).items():
            f = float(exact[m])
            z = (est.value - f) / math.sqrt(f * (1 - f) / n)
            worst_z = max(worst_z, abs(z))
            assert est.value <= float(bound) + 3 * est.stderr
    record_property("detail", f"min exact slack to bound = {min(slack):.3g}, "
                              f"max |z| MC vs exact = {worst_z:.2f}")
    assert worst_z <= 3


@pytest.mark.criterion(5, "coalescence tail")
def test_criterion_5_tail(record_property):
    cfg = ExperimentConfig(p=0.5, master_seed=SEED, replicates=10**5,
                           horizons=(100, 316, 1000, 3162, 10000))
    series = estimate_tau_tail(cfg, separation=1)
    rep = tail_exponent_check([(t, e.value, e.stderr) for t, e in series])
    scaled = ", ".join(f"{s:.3f}" for s in rep.scaled)
    record_property("detail", f"slope = {rep.slope:.3f}, sqrt(t)P = [{scaled}]")
    assert rep.bounded
    assert rep.slope_in_window
    assert all(e.censored + (e.n - e.censored) == cfg.replicates for _, e in series)


@pytest.mark.criterion(6, "two-point meeting limit")
def test_criterion_6_eta_ge_2(eta_samples, record_property):
    parts, ok = [], True
    for eps in EPSILONS:
        cfg, counts = eta_samples[eps]
        est = proportion(int(np.count_nonzero(counts >= 2)), cfg.replicates)
        ref = 2 * (0.5 * math.erfc(-eps / math.sqrt(2 * cfg.t) / math.sqrt(2))) - 1
        assert ref == pytest.approx(bw_meet_survival(BmPairSpec(eps, cfg.t)), abs=1e-15)
        gap = abs(est.value - ref)
        ok &= gap < 3 * est.stderr + 0.02
        parts.append(f"eps={eps}: {est.value:.4f} vs {ref:.4f} (w={scaled_width(cfg)})")
    record_property("detail", "; ".join(parts))
    assert ok


@pytest.mark.criterion(7, "three-point smallness")
def test_criterion_7_eta_ge_3(eta_samples, record_property):
    ratios = []
    for eps in EPSILONS:
        cfg, counts = eta_samples[eps]
        est = proportion(int(np.count_nonzero(counts >= 3)), cfg.replicates)
        ratios.append((est.value / eps, est.stderr / eps))
    record_property("detail", ", ".join(f"eps={e}: {r:.5f}+-{s:.5f}"
                                        for e, (r, s) in zip(EPSILONS, ratios)))
    for (r0, s0), (r1, s1) in zip(ratios, ratios[1:]):
        assert r1 <= r0 + 3 * math.hypot(s0, s1)
    (rf, sf), (rl, sl) = ratios[0], ratios[-1]
    assert rf - rl > 3 * math.hypot(sf, sl)


@pytest.mark.criterion(8, "one-point marginal")
def test_criterion_8_marginal(record_property):
    cfg = ExperimentConfig(p=0.5, master_seed=SEED, replicates=10**4, n_scale=10**4, t=1.0)
    res = estimate_marginal(cfg, slack=1.5)
    record_property("detail", f"KS = {res.ks_statistic:.4f} < {res.ks_critical:.4f}, "
                              f"mean = {res.mean:.4f}, var = {res.variance:.4f}")
    assert res.ks_statistic < res.ks_critical
    assert res.passed


@pytest.mark.criterion(9, "exact coupling verification")
def test_criterion_9_couplings(record_property):
    summary = []
    for p in P_GRID:
        rep = verify_all(p, DEFAULT_GRIDS)
        assert rep["violations"] == []
        for key in ("monotonicity", "couplings", "independence"):
            for r in rep[key]:
                assert r["passed"], (key, r)
        pairs = sum(sum(r["checked"].values()) for r in rep["couplings"])
        summary.append(f"p={p}: {pairs} couplings")
        assert rep["passed"]
    grids = "; ".join(f"H={g.height},W={g.width}" for g in DEFAULT_GRIDS)
    record_property("detail", f"grids {grids}; " + ", ".join(summary) + "; 0 violations")


def _cli_outputs(tmp_path, workers):
    out = tmp_path / f"w{workers}"
    configs = {
        "increment-check": {"replicates": 5 * CHUNK * 4 + 123, "k_max": 4},
        "tau-tail": {"replicates": 5 * CHUNK * 4 + 123,
                     "horizons": [10, 32, 100, 316, 1000]},
        "eta": {"replicates": 20 * CHUNK, "epsilons": [0.4, 0.8], "n_scale": 400},
    }
    files = {}
    for command, cfg in configs.items():
        d = out / command
        d.mkdir(parents=True)
        (d / "config.json").write_text(json.dumps(cfg))
        main([command, "--out", str(d), "--config", str(d / "config.json"),
              "--workers", str(workers)])
        for f in sorted(d.iterdir()):
            if f.name != "manifest.json":
                files[f"{command}/{f.name}"] = f.read_bytes()
    return files


@pytest.mark.criterion(10, "worker-count reproducibility")
def test_criterion_10_reproducibility(tmp_path, record_property):
    runs = {w: _cli_outputs(tmp_path, w) for w in (1, 4, 16)}
    assert runs[1] == runs[4] == runs[16]
    record_property("detail", f"{len(runs[1])} files byte-identical for workers 1, 4, 16")
