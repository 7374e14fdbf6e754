"""Replicated Monte Carlo experiments on the drainage network.

Replicate ``i`` of an experiment always uses the environment seeded by
``replicate_seed(master_seed, i)``. Work is split into fixed-size chunks of
replicate indices and the numba kernels write into preallocated arrays, so
the results are the same for any number of worker threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .analytics import sigma2
from .bw import BmPairSpec, bw_meet_survival
from .environment import open_threshold
from .network import CrossingError, search_cap

CHUNK = 4096


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 0.5
    master_seed: int = 20240601
    replicates: int = 10_000
    horizons: tuple = (100, 316, 1000, 3162, 10000)
    epsilon: float = 0.4
    n_scale: int = 10_000
    workers: int = 1
    t: float = 1.0  # scaled time for eta and marginal experiments
    sigma_normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if any(h < 0 for h in self.horizons) or any(
                b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be nonnegative and strictly increasing")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n_scale < 1:
            raise ValueError("n_scale must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.t < 0:
            raise ValueError("t must be nonnegative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["horizons"] = list(self.horizons)
        return d

    @property
    def config_hash(self) -> str:
        """Digest of everything that affects results (the worker count does not)."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    censored: int = 0
    seed: int = 0
    config_hash: str = ""
    failures: int = 0


def proportion(successes: int, n: int, cfg: ExperimentConfig | None = None, censored: int = 0,
               failures: int = 0) -> Estimate:
    v = successes / n if n else 0.0
    se = math.sqrt(v * (1 - v) / n) if n else 0.0
    seed = cfg.master_seed if cfg else 0
    h = cfg.config_hash if cfg else ""
    return Estimate(v, se, n, censored, seed, h, failures)


# ---------------------------------------------------------------------------
# parallel driver


def _run(kernel, n: int, workers: int):
    """Call ``kernel(i0, i1)`` over fixed chunks of [0, n)."""
    chunks = [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        for i0, i1 in chunks:
            kernel(i0, i1)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda c: kernel(*c), chunks))


def _status_counts(status: np.ndarray) -> int:
    if np.any(status == _kernels.CROSSING):
        raise CrossingError("paths crossed in a simulated replicate")
    return int(np.count_nonzero(status == _kernels.OVERFLOW))


def _setup(p, master_seed):
    return np.uint64(master_seed), np.uint64(open_threshold(p)), search_cap(p)


# ---------------------------------------------------------------------------
# one-step samples


def sample_increments(p: float, replicates: int, master_seed: int, workers: int = 1) -> np.ndarray:
    """X^{(0,0)}(1) over independent environments."""
    master, thr, kmax = _setup(p, master_seed)
    out = np.empty(replicates, dtype=np.int64)
    status = np.empty(replicates, dtype=np.int8)
    _run(lambda a, b: _kernels.batch_hops(master, thr, a, b, 0, 0, kmax, out, status),
         replicates, workers)
    if _status_counts(status):
        raise RuntimeError("search overflow in increment sampling")
    return out


def sample_pair_increments(p: float, offsets, replicates: int, master_seed: int,
                           workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Displacements of the hops from (0, 0) and from each (m, 0), same environment."""
    offsets = np.asarray(offsets, dtype=np.int64)
    master, thr, kmax = _setup(p, master_seed)
    left = np.empty(replicates, dtype=np.int64)
    right = np.empty((replicates, len(offsets)), dtype=np.int64)
    status = np.empty(replicates, dtype=np.int8)
    _run(lambda a, b: _kernels.batch_pair_hops(master, thr, a, b, offsets, kmax, left, right, status),
         replicates, workers)
    if _status_counts(status):
        raise RuntimeError("search overflow in pair sampling")
    return left, right


def increment_frequencies(cfg: ExperimentConfig, k_max: int) -> dict:
    """Empirical P(X(1) = k) for |k| <= k_max, as Estimates."""
    d = sample_increments(cfg.p, cfg.replicates, cfg.master_seed, cfg.workers)
    counts = np.bincount(np.clip(d, -k_max - 1, k_max + 1) + k_max + 1, minlength=2 * k_max + 3)
    return {k: proportion(int(counts[k + k_max + 1]), cfg.replicates, cfg)
            for k in range(-k_max, k_max + 1)}


def persistence_frequencies(cfg: ExperimentConfig, separations) -> dict:
    """Empirical P(Z_1 = m | Z_0 = m) per separation m."""
    left, right = sample_pair_increments(cfg.p, separations, cfg.replicates, cfg.master_seed,
                                         cfg.workers)
    return {int(m): proportion(int(np.count_nonzero(right[:, i] == left)), cfg.replicates, cfg)
            for i, m in enumerate(separations)}


# ---------------------------------------------------------------------------
# coalescence times


def sample_tau(p: float, a: int, b: int, horizon: int, replicates: int, master_seed: int,
               workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Coalescence times of the paths from (a, 0) and (b, 0); -1 when censored."""
    master, thr, kmax = _setup(p, master_seed)
    taus = np.empty(replicates, dtype=np.int64)
    status = np.empty(replicates, dtype=np.int8)
    _run(lambda i0, i1: _kernels.batch_tau(master, thr, i0, i1, a, b, horizon, kmax, taus, status),
         replicates, workers)
    _status_counts(status)
    return taus, status


def _survival_series(cfg, taus, status, horizons):
    ok = status == _kernels.OK
    failures = int(np.count_nonzero(~ok))
    n = int(np.count_nonzero(ok))
    tv = taus[ok]
    out = []
    for h in horizons:
        alive = int(np.count_nonzero((tv == _kernels.CENSORED) | (tv > h)))
        out.append((h, proportion(alive, n, cfg, censored=alive, failures=failures)))
    return out


def estimate_tau_tail(cfg: ExperimentConfig, separation: int = 1) -> list:
    """[(t, Estimate of P(tau > t))] for the paths from (0, 0) and (m, 0).

    ``censored`` counts replicates still apart at t, so censored plus
    coalesced equals the replicate count at every horizon.
    """
    if separation < 1:
        raise ValueError("separation must be at least 1")
    horizon = max(cfg.horizons) if cfg.horizons else 0
    taus, status = sample_tau(cfg.p, 0, separation, horizon, cfg.replicates, cfg.master_seed,
                              cfg.workers)
    return _survival_series(cfg, taus, status, cfg.horizons)


# ---------------------------------------------------------------------------
# eta and scaled experiments


def scaled_width(cfg: ExperimentConfig) -> int:
    """Lattice width floor(eps * sigma * sqrt(N)) of the scaled interval [0, eps]."""
    scale = math.sqrt(sigma2(cfg.p)) if cfg.sigma_normalize and cfg.p < 1 else 1.0
    return int(math.floor(cfg.epsilon * scale * math.sqrt(cfg.n_scale)))


def scaled_horizon(cfg: ExperimentConfig) -> int:
    return int(math.floor(cfg.t * cfg.n_scale))


def sample_eta(cfg: ExperimentConfig, checkpoints=None) -> np.ndarray:
    """eta counts per replicate (rows) at each checkpoint level (columns)."""
    checkpoints = np.asarray([scaled_horizon(cfg)] if checkpoints is None else checkpoints,
                             dtype=np.int64)
    if np.any(np.diff(checkpoints) < 0) or np.any(checkpoints < 0):
        raise ValueError("checkpoints must be nonnegative and sorted")
    master, thr, kmax = _setup(cfg.p, cfg.master_seed)
    width = scaled_width(cfg)
    counts = np.zeros((cfg.replicates, len(checkpoints)), dtype=np.int64)
    status = np.empty(cfg.replicates, dtype=np.int8)
    _run(lambda a, b: _kernels.batch_eta(master, thr, a, b, 0, width, checkpoints, kmax,
                                         counts, status),
         cfg.replicates, cfg.workers)
    if _status_counts(status):
        raise RuntimeError("search overflow in eta sampling")
    return counts


def estimate_eta_ge(cfg: ExperimentConfig, threshold: int) -> Estimate:
    """P(eta(0, tN; 0, width) >= threshold) for threshold 2 or 3."""
    if threshold not in (2, 3):
        raise ValueError("threshold must be 2 or 3")
    if scaled_width(cfg) == 0:
        return proportion(0, cfg.replicates, cfg)
    counts = sample_eta(cfg)[:, 0]
    return proportion(int(np.count_nonzero(counts >= threshold)), cfg.replicates, cfg)


def boundary_survival(cfg: ExperimentConfig) -> np.ndarray:
    """Per replicate: have the paths from (0, 0) and (width, 0) not met by tN?"""
    width, horizon = scaled_width(cfg), scaled_horizon(cfg)
    if width == 0:
        return np.zeros(cfg.replicates, dtype=bool)
    taus, _ = sample_tau(cfg.p, 0, width, horizon, cfg.replicates, cfg.master_seed, cfg.workers)
    return taus == _kernels.CENSORED


def b2_factors(cfg: ExperimentConfig) -> dict:
    """Both sides of eps^-1 P(eta >= 3) <= sqrt(N) P(tau > tN) P(tau_eps > tN).

    The right side is a product of two separately estimated survival
    probabilities; it is reported, not tested.
    """
    horizon = scaled_horizon(cfg)
    eta3 = estimate_eta_ge(cfg, 3)
    taus1, st1 = sample_tau(cfg.p, 0, 1, horizon, cfg.replicates, cfg.master_seed, cfg.workers)
    tau1 = _survival_series(cfg, taus1, st1, [horizon])[0][1]
    tau_eps = proportion(int(np.count_nonzero(boundary_survival(cfg))), cfg.replicates, cfg)
    return {"epsilon": cfg.epsilon, "width": scaled_width(cfg), "horizon": horizon,
            "eta_ge_3": eta3.value, "eta_ge_3_stderr": eta3.stderr,
            "lhs": eta3.value / cfg.epsilon,
            "tau_survival": tau1.value, "tau_eps_survival": tau_eps.value,
            "rhs": math.sqrt(cfg.n_scale) * tau1.value * tau_eps.value}


def sample_endpoints(p: float, x: int, steps: int, replicates: int, master_seed: int,
                     workers: int = 1) -> np.ndarray:
    master, thr, kmax = _setup(p, master_seed)
    out = np.empty(replicates, dtype=np.int64)
    status = np.empty(replicates, dtype=np.int8)
    _run(lambda a, b: _kernels.batch_endpoint(master, thr, a, b, x, steps, kmax, out, status),
         replicates, workers)
    if _status_counts(status):
        raise RuntimeError("search overflow in endpoint sampling")
    return out


@dataclass
class MarginalResult:
    t: float
    n_scale: int
    samples: np.ndarray = field(repr=False)
    mean: float
    variance: float
    ks_statistic: float | None
    ks_pvalue: float | None
    ks_critical: float
    mean_bound: float

    @property
    def passed(self) -> bool:
        if self.ks_statistic is None:
            return bool(np.all(self.samples == 0))
        return self.ks_statistic < self.ks_critical and abs(self.mean) <= self.mean_bound


def estimate_marginal(cfg: ExperimentConfig, slack: float = 1.5) -> MarginalResult:
    """X^{0,0}(floor(N t)) / (sigma sqrt(N)) against Normal(0, t).

    The KS critical value is the asymptotic 1% point 1.63/sqrt(R) times ``slack``.
    """
    if cfg.n_scale < 1000:
        raise ValueError("n_scale must be at least 1000")
    steps = scaled_horizon(cfg)
    raw = sample_endpoints(cfg.p, 0, steps, cfg.replicates, cfg.master_seed, cfg.workers)
    scale = math.sqrt(sigma2(cfg.p) * cfg.n_scale) if cfg.p < 1 else math.sqrt(cfg.n_scale)
    z = raw / scale
    crit = slack * 1.63 / math.sqrt(cfg.replicates)
    mean_bound = 3 * math.sqrt(cfg.t / cfg.replicates)
    if steps == 0 or cfg.t == 0:
        return MarginalResult(cfg.t, cfg.n_scale, z, 0.0, 0.0, None, None, crit, mean_bound)
    ks = stats.kstest(z, "norm", args=(0.0, math.sqrt(cfg.t)))
    return MarginalResult(cfg.t, cfg.n_scale, z, float(z.mean()), float(z.var(ddof=1)),
                          float(ks.statistic), float(ks.pvalue), crit, mean_bound)


def estimate_pair_meeting_scaled(cfg: ExperimentConfig) -> list:
    """[(t, Estimate of P(no meeting by tN), Brownian reference)] for t = horizon / N.

    The paths start floor(eps * sigma * sqrt(N)) apart; the reference is the
    unit-diffusion survival erf(eps / (2 sqrt(t))).
    """
    width = scaled_width(cfg)
    out = []
    if width == 0:
        for h in cfg.horizons:
            t = h / cfg.n_scale
            out.append((t, proportion(0, cfg.replicates, cfg), 0.0))
        return out
    taus, status = sample_tau(cfg.p, 0, width, max(cfg.horizons), cfg.replicates,
                              cfg.master_seed, cfg.workers)
    for h, est in _survival_series(cfg, taus, status, cfg.horizons):
        t = h / cfg.n_scale
        ref = bw_meet_survival(BmPairSpec(cfg.epsilon, t)) if t > 0 else 1.0
        out.append((t, est, ref))
    return out


def conditional_left_mc(p: float, j: int, k: int, positions, replicates: int, master_seed: int,
                        workers: int = 1) -> Estimate:
    """Rejection estimate of P(X_k(H) < X_j(H) | X_j = positions)."""
    path = np.asarray(positions, dtype=np.int64)
    if path[0] != j:
        raise ValueError("path must start at j")
    master, thr, kmax = _setup(p, master_seed)
    accepted = np.zeros(replicates, dtype=np.bool_)
    left_of = np.zeros(replicates, dtype=np.bool_)
    status = np.empty(replicates, dtype=np.int8)
    _run(lambda a, b: _kernels.batch_conditioned_pair(master, thr, a, b, j, k, path, kmax,
                                                      accepted, left_of, status),
         replicates, workers)
    n = int(accepted.sum())
    est = proportion(int(left_of[accepted].sum()), n)
    return Estimate(est.value, est.stderr, n, 0, master_seed, "", 0)
