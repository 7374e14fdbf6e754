"""Command-line front end.

Every subcommand reads an optional JSON config (unknown keys are rejected),
writes CSV/JSON results plus ``manifest.json`` into ``--out``, and exits with

    0  all checks passed
    2  invalid configuration
    3  a statistical or exact check failed
    4  an exact enumeration exceeded its budget
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_STAT, EXIT_BUDGET = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# ---------------------------------------------------------------------------
# configuration

COMMON = {"p": 0.5, "master_seed": 20240601, "workers": 1}

DEFAULTS = {
    "increment-check": {**COMMON, "replicates": 1_000_000, "k_max": 10},
    "tau-tail": {**COMMON, "replicates": 100_000, "horizons": [100, 316, 1000, 3162, 10000],
                 "separation": 1, "synthetic_series": None},
    "eta": {**COMMON, "replicates": 10_000, "epsilon": 0.4, "epsilons": None, "n_scale": 10_000,
            "t": 1.0, "sigma_normalize": True, "slack": 0.02, "b2": False},
    "marginal": {**COMMON, "replicates": 10_000, "n_scale": 10_000, "t": 1.0, "slack": 1.5,
                 "write_samples": False},
    "bw-compare": {**COMMON, "epsilons": [1.0], "times": [0.5], "diffusion": 1.0,
                   "replicates": 0, "step": None, "lattice": False, "n_scale": 10_000,
                   "slack": 0.02},
    "coupling-verify": {"p": [0.5], "grids": [[1, 12]], "couplings": True,
                        "independence": True, "budget": 2**24, "master_seed": 0, "workers": 1},
}


def load_config(command: str, path: str | None, seed: int | None, workers: int | None) -> dict:
    cfg = dict(DEFAULTS[command])
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in user.items():
            if key not in cfg:
                raise ConfigError(f"unknown config field {key!r} for {command}")
            cfg[key] = value
    if seed is not None:
        cfg["master_seed"] = seed
    if workers is not None:
        cfg["workers"] = workers
    return cfg


def _experiment(cfg, **over):
    from .mc import ExperimentConfig

    fields = {k: v for k, v in cfg.items() if k in ExperimentConfig.__dataclass_fields__}
    fields.update(over)
    try:
        return ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


# ---------------------------------------------------------------------------
# commands; each returns (exit code, output files, summary)


def cmd_increment_check(cfg, out):
    from .analytics import enumerate_increment_pmf, increment_pmf
    from .mc import increment_frequencies

    k_max = cfg["k_max"]
    _require(isinstance(k_max, int) and k_max >= 0, "k_max must be a nonnegative integer")
    exp = _experiment(cfg)
    _require(exp.p < 1, "p must lie in (0, 1)")
    enum, residual = enumerate_increment_pmf(exp.p, k_max)
    mc = increment_frequencies(exp, k_max)
    rows, ok = [], True
    for k in range(-k_max, k_max + 1):
        closed = increment_pmf(exp.p, k)
        exact = float(enum.get(k, 0))
        est = mc[k]
        null_se = math.sqrt(closed * (1 - closed) / exp.replicates)
        ok &= abs(closed - exact) <= 1e-10 and abs(est.value - closed) <= 4 * null_se
        rows.append([k, closed, exact, est.value, est.stderr, exp.master_seed, exp.config_hash])
    path = os.path.join(out, "increment_check.csv")
    write_csv(path, ["k", "closed_form", "enumerated", "mc", "stderr", "seed", "config_hash"], rows)
    return (EXIT_OK if ok else EXIT_STAT), [path], {"passed": ok, "residual_mass": float(residual)}


def cmd_tau_tail(cfg, out):
    from .analytics import tail_exponent_check
    from .mc import estimate_tau_tail

    synthetic = cfg["synthetic_series"]
    if synthetic is not None:
        _require(isinstance(synthetic, list) and all(len(r) in (2, 3) for r in synthetic),
                 "synthetic_series must be a list of [t, survival] or [t, survival, stderr]")
        series = [(float(r[0]), float(r[1]), float(r[2]) if len(r) > 2 else 0.0) for r in synthetic]
        seed, chash = cfg["master_seed"], "synthetic"
    else:
        exp = _experiment(cfg)
        _require(isinstance(cfg["separation"], int) and cfg["separation"] >= 1,
                 "separation must be a positive integer")
        est = estimate_tau_tail(exp, cfg["separation"])
        series = [(t, e.value, e.stderr) for t, e in est]
        seed, chash = exp.master_seed, exp.config_hash
    try:
        report = tail_exponent_check([s for s in series if s[0] > 0])
    except ValueError as exc:
        raise ConfigError(f"horizons: {exc}") from exc
    csv_path = os.path.join(out, "tau_tail.csv")
    write_csv(csv_path, ["t", "survival", "stderr", "sqrt_t_survival"],
              [[t, v, se, math.sqrt(t) * v] for t, v, se in series])
    ok = report.slope_in_window and not report.degenerate
    summary = {"slope": report.slope, "slope_in_window": report.slope_in_window,
               "bounded": report.bounded, "max_scaled": report.max_scaled,
               "degenerate": report.degenerate, "notes": report.notes,
               "seed": seed, "config_hash": chash, "passed": ok}
    rep_path = os.path.join(out, "tau_tail_report.json")
    write_json(rep_path, summary)
    return (EXIT_OK if ok else EXIT_STAT), [csv_path, rep_path], summary


def cmd_eta(cfg, out):
    from .bw import BmPairSpec, bw_meet_survival
    from .mc import b2_factors, proportion, sample_eta, scaled_horizon, scaled_width

    epsilons = cfg["epsilons"] if cfg["epsilons"] is not None else [cfg["epsilon"]]
    _require(isinstance(epsilons, list) and epsilons, "epsilons must be a nonempty list")
    rows, b2_rows, ok = [], [], True
    for eps in epsilons:
        exp = _experiment(cfg, epsilon=eps)
        width, horizon = scaled_width(exp), scaled_horizon(exp)
        if width == 0:
            e2 = e3 = proportion(0, exp.replicates, exp)
        else:
            counts = sample_eta(exp)[:, 0]
            e2 = proportion(int((counts >= 2).sum()), exp.replicates, exp)
            e3 = proportion(int((counts >= 3).sum()), exp.replicates, exp)
        ref = bw_meet_survival(BmPairSpec(eps, exp.t)) if exp.t > 0 else 1.0
        if width >= 2:
            ok &= abs(e2.value - ref) < 3 * e2.stderr + cfg["slack"]
        rows.append([eps, width, horizon, e2.value, e2.stderr, e3.value, e3.stderr,
                     e3.value / eps, ref, exp.master_seed, exp.config_hash])
        if cfg["b2"] and width >= 1:
            f = b2_factors(exp)
            b2_rows.append([eps, f["lhs"], f["tau_survival"], f["tau_eps_survival"], f["rhs"],
                            exp.master_seed, exp.config_hash])
    path = os.path.join(out, "eta.csv")
    write_csv(path, ["epsilon", "width", "horizon", "eta_ge_2", "stderr_ge_2", "eta_ge_3",
                     "stderr_ge_3", "eta_ge_3_over_epsilon", "reference", "seed", "config_hash"],
              rows)
    files = [path]
    if b2_rows:
        bpath = os.path.join(out, "eta_b2_factors.csv")
        write_csv(bpath, ["epsilon", "eta_ge_3_over_epsilon", "tau_survival", "tau_eps_survival",
                          "sqrt_n_product", "seed", "config_hash"], b2_rows)
        files.append(bpath)
    return (EXIT_OK if ok else EXIT_STAT), files, {"passed": ok}


def cmd_marginal(cfg, out):
    from .mc import estimate_marginal

    exp = _experiment(cfg)
    try:
        res = estimate_marginal(exp, slack=cfg["slack"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = os.path.join(out, "marginal.csv")
    ks = res.ks_statistic if res.ks_statistic is not None else float("nan")
    pv = res.ks_pvalue if res.ks_pvalue is not None else float("nan")
    write_csv(path, ["t", "n_scale", "replicates", "mean", "variance", "ks_statistic",
                     "ks_pvalue", "ks_critical", "passed", "seed", "config_hash"],
              [[exp.t, exp.n_scale, exp.replicates, res.mean, res.variance, ks, pv,
                res.ks_critical, res.passed, exp.master_seed, exp.config_hash]])
    files = [path]
    if cfg["write_samples"]:
        spath = os.path.join(out, "marginal_samples.csv")
        write_csv(spath, ["index", "z", "seed", "config_hash"],
                  [[i, float(z), exp.master_seed, exp.config_hash] for i, z in enumerate(res.samples)])
        files.append(spath)
    return (EXIT_OK if res.passed else EXIT_STAT), files, {"passed": res.passed}


def cmd_bw_compare(cfg, out):
    from .bw import BmPairSpec, bw_meet_survival, pair_survival_mc
    from .mc import estimate_pair_meeting_scaled

    eps_list, times = cfg["epsilons"], cfg["times"]
    _require(isinstance(eps_list, list) and eps_list, "epsilons must be a nonempty list")
    _require(isinstance(times, list) and times, "times must be a nonempty list")
    _require(all(t > 0 for t in times), "times must be positive")
    reps = cfg["replicates"]
    _require(isinstance(reps, int) and reps >= 0, "replicates must be a nonnegative integer")
    exp = _experiment({**cfg, "replicates": max(reps, 1)}, epsilon=eps_list[0])
    rows, ok = [], True
    for i, eps in enumerate(eps_list):
        try:
            specs = [BmPairSpec(eps, t, cfg["diffusion"]) for t in times]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        lattice = {}
        if cfg["lattice"] and reps:
            lexp = _experiment({**cfg, "replicates": reps}, epsilon=eps,
                               horizons=[int(round(t * cfg["n_scale"])) for t in times])
            lattice = {round(t, 12): e for t, e, _ in estimate_pair_meeting_scaled(lexp)}
        for j, spec in enumerate(specs):
            ref = bw_meet_survival(spec)
            row = [spec.epsilon, spec.t, spec.diffusion, ref]
            if reps:
                v, se = pair_survival_mc(spec.epsilon, spec.t, reps,
                                         seed=exp.master_seed + 1000 * i + j,
                                         diffusion=spec.diffusion, step=cfg["step"])
                ok &= abs(v - ref) < 3 * se + cfg["slack"]
                row += [v, se]
            else:
                row += [float("nan"), float("nan")]
            le = lattice.get(round(round(spec.t * cfg["n_scale"]) / cfg["n_scale"], 12))
            if le is not None:
                ok &= abs(le.value - ref) < 3 * le.stderr + cfg["slack"]
                row += [le.value, le.stderr]
            else:
                row += [float("nan"), float("nan")]
            rows.append(row + [exp.master_seed, exp.config_hash])
    path = os.path.join(out, "bw_compare.csv")
    write_csv(path, ["epsilon", "t", "diffusion", "reference", "bm_mc", "bm_stderr",
                     "lattice_mc", "lattice_stderr", "seed", "config_hash"], rows)
    return (EXIT_OK if ok else EXIT_STAT), [path], {"passed": ok}


def cmd_coupling_verify(cfg, out):
    import hashlib

    from .coupling.probability import GridSpec
    from .coupling.verify import verify_all
    from .exact import EnumerationBudgetExceeded

    ps = cfg["p"] if isinstance(cfg["p"], list) else [cfg["p"]]
    _require(all(0 < float(p) < 1 for p in ps), "p must lie in (0, 1)")
    grids = cfg["grids"]
    _require(isinstance(grids, list) and all(isinstance(g, list) and len(g) in (2, 3)
                                             for g in grids),
             "grids must be a list of [height, width] or [height, width, j]")
    _require(all(1 <= g[0] <= 4 for g in grids), "grid height must lie in [1, 4]")
    try:
        specs = [GridSpec(*g) for g in grids]
    except EnumerationBudgetExceeded:
        raise
    except ValueError as exc:
        raise ConfigError(f"grids: {exc}") from exc
    echo = {k: v for k, v in cfg.items() if k != "workers"}
    chash = hashlib.sha256(json.dumps(echo, sort_keys=True).encode()).hexdigest()[:16]
    results = [verify_all(p, specs, cfg["couplings"], cfg["independence"], cfg["budget"])
               for p in ps]
    report = {"violations": [v for r in results for v in r["violations"]],
              "passed": all(r["passed"] for r in results), "results": results,
              "seed": cfg["master_seed"], "config_hash": chash}
    path = os.path.join(out, "coupling_verify.json")
    write_json(path, report)
    return (EXIT_OK if report["passed"] else EXIT_STAT), [path], {"passed": report["passed"]}


COMMANDS = {
    "increment-check": cmd_increment_check,
    "tau-tail": cmd_tau_tail,
    "eta": cmd_eta,
    "marginal": cmd_marginal,
    "bw-compare": cmd_bw_compare,
    "coupling-verify": cmd_coupling_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", default=".", help="output directory")
    parser = argparse.ArgumentParser(prog="grsnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    from .exact import EnumerationBudgetExceeded

    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = load_config(args.command, args.config, args.seed, args.workers)
        os.makedirs(args.out, exist_ok=True)
        code, files, summary = COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    manifest = {"tool": "grsnet", "version": __version__, "command": args.command,
                "config": cfg, "master_seed": cfg.get("master_seed"), "started": started,
                "finished": datetime.now(timezone.utc).isoformat(), "outputs": files,
                "summary": summary, "exit_code": code}
    write_json(os.path.join(args.out, "manifest.json"), manifest)
    print(json.dumps({"command": args.command, "exit_code": code, **summary}, default=str))
    return code


if __name__ == "__main__":
    sys.exit(main())
