"""Command-line front end: ``dynbridge --config run.toml --experiment all``.

Exit status is 0 when every selected check passes, 1 when one fails and 2
for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .config import SELECTORS, RunConfig, dump_config, load_config
from .errors import AssumptionError, ConfigError, SingularityError
from .filtering import write_trace_csv
from .kernels import drift_h, drift_post, drift_pre, ell, h_surv, q_killed
from .noise import NoiseBundle
from .paths import simulate_X, simulate_Z, write_binary, write_csv
from .timechange import Lambda_of, lambda_of, sigma2_of, v_of, validate
from .verify import (TestReport, check_brownian, check_comparisons, check_filtering,
                     check_hitting_law, check_kernel_identities, check_r_law,
                     check_zero_identity, hitting_survival_table)

EXPERIMENTS = SELECTORS[:-1]


def check_seed(master: int, name: str) -> int:
    """Per-experiment seed derived from the master seed and the experiment name."""
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _git_describe() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
                             timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() or "unknown"


# experiments: each returns a list of reports and writes its CSVs into ``out``


def run_validate_timechange(cfg: RunConfig, seed: int, out: Path) -> list[TestReport]:
    spec = cfg.spec
    rep = validate(spec)
    t = np.logspace(math.log10(spec.t_max) - 6, math.log10(spec.t_max), 200)
    lam = Lam = np.full_like(t, np.nan)
    if rep.assumption2_ok:
        lam = np.asarray(lambda_of(spec, t))
        Lam = np.asarray(Lambda_of(spec, t))
    V = np.asarray(v_of(spec, t))
    _write_rows(out / "timechange.csv", ["t", "sigma2", "V", "V_minus_t", "lambda", "Lambda"],
                zip(t, np.asarray(sigma2_of(spec, t)), V, V - t, lam, Lam))
    return [TestReport("timechange_admissible", 0.0 if rep.ok else 1.0, 0.0, 1, seed,
                       {"assumption1": rep.assumption1_ok, "assumption2": rep.assumption2_ok,
                        "integral": rep.assumption2_integral})]


def run_kernels_table(cfg: RunConfig, seed: int, out: Path) -> list[TestReport]:
    rows = []
    for t in (0.1, 0.25, 0.5, 1.0, 2.0, 4.0):
        for x in (0.25, 0.5, 1.0, 2.0):
            for z in (0.5, 1.0, 2.0):
                rows.append((t, x, z, float(q_killed(t, x, z)), float(h_surv(t, x)),
                             float(ell(t, x)), float(drift_pre(t, x, z)),
                             float(drift_post(t, x)), float(drift_h(t, x))))
    _write_rows(out / "kernels.csv",
                ["t", "x", "z", "q", "H", "ell", "drift_pre", "drift_post", "drift_h"], rows)
    return check_kernel_identities(cfg.spec, cfg.thresholds, seed)


def run_simulate(cfg: RunConfig, seed: int, out: Path) -> list[TestReport]:
    spec, ctrl = cfg.spec, cfg.controller
    nb = NoiseBundle.for_paths(seed, cfg.n_paths, ctrl.grid(cfg.horizon))
    z = simulate_Z(spec, nb)
    x = simulate_X(spec, nb, z, ctrl)
    pdir = out / "paths"
    pdir.mkdir(exist_ok=True)
    for j in range(min(cfg.checks.csv_paths, cfg.n_paths)):
        with open(pdir / f"path_{j:05d}.csv", "w") as fh:
            write_csv(fh, z, x, j)
    with open(out / "X.bin", "wb") as fh:
        write_binary(fh, x, cfg.hash())
    end = x.values[:, -1]
    summary = [
        ("n_paths", cfg.n_paths),
        ("horizon", cfg.horizon),
        ("mean_X_end", float(end.mean())),
        ("sd_X_end", float(end.std(ddof=1))),
        ("fraction_absorbed", float(np.mean(~np.isnan(x.absorbed_at)))),
        ("fraction_tau_before_end", float(np.mean(~np.isnan(z.tau)))),
        ("mean_substeps", float(x.diagnostics["substeps"].mean())),
        ("clamps", int(x.diagnostics["clamps"].sum())),
    ]
    _write_rows(out / "simulate_summary.csv", ["quantity", "value"], summary)
    print(f"  mean(X at {cfg.horizon:g}) = {summary[2][1]:.6f}")
    return []


def run_hitting_dist(cfg: RunConfig, seed: int, out: Path) -> list[TestReport]:
    reports = check_hitting_law(cfg.spec, cfg.checks.hitting_paths, seed, cfg.controller,
                                cfg.thresholds)
    d = reports[0].details
    table = hitting_survival_table(d.pop("v_tau"), d["upper"])
    _write_rows(out / "hitting_dist.csv", ["t", "empirical_survival", "H"], table)
    return reports


def run_verify_bm(cfg, seed, out):
    return check_brownian(cfg.spec, cfg.checks.brownian_paths, seed, cfg.controller,
                          cfg.thresholds, horizon=cfg.horizon)


def run_verify_zero(cfg, seed, out):
    return check_zero_identity(cfg.spec, cfg.checks.zero_paths, seed, cfg.controller,
                               cfg.thresholds)


def run_compare(cfg, seed, out):
    reports = check_comparisons(cfg.spec, cfg.checks.compare_paths, seed, cfg.controller,
                                cfg.thresholds, horizon=cfg.horizon,
                                halvings=cfg.checks.compare_halvings)
    levels = reports[0].details.pop("levels")
    keys = list(levels[0])
    _write_rows(out / "compare_levels.csv", keys, [[lv[k] for k in keys] for lv in levels])
    for r in reports:
        r.details.pop("levels", None)
    reports += check_r_law(cfg.spec, cfg.checks.r_paths, seed + 1, cfg.controller,
                           cfg.thresholds, t=cfg.horizon)
    return reports


def run_filter_compare(cfg, seed, out):
    reports, extra = check_filtering(cfg.spec, seed, cfg.thresholds, t=cfg.checks.filter_horizon,
                                     n_obs=cfg.checks.filter_observations,
                                     particles=cfg.checks.filter_particles,
                                     n_main=cfg.n_particles, dt_base=cfg.dt_base,
                                     scheme=cfg.checks.filter_resampling)
    with open(out / "filter_trace.csv", "w") as fh:
        write_trace_csv(fh, cfg.spec, cfg.checks.filter_horizon, extra["result"])
    by = reports[0].details["by_particles"]
    _write_rows(out / "filter_scaling.csv", ["particles", "mean_ks"], sorted(by.items()))
    return reports


RUNNERS = {
    "validate-timechange": run_validate_timechange,
    "kernels-table": run_kernels_table,
    "simulate": run_simulate,
    "hitting-dist": run_hitting_dist,
    "verify-bm": run_verify_bm,
    "verify-zero": run_verify_zero,
    "compare": run_compare,
    "filter-compare": run_filter_compare,
}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist()) if v.size <= 64 else f"<array of {v.size}>"
    if isinstance(v, (np.floating, float)):
        return None if not math.isfinite(v) else float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def results_hash(reports) -> str:
    """Hash of the report table; identical across re-runs with the same config."""
    rows = [r.row() for r in sorted(reports, key=lambda r: r.name)]
    blob = json.dumps([{k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()}
                       for row in rows], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def run(cfg: RunConfig) -> tuple[int, Path, list]:
    """Execute the selected experiments; returns (status, run directory, reports)."""
    out = Path(cfg.out) / cfg.run_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(dump_config(cfg))
    selected = EXPERIMENTS if cfg.experiment == "all" else (cfg.experiment,)
    seeds = {name: check_seed(cfg.seed, name) for name in selected}
    reports, timings = [], {}
    t_start = time.perf_counter()
    for name in selected:
        t0 = time.perf_counter()
        print(f"[{name}] seed {seeds[name]}", flush=True)
        try:
            got = RUNNERS[name](cfg, seeds[name], out)
        except (AssumptionError, SingularityError) as exc:
            raise ConfigError(str(exc), field="timechange") from None
        timings[name] = time.perf_counter() - t0
        for r in got:
            r.details["experiment"] = name
            print(f"  {r.line()}", flush=True)
        reports += got
    wall = time.perf_counter() - t_start
    reports.sort(key=lambda r: r.name)
    _write_rows(out / "reports.csv", ["name", "statistic", "threshold", "n", "seed", "passed"],
                [[r.name, r.statistic, r.threshold, r.n, r.seed, r.passed] for r in reports])
    passed = all(r.passed for r in reports)
    manifest = {
        "run_id": cfg.run_id,
        "config_hash": cfg.hash(),
        "master_seed": cfg.seed,
        "experiment": cfg.experiment,
        "check_seeds": seeds,
        "wall_time_s": wall,
        "experiment_time_s": timings,
        "git_describe": _git_describe(),
        "version": __version__,
        "backend": _backend.name(),
        "threads": _backend.threads(),
        "results_hash": results_hash(reports),
        "passed": passed,
        "n_failed": sum(not r.passed for r in reports),
        "reports": [dict(r.row(), details=_jsonable(r.details)) for r in reports],
        "config": cfg.to_dict(),
    }
    (out / "manifest").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    lines = [r.line() for r in reports]
    verdict = "all checks passed" if passed else f"{manifest['n_failed']} check(s) failed"
    (out / "summary.txt").write_text("\n".join(lines + [verdict, f"wall time {wall:.1f}s"]) + "\n")
    print(f"{verdict}; wall time {wall:.1f}s; results in {out}")
    return (0 if passed else 1), out, reports


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynbridge", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML run configuration (defaults built in)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--experiment", choices=SELECTORS, help="override the experiment selector")
    p.add_argument("--out", help="override the output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(seed=args.seed, experiment=args.experiment, out=args.out)
        status, _, _ = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
