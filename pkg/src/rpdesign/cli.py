"""Command-line front door: synthetic benchmarks and dataset analysis runs.

One JSON run-config file drives everything; flags cover only the mode,
config path, output directory, seed override, and worker count.  Every
artifact embeds the config digest and master seed, and artifact content is
a pure function of (config, seed): rerunning a config overwrites outputs
byte for byte.  Wall-clock timings go to stdout only, never into
artifacts.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import RfConfig, sequential_pipeline
from .data import Bounds, DataError, derive_bounds, load_dataset, split_folds, standardize_noise
from .design import DesignGoal, Formulation
from .search import FitnessWeights, GaConfig, ga_search
from .synth import (
    ALL_METHODS,
    BUILTIN_SETTINGS,
    ExperimentSetting,
    MetricsReport,
    get_setting,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


_GOAL_KEYS = {"formulation", "target", "alpha"}
_GA_KEYS = {"population", "generations", "tournament_size", "crossover_prob",
            "mutation_prob", "elitism"}
_FITNESS_KEYS = {"rho_v", "rho_c"}
_RF_KEYS = {"trees", "max_depth", "min_samples_leaf", "features_per_split"}
_SETTING_KEYS = {
    "id", "n_control", "n_noise", "n_dummy", "n_obs", "sigma_eps", "sigma_x",
    "mean_x", "sigma_z", "mean_z", "sigma_d", "mean_d", "sigma_b1", "sigma_b2",
    "sigma_b3", "sigma_b4", "runs", "ga_pop", "ga_gens",
}
_SCHEMA = {
    "mode": None,
    "seed": None,
    "out": None,
    "jobs": None,
    "synth": {
        "experiments": None,
        "custom_setting": _SETTING_KEYS,
        "methods": None,
        "runs": None,
        "sigma_eps_scale": None,
        "fitness": _FITNESS_KEYS,
    },
    "analyze": {
        "dataset": None,
        "roles": "free",  # arbitrary column names
        "goal": _GOAL_KEYS,
        "ga": _GA_KEYS,
        "baselines": None,
        "select_count": None,
        "folds": None,
        "fitness": _FITNESS_KEYS,
        "bounds": "free",
        "mi_bins": None,
        "rf": _RF_KEYS,
    },
}


def _check_keys(obj, schema, path=""):
    if not isinstance(obj, dict):
        return
    for key, value in obj.items():
        where = f"{path}.{key}" if path else key
        if isinstance(schema, dict):
            if key not in schema:
                raise ConfigError(f"unknown config key {where!r}")
            sub = schema[key]
            if sub == "free":
                continue
            if isinstance(sub, (dict, set)):
                _check_keys(value, sub, where)
        elif isinstance(schema, set):
            if key not in schema:
                raise ConfigError(f"unknown config key {where!r}")


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, _SCHEMA)
    return cfg


def config_digest(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list], stamp: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _goal_from_config(raw: dict | None) -> DesignGoal:
    raw = raw or {}
    name = str(raw.get("formulation", "constrained_target")).lower()
    try:
        formulation = Formulation(name)
    except ValueError:
        raise ConfigError(f"unknown goal formulation {name!r}") from None
    try:
        return DesignGoal(
            formulation=formulation,
            target=raw.get("target"),
            alpha=raw.get("alpha"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid goal: {exc}") from None


def _ga_from_config(raw: dict | None, seed: int) -> GaConfig:
    raw = dict(raw or {})
    raw.setdefault("population", 20)
    raw.setdefault("generations", 40)
    try:
        return GaConfig(seed=seed, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid ga config: {exc}") from None


def _fitness_from_config(raw: dict | None) -> FitnessWeights:
    raw = raw or {}
    return FitnessWeights(rho_v=raw.get("rho_v"), rho_c=raw.get("rho_c"))


def _setting_from_config(raw: dict) -> ExperimentSetting:
    try:
        return ExperimentSetting(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid custom setting: {exc}") from None


def _aggregate_rows(report: MetricsReport) -> list[list]:
    rows = []
    for method, agg in report.aggregates.items():
        rows.append([
            report.setting.id, method, agg.runs_completed, agg.runs_failed,
            agg.real_fraction_mean, agg.real_fraction_std,
            agg.dummy_fraction_mean, agg.dummy_fraction_std,
            agg.ratio_means["b1"], agg.ratio_means["b2"],
            agg.ratio_means["b3"], agg.ratio_means["b4"],
            agg.missing_totals["b1"], agg.missing_totals["b2"],
            agg.missing_totals["b3"], agg.missing_totals["b4"],
            agg.target_gap_true_mean, agg.variance_true_mean,
            agg.variance_optimum_mean,
        ])
    return rows


_AGGREGATE_HEADER = [
    "setting", "method", "runs_completed", "runs_failed",
    "real_fraction_mean", "real_fraction_std",
    "dummy_fraction_mean", "dummy_fraction_std",
    "ratio_b1", "ratio_b2", "ratio_b3", "ratio_b4",
    "missing_b1", "missing_b2", "missing_b3", "missing_b4",
    "target_gap_true_mean", "variance_true_mean", "variance_optimum_mean",
]

_REPLICATION_HEADER = [
    "setting", "replication", "method", "seed", "selected",
    "real_fraction", "dummy_fraction",
    "ratio_b1", "ratio_b2", "ratio_b3", "ratio_b4",
    "missing_b1", "missing_b2", "missing_b3", "missing_b4",
    "target_gap_true", "variance_true", "variance_optimum",
    "predicted_mean", "predicted_variance", "constraint_residual",
    "converged", "objective", "failed", "error",
]


def _replication_rows(report: MetricsReport) -> list[list]:
    rows = []
    for r in report.records:
        rows.append([
            r.setting_id, r.replication, r.method, r.seed, "+".join(r.selected),
            r.real_fraction, r.dummy_fraction,
            r.ratio_means["b1"], r.ratio_means["b2"],
            r.ratio_means["b3"], r.ratio_means["b4"],
            r.missing_counts["b1"], r.missing_counts["b2"],
            r.missing_counts["b3"], r.missing_counts["b4"],
            r.target_gap_true, r.variance_true, r.variance_optimum,
            r.predicted_mean, r.predicted_variance, r.constraint_residual,
            int(r.converged), r.objective, int(r.failed), r.error,
        ])
    return rows


def run_synth(cfg: dict, out: Path, seed: int, jobs: int, stamp: str) -> None:
    section = cfg.get("synth") or {}
    if "custom_setting" in section:
        settings = [_setting_from_config(section["custom_setting"])]
    else:
        ids = section.get("experiments")
        if not ids:
            raise ConfigError("synth.experiments (or synth.custom_setting) is required")
        try:
            settings = [get_setting(int(i)) for i in ids]
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    methods = tuple(section.get("methods", list(ALL_METHODS)))
    for m in methods:
        if m not in ALL_METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {ALL_METHODS}")
    scale = float(section.get("sigma_eps_scale", 1.0))
    runs = section.get("runs")
    weights = _fitness_from_config(section.get("fitness"))

    agg_rows: list[list] = []
    rep_rows: list[list] = []
    summary_lines = [f"synthetic benchmark  {stamp}", ""]
    for setting in settings:
        if scale != 1.0:
            setting = replace(setting, sigma_eps=setting.sigma_eps * scale)
        t0 = time.perf_counter()
        report = run_experiment(
            setting, methods=methods, master_seed=seed, runs=runs, jobs=jobs,
            fitness_weights=weights,
        )
        elapsed = time.perf_counter() - t0
        agg_rows.extend(_aggregate_rows(report))
        rep_rows.extend(_replication_rows(report))
        print(f"setting {setting.id}: {len(report.records)} records in {elapsed:.1f}s")
        summary_lines.append(f"setting {setting.id} (C={setting.n_control}, N={setting.n_noise}, "
                             f"D={setting.n_dummy}, O={setting.n_obs})")
        for method, agg in report.aggregates.items():
            summary_lines.append(
                f"  {method:<9s} real={agg.real_fraction_mean:.3f} "
                f"dummy={agg.dummy_fraction_mean:.3f} "
                f"ratios b1={agg.ratio_means['b1']:.3f} b2={agg.ratio_means['b2']:.3f} "
                f"b3={agg.ratio_means['b3']:.3f} b4={agg.ratio_means['b4']:.3f} "
                f"gap={agg.target_gap_true_mean:.4f} "
                f"var={agg.variance_true_mean:.4f}/{agg.variance_optimum_mean:.4f}"
            )
        summary_lines.append("")

    _write_csv(out / "aggregates.csv", _AGGREGATE_HEADER, agg_rows, stamp)
    _write_csv(out / "replications.csv", _REPLICATION_HEADER, rep_rows, stamp)
    (out / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")


def run_analyze(cfg: dict, out: Path, seed: int, stamp: str) -> None:
    section = cfg.get("analyze") or {}
    path = section.get("dataset")
    roles = section.get("roles")
    if not path or not roles:
        raise ConfigError("analyze.dataset and analyze.roles are required")
    goal = _goal_from_config(section.get("goal"))
    ga_cfg = _ga_from_config(section.get("ga"), seed)
    weights = _fitness_from_config(section.get("fitness"))

    d = standardize_noise(load_dataset(path, roles))
    if section.get("bounds"):
        base = derive_bounds(d)
        lows = dict(base.lows)
        highs = dict(base.highs)
        for col, pair in section["bounds"].items():
            if col not in d.control_names:
                raise ConfigError(f"bounds given for non-control column {col!r}")
            lows[col], highs[col] = float(pair[0]), float(pair[1])
        bounds = Bounds(lows=lows, highs=highs, quantiles=dict(base.quantiles))
    else:
        bounds = derive_bounds(d)

    folds = section.get("folds")
    fold_assignment = split_folds(d, int(folds), seed=seed) if folds is not None else None

    t0 = time.perf_counter()
    result = ga_search(d, goal, ga_cfg, bounds=bounds, weights=weights,
                       folds=fold_assignment)
    elapsed = time.perf_counter() - t0
    best = result.best_fitness
    print(f"search: {result.evaluations} fitness evaluations in {elapsed:.1f}s")

    select_count = section.get("select_count") or max(len(result.selected), 1)
    baseline_results = {}
    for name in section.get("baselines", []):
        pipe = sequential_pipeline(
            d, name, int(select_count), goal, bounds=bounds,
            mi_bins=section.get("mi_bins", "auto"),
            rf_cfg=RfConfig(seed=seed, **(section.get("rf") or {})),
            optimizer_seed=seed,
        )
        baseline_results[name] = pipe

    model_doc = {
        "provenance": stamp,
        "seed": seed,
        "selected": list(result.selected),
        "model": best.model.to_dict(),
        "solution": best.solution.to_dict(),
        "objective": best.objective,
        "components": best.components,
        "baselines": {
            name: {
                "selected": list(p.selected),
                "solution": p.solution.to_dict(),
                "ranking": [[v, s] for v, s in p.ranking.entries],
            }
            for name, p in baseline_results.items()
        },
    }
    (out / "model.json").write_text(
        json.dumps(model_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    hist_rows = [
        [g.generation, g.best_objective, g.mean_objective, g.best_bits]
        for g in result.history
    ]
    _write_csv(out / "history.csv",
               ["generation", "best_objective", "mean_objective", "best_bits"],
               hist_rows, stamp)

    lines = [
        f"analysis run  {stamp}",
        "",
        f"dataset: {path}  rows={d.n}  pool={len(d.control_names)} controls, "
        f"{len(d.noise_names)} noise",
        f"goal: {goal.formulation.value}"
        + (f" target={goal.target}" if goal.target is not None else "")
        + (f" alpha={goal.alpha}" if goal.alpha is not None else ""),
        f"selected: {', '.join(result.selected) if result.selected else '(none)'}",
        f"x_hat: {[round(float(v), 6) for v in best.solution.x_hat]}",
        f"predicted mean: {best.solution.predicted_mean!r}",
        f"predicted variance: {best.solution.predicted_variance!r}",
        f"constraint residual: {best.solution.constraint_residual!r}",
        f"converged: {best.solution.converged}",
        f"objective: {best.objective!r}",
    ]
    for name, p in baseline_results.items():
        lines.append(
            f"baseline {name}: selected {', '.join(p.selected)}; "
            f"mean={p.solution.predicted_mean!r} var={p.solution.predicted_variance!r}"
        )
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _error_record(out: Path, status: int, exc: Exception) -> None:
    record = {"status": status, "error": type(exc).__name__, "message": str(exc)}
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    except OSError:
        pass
    print(f"error: {record['error']}: {record['message']}", file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rpdesign",
        description="Control-variable selection and robust parameter design "
                    "from observational data.",
    )
    parser.add_argument("--config", required=True, help="path to JSON run config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--mode", choices=("synth", "analyze"), default=None,
                        help="run mode (overrides config)")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: config value or all cores)")
    args = parser.parse_args(argv)

    out = Path("runs")
    try:
        cfg = load_config(args.config)
        mode = args.mode or cfg.get("mode")
        if mode not in ("synth", "analyze"):
            raise ConfigError(f"mode must be 'synth' or 'analyze', got {mode!r}")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out = Path(args.out or cfg.get("out", "runs"))
        jobs_raw = args.jobs if args.jobs is not None else cfg.get("jobs", "auto")
        jobs = os.cpu_count() or 1 if jobs_raw == "auto" else max(int(jobs_raw), 1)
        digest = config_digest(cfg)
        stamp = f"config_digest={digest} seed={seed}"
    except ConfigError as exc:
        _error_record(out, EXIT_CONFIG, exc)
        return EXIT_CONFIG

    try:
        out.mkdir(parents=True, exist_ok=True)
        if mode == "synth":
            run_synth(cfg, out, seed, jobs, stamp)
        else:
            run_analyze(cfg, out, seed, stamp)
    except ConfigError as exc:
        _error_record(out, EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except DataError as exc:
        _error_record(out, EXIT_DATA, exc)
        return EXIT_DATA
    except (ValueError, KeyError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _error_record(out, EXIT_NUMERICAL, exc)
        return EXIT_NUMERICAL
    print(f"wrote artifacts to {out}  [{stamp}]")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
