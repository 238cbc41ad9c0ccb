"""``ridgelab`` command line: run configured experiments, write CSV tables
and SVG figures, and print monotonicity verdicts.

Each experiment kind reproduces one figure's data series at desk scale:

  samplewise-iso      isotropic risk vs n (per-lambda curves + tuned line)
  samplewise-noniso   non-isotropic risk vs n (triple descent + envelope)
  modelwise-proj      projected-model risk vs model size d
  counterexample      exact two-point-distribution risks at n = 1, 2
  conjecture          PSD condition battery with verdicts
  relu-samplewise     random ReLU features, error vs n at fixed D
  relu-modelwise      random ReLU features, error vs D at fixed n

Configuration is TOML (checked-in manifests live under ``configs/``), with
``--seed/--trials/--out/--synthetic/--workers`` overrides.  Identical
config + seed reproduce byte-identical CSVs, under any worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import conjecture as conj
from . import counterexample as cex
from .features import feature_sweep, load_idx_dataset, synthetic_dataset
from .general import GaussianProblem, RegularizerSpec, adaptive_regularizer, mc_risk_sweep
from .projection import optimal_lambda_proj, proj_risk_sweep, sigma_tilde_sq
from .reporting import Series, emit_csv, emit_svg_plot
from .spectrum import iso_risk_sweep, optimal_lambda_iso

__all__ = ["ConfigError", "load_config", "build_config", "run", "main"]

KINDS = (
    "samplewise-iso",
    "samplewise-noniso",
    "modelwise-proj",
    "counterexample",
    "conjecture",
    "relu-samplewise",
    "relu-modelwise",
)


class ConfigError(Exception):
    """Invalid experiment configuration; message names the offending field."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULTS: dict[str, dict] = {
    "samplewise-iso": {
        "seed": 20240810,
        "trials": 2000,
        "workers": 1,
        "problem": {"d": 50, "sigma": 0.5, "beta_norm": 1.0},
        "sweep": {
            "n_grid": {"start": 1, "stop": 100},
            "lambda_grid": {"num": 6, "lo": 0.1, "hi": 1000.0, "log": True},
            "include_zero": True,
            "include_optimal": True,
        },
    },
    "samplewise-noniso": {
        "seed": 20240810,
        "trials": 5000,
        "workers": 1,
        "problem": {
            "d": 30,
            "sigma": 0.5,
            "cov_diag_runs": [[10.0, 15], [1.0, 15]],
            "beta_entries": [[1, 0.1], [30, 1.0]],
            "regularizer": "identity",
        },
        "sweep": {
            "n_grid": {"start": 1, "stop": 60},
            "lambda_grid": {"num": 25, "lo": 0.001, "hi": 1000.0, "log": True},
            "include_zero": True,
        },
    },
    "modelwise-proj": {
        "seed": 20240810,
        "trials": 2000,
        "workers": 1,
        "problem": {"p": 100, "n": 50, "sigma": 0.5, "theta_norm": 1.0},
        "sweep": {
            "d_grid": {"start": 1, "stop": 100},
            "lambda_grid": {"num": 6, "lo": 0.1, "hi": 1000.0, "log": True},
            "include_zero": True,
            "include_optimal": True,
        },
    },
    "counterexample": {
        "seed": 20240810,
        "trials": 200_000,
        "workers": 1,
        "distribution": {"A": 20.0, "eps": 0.02},
        "sweep": {"lambda_grid": {"num": 80, "lo": 0.001, "hi": 20.0, "log": True}},
    },
    "conjecture": {
        "seed": 20240810,
        "trials": 20_000,
        "workers": 1,
        "battery": {
            "count": 50,
            "n_range": [2, 12],
            "d_range": [2, 12],
            "lambdas": [0.1, 1.0, 10.0],
            "q_log_bounds": [0.1, 10.0],
            "battery_seed": 20240601,
            "include_identity": True,
            "identity_n": 5,
            "identity_d": 8,
        },
    },
    "relu-samplewise": {
        "seed": 20240810,
        "trials": 3,
        "workers": 1,
        "data": {"synthetic": True, "dataset_dir": "", "train_size": 4000, "test_size": 2000},
        "model": {"num_features": 500},
        "sweep": {
            "n_grid": [25, 50, 100, 200, 350, 500, 700, 1000, 1500, 2000],
            "lambda_grid": {"num": 13, "lo": 1e-6, "hi": 1000.0, "log": True},
            "include_zero": True,
        },
    },
    "relu-modelwise": {
        "seed": 20240810,
        "trials": 3,
        "workers": 1,
        "data": {"synthetic": True, "dataset_dir": "", "train_size": 4000, "test_size": 2000},
        "model": {"n": 500},
        "sweep": {
            "d_grid": [25, 50, 100, 200, 350, 500, 700, 1000, 1500, 2000],
            "lambda_grid": {"num": 13, "lo": 1e-6, "hi": 1000.0, "log": True},
            "include_zero": True,
        },
    },
}


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}")


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(kind: str, file_config: dict | None = None, **overrides) -> dict:
    """Defaults for the kind, overlaid by the config file, overlaid by flags."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {KINDS}")
    cfg = dict(DEFAULTS[kind])
    cfg = _deep_merge(cfg, file_config or {})
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    cfg["kind"] = kind
    _validate_common(cfg)
    return cfg


def _validate_common(cfg: dict) -> None:
    trials = cfg.get("trials")
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials: must be a positive integer, got {trials!r}")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError(f"seed: must be an integer, got {cfg.get('seed')!r}")
    workers = cfg.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers: must be a positive integer, got {workers!r}")


def _int_grid(spec, field: str, minimum: int = 1) -> list[int]:
    if isinstance(spec, dict):
        try:
            start, stop = int(spec["start"]), int(spec["stop"])
        except KeyError as exc:
            raise ConfigError(f"{field}: missing key {exc}")
        step = int(spec.get("step", 1))
        if step < 1 or stop < start:
            raise ConfigError(f"{field}: need start <= stop and step >= 1")
        grid = list(range(start, stop + 1, step))
    else:
        try:
            grid = [int(v) for v in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"{field}: must be a list of integers or a range spec")
    if not grid:
        raise ConfigError(f"{field}: grid must be non-empty")
    if sorted(grid) != grid or len(set(grid)) != len(grid):
        raise ConfigError(f"{field}: grid must be strictly increasing")
    if grid[0] < minimum:
        raise ConfigError(f"{field}: values must be >= {minimum}")
    return grid


def _lambda_grid(spec, field: str) -> list[float]:
    if isinstance(spec, dict):
        try:
            num, lo, hi = int(spec["num"]), float(spec["lo"]), float(spec["hi"])
        except KeyError as exc:
            raise ConfigError(f"{field}: missing key {exc}")
        if num < 1 or lo <= 0 or hi < lo:
            raise ConfigError(f"{field}: need num >= 1 and 0 < lo <= hi")
        if spec.get("log", True):
            grid = list(np.geomspace(lo, hi, num))
        else:
            grid = list(np.linspace(lo, hi, num))
    else:
        try:
            grid = [float(v) for v in spec]
        except (TypeError, ValueError):
            raise ConfigError(f"{field}: must be a list of numbers or a grid spec")
    if not grid:
        raise ConfigError(f"{field}: grid must be non-empty")
    if any(v < 0 for v in grid):
        raise ConfigError(f"{field}: lambdas must be >= 0")
    if sorted(grid) != grid:
        raise ConfigError(f"{field}: grid must be sorted ascending")
    return grid


def monotone_verdict(means, ses, slack: float = 0.0) -> dict:
    """Max adjacent increase against twice the combined standard error."""
    means = np.asarray(means, dtype=float)
    ses = np.asarray(ses, dtype=float)
    if means.size < 2:
        return {"pass": True, "max_excess": 0.0, "worst_index": None}
    inc = np.diff(means)
    threshold = 2.0 * np.sqrt(ses[1:] ** 2 + ses[:-1] ** 2) + slack
    excess = inc - threshold
    worst = int(np.argmax(excess))
    return {
        "pass": bool(np.all(excess <= 0)),
        "max_excess": float(excess[worst]),
        "worst_index": worst,
    }


def _local_maxima(values) -> list[int]:
    """Indices of strict interior local maxima."""
    v = np.asarray(values, dtype=float)
    return [i for i in range(1, len(v) - 1) if v[i] > v[i - 1] and v[i] > v[i + 1]]


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _risk_table(sweep_values, grid, results, special) -> tuple[list, list]:
    """Rows for the main grid CSV and the labeled curves CSV."""
    grid_rows = []
    for value in sweep_values:
        for lam in grid:
            est = results[value][lam]
            grid_rows.append((value, lam, est.mean, est.std_error))
    curve_rows = []
    for label, per_value in special.items():
        for value in sweep_values:
            lam, mean, se = per_value[value]
            curve_rows.append((label, value, lam, mean, se))
    return grid_rows, curve_rows


def _series_for_grid(sweep_values, grid, results, max_lines: int = 8):
    """One plotted series per lambda, thinning dense grids."""
    idx = np.linspace(0, len(grid) - 1, min(max_lines, len(grid))).astype(int)
    picked = sorted(set(int(i) for i in idx))
    series = []
    for i in picked:
        lam = grid[i]
        series.append(
            Series(
                label=f"lambda={lam:.4g}",
                x=np.asarray(sweep_values, dtype=float),
                y=np.array([results[v][lam].mean for v in sweep_values]),
                se=np.array([results[v][lam].std_error for v in sweep_values]),
            )
        )
    return series


def run_samplewise_iso(cfg: dict, out_dir: str) -> dict:
    prob = cfg.get("problem", {})
    try:
        d = int(prob["d"])
        sigma = float(prob["sigma"])
        beta_norm = float(prob["beta_norm"])
    except KeyError as exc:
        raise ConfigError(f"problem: missing key {exc}")
    if d < 1 or sigma < 0 or beta_norm < 0:
        raise ConfigError("problem: need d >= 1, sigma >= 0, beta_norm >= 0")
    sweep = cfg.get("sweep", {})
    ns = _int_grid(sweep.get("n_grid"), "sweep.n_grid")
    grid = _lambda_grid(sweep.get("lambda_grid"), "sweep.lambda_grid")
    lam_star = optimal_lambda_iso(d, sigma, beta_norm)
    all_lams = list(grid)
    if sweep.get("include_zero", True):
        all_lams = [0.0] + all_lams
    if sweep.get("include_optimal", True) and math.isfinite(lam_star):
        all_lams = sorted(set(all_lams + [lam_star]))

    raw = iso_risk_sweep(
        ns, all_lams, d, beta_norm, sigma, cfg["trials"], cfg["seed"], cfg["workers"]
    )
    results = {n: {e.lam: e for e in ests} for n, ests in raw.items()}

    special = {}
    if math.isfinite(lam_star) and sweep.get("include_optimal", True):
        special["optimal"] = {
            n: (lam_star, results[n][lam_star].mean, results[n][lam_star].std_error)
            for n in ns
        }
    if sweep.get("include_zero", True):
        special["zero"] = {
            n: (0.0, results[n][0.0].mean, results[n][0.0].std_error) for n in ns
        }
    special["envelope"] = {}
    for n in ns:
        best = min(results[n].values(), key=lambda e: e.mean)
        special["envelope"][n] = (best.lam, best.mean, best.std_error)

    grid_rows, curve_rows = _risk_table(ns, grid, results, special)
    csv_main = emit_csv(
        os.path.join(out_dir, "samplewise-iso_risk.csv"),
        ["n", "lambda", "risk_mean", "risk_se"],
        grid_rows,
    )
    csv_curves = emit_csv(
        os.path.join(out_dir, "samplewise-iso_curves.csv"),
        ["curve", "n", "lambda", "risk_mean", "risk_se"],
        curve_rows,
    )
    series = _series_for_grid(ns, grid, results)
    if "optimal" in special:
        series.append(
            Series(
                label="optimal",
                x=np.asarray(ns, dtype=float),
                y=np.array([special["optimal"][n][1] for n in ns]),
                role="envelope",
            )
        )
    svg = emit_svg_plot(
        os.path.join(out_dir, "samplewise-iso.svg"),
        series,
        title=f"Isotropic ridge risk vs samples (d={d})",
        xlabel="samples n",
        ylabel="expected test risk",
        log_y=True,
    )

    null_risk = beta_norm**2 + sigma**2
    summary = {"lambda_opt": lam_star, "null_risk": null_risk}
    if "optimal" in special:
        means = [special["optimal"][n][1] for n in ns]
        ses = [special["optimal"][n][2] for n in ns]
        summary["optimal_monotone"] = monotone_verdict(means, ses)
    if "zero" in special:
        zero_means = np.array([special["zero"][n][1] for n in ns])
        summary["double_descent_peak"] = {
            "present": bool(zero_means.max() > null_risk),
            "peak_n": int(ns[int(zero_means.argmax())]),
            "peak_risk": float(zero_means.max()),
        }
    env_means = [special["envelope"][n][1] for n in ns]
    env_ses = [special["envelope"][n][2] for n in ns]
    summary["envelope_monotone"] = monotone_verdict(env_means, env_ses)
    return {"csv": [csv_main, csv_curves], "svg": [svg], "summary": summary}


def _build_noniso_problem(prob: dict) -> tuple[GaussianProblem, RegularizerSpec]:
    try:
        d = int(prob["d"])
        sigma = float(prob["sigma"])
    except KeyError as exc:
        raise ConfigError(f"problem: missing key {exc}")
    if "cov_diag" in prob:
        diag = [float(v) for v in prob["cov_diag"]]
    else:
        runs = prob.get("cov_diag_runs")
        if runs is None:
            raise ConfigError("problem: need cov_diag or cov_diag_runs")
        diag = []
        for value, count in runs:
            diag.extend([float(value)] * int(count))
    if len(diag) != d:
        raise ConfigError(
            f"problem.cov_diag: expected {d} entries, got {len(diag)}"
        )
    beta = np.zeros(d)
    if "beta_star" in prob:
        entries = [float(v) for v in prob["beta_star"]]
        if len(entries) != d:
            raise ConfigError(f"problem.beta_star: expected {d} entries")
        beta[:] = entries
    else:
        for index, value in prob.get("beta_entries", []):
            if not 1 <= int(index) <= d:
                raise ConfigError(
                    f"problem.beta_entries: index {index} outside 1..{d}"
                )
            beta[int(index) - 1] = float(value)
    problem = GaussianProblem(
        d=d, covariance=np.diag(diag), beta_star=beta, sigma=sigma
    )
    reg_kind = prob.get("regularizer", "identity")
    if reg_kind == "identity":
        reg = RegularizerSpec.identity(d)
    elif reg_kind in ("covariance", "adaptive"):
        reg = adaptive_regularizer(problem)
    elif reg_kind == "inverse-covariance":
        reg = RegularizerSpec.inverse_covariance(problem.covariance)
    else:
        raise ConfigError(
            f"problem.regularizer: unknown kind {reg_kind!r} "
            "(identity / covariance / inverse-covariance)"
        )
    return problem, reg


def run_samplewise_noniso(cfg: dict, out_dir: str) -> dict:
    problem, reg = _build_noniso_problem(cfg.get("problem", {}))
    sweep = cfg.get("sweep", {})
    ns = _int_grid(sweep.get("n_grid"), "sweep.n_grid")
    grid = _lambda_grid(sweep.get("lambda_grid"), "sweep.lambda_grid")
    all_lams = ([0.0] if sweep.get("include_zero", True) else []) + list(grid)

    risk_raw, train_raw = mc_risk_sweep(
        problem,
        ns,
        all_lams,
        reg,
        cfg["trials"],
        cfg["seed"],
        cfg["workers"],
        include_train=True,
    )
    results = {n: {e.lam: e for e in ests} for n, ests in risk_raw.items()}
    train = {n: {e.lam: e for e in ests} for n, ests in train_raw.items()}

    special = {}
    if sweep.get("include_zero", True):
        special["zero"] = {
            n: (0.0, results[n][0.0].mean, results[n][0.0].std_error) for n in ns
        }
    special["envelope"] = {}
    for n in ns:
        best = min(results[n].values(), key=lambda e: e.mean)
        special["envelope"][n] = (best.lam, best.mean, best.std_error)

    grid_rows, curve_rows = _risk_table(ns, grid, results, special)
    csv_main = emit_csv(
        os.path.join(out_dir, "samplewise-noniso_risk.csv"),
        ["n", "lambda", "risk_mean", "risk_se"],
        grid_rows,
    )
    csv_curves = emit_csv(
        os.path.join(out_dir, "samplewise-noniso_curves.csv"),
        ["curve", "n", "lambda", "risk_mean", "risk_se"],
        curve_rows,
    )
    train_rows = [
        (n, lam, train[n][lam].mean, train[n][lam].std_error)
        for n in ns
        for lam in all_lams
    ]
    csv_train = emit_csv(
        os.path.join(out_dir, "samplewise-noniso_train.csv"),
        ["n", "lambda", "train_mse_mean", "train_mse_se"],
        train_rows,
    )

    series = _series_for_grid(ns, grid, results)
    series.append(
        Series(
            label="envelope",
            x=np.asarray(ns, dtype=float),
            y=np.array([special["envelope"][n][1] for n in ns]),
            role="envelope",
        )
    )
    svg = emit_svg_plot(
        os.path.join(out_dir, "samplewise-noniso.svg"),
        series,
        title=f"Non-isotropic ridge risk vs samples (d={problem.d})",
        xlabel="samples n",
        ylabel="expected test risk",
        log_y=True,
    )
    train_series = [
        Series(
            label=f"lambda={lam:.4g}",
            x=np.asarray(ns, dtype=float),
            y=np.array([train[n][lam].mean for n in ns]),
        )
        for lam in ([0.0] if sweep.get("include_zero", True) else []) + list(grid[:: max(1, len(grid) // 6)])
    ]
    svg_train = emit_svg_plot(
        os.path.join(out_dir, "samplewise-noniso_train.svg"),
        train_series,
        title="Train MSE vs samples",
        xlabel="samples n",
        ylabel="train MSE",
        log_y=True,
    )

    summary = {}
    env_means = [special["envelope"][n][1] for n in ns]
    env_ses = [special["envelope"][n][2] for n in ns]
    summary["envelope_monotone"] = monotone_verdict(env_means, env_ses)
    if "zero" in special:
        zero_means = [special["zero"][n][1] for n in ns]
        summary["zero_curve_local_maxima_n"] = [
            int(ns[i]) for i in _local_maxima(zero_means)
        ]
    return {
        "csv": [csv_main, csv_curves, csv_train],
        "svg": [svg, svg_train],
        "summary": summary,
    }


def run_modelwise_proj(cfg: dict, out_dir: str) -> dict:
    prob = cfg.get("problem", {})
    try:
        p = int(prob["p"])
        n = int(prob["n"])
        sigma = float(prob["sigma"])
        theta_norm = float(prob["theta_norm"])
    except KeyError as exc:
        raise ConfigError(f"problem: missing key {exc}")
    sweep = cfg.get("sweep", {})
    ds = _int_grid(sweep.get("d_grid"), "sweep.d_grid")
    if ds[-1] > p:
        raise ConfigError(f"sweep.d_grid: model sizes must be <= p={p}")
    grid = _lambda_grid(sweep.get("lambda_grid"), "sweep.lambda_grid")
    include_zero = sweep.get("include_zero", True)
    include_optimal = sweep.get("include_optimal", True)

    lam_opt = {d: optimal_lambda_proj(p, d, sigma, theta_norm) for d in ds}
    lambda_grids = {}
    for d in ds:
        lams = ([0.0] if include_zero else []) + list(grid)
        if include_optimal and math.isfinite(lam_opt[d]):
            lams = sorted(set(lams + [lam_opt[d]]))
        lambda_grids[d] = lams

    raw = proj_risk_sweep(
        p, ds, n, lambda_grids, theta_norm, sigma, cfg["trials"], cfg["seed"], cfg["workers"]
    )
    results = {d: {e.lam: e for e in ests} for d, ests in raw.items()}

    special = {}
    if include_optimal:
        special["optimal"] = {
            d: (
                lam_opt[d],
                results[d][lam_opt[d]].mean,
                results[d][lam_opt[d]].std_error,
            )
            for d in ds
        }
    if include_zero:
        special["zero"] = {
            d: (0.0, results[d][0.0].mean, results[d][0.0].std_error) for d in ds
        }
    special["envelope"] = {}
    for d in ds:
        best = min(results[d].values(), key=lambda e: e.mean)
        special["envelope"][d] = (best.lam, best.mean, best.std_error)

    grid_rows, curve_rows = _risk_table(ds, grid, results, special)
    csv_main = emit_csv(
        os.path.join(out_dir, "modelwise-proj_risk.csv"),
        ["d", "lambda", "risk_mean", "risk_se"],
        grid_rows,
    )
    csv_curves = emit_csv(
        os.path.join(out_dir, "modelwise-proj_curves.csv"),
        ["curve", "d", "lambda", "risk_mean", "risk_se"],
        curve_rows,
    )
    analytic_rows = [
        (d, sigma_tilde_sq(p, d, sigma, theta_norm), lam_opt[d]) for d in ds
    ]
    csv_analytic = emit_csv(
        os.path.join(out_dir, "modelwise-proj_analytic.csv"),
        ["d", "sigma_tilde_sq", "lambda_opt"],
        analytic_rows,
    )

    series = _series_for_grid(ds, grid, results)
    if include_optimal:
        series.append(
            Series(
                label="optimal",
                x=np.asarray(ds, dtype=float),
                y=np.array([special["optimal"][d][1] for d in ds]),
                role="envelope",
            )
        )
    svg = emit_svg_plot(
        os.path.join(out_dir, "modelwise-proj.svg"),
        series,
        title=f"Projected-model risk vs size (p={p}, n={n})",
        xlabel="model size d",
        ylabel="expected test risk",
        log_y=True,
    )

    summary = {}
    if include_optimal:
        means = [special["optimal"][d][1] for d in ds]
        ses = [special["optimal"][d][2] for d in ds]
        summary["optimal_monotone"] = monotone_verdict(means, ses)
    env_means = [special["envelope"][d][1] for d in ds]
    env_ses = [special["envelope"][d][2] for d in ds]
    summary["envelope_monotone"] = monotone_verdict(env_means, env_ses)
    return {
        "csv": [csv_main, csv_curves, csv_analytic],
        "svg": [svg],
        "summary": summary,
    }


def run_counterexample(cfg: dict, out_dir: str) -> dict:
    dist_cfg = cfg.get("distribution", {})
    dist = cex.TwoPointDistribution(
        A=float(dist_cfg.get("A", 20.0)), eps=float(dist_cfg.get("eps", 0.02))
    )
    grid = _lambda_grid(
        cfg.get("sweep", {}).get("lambda_grid"), "sweep.lambda_grid"
    )
    rows = []
    for n in (1, 2):
        for lam in grid:
            rows.append((n, lam, cex.exact_expected_risk(n, lam, dist), 0.0))
    csv_main = emit_csv(
        os.path.join(out_dir, "counterexample_risk.csv"),
        ["n", "lambda", "risk_mean", "risk_se"],
        rows,
    )
    report = cex.verify_nonmonotonicity(dist)
    mc_checks = {}
    for n, lam in ((1, report.lambda_one), (2, report.lambda_two)):
        mc = cex.mc_expected_risk(n, lam, dist, cfg["trials"], cfg["seed"], cfg["workers"])
        exact = cex.exact_expected_risk(n, lam, dist)
        mc_checks[f"n={n}"] = {
            "exact": exact,
            "mc_mean": mc.mean,
            "mc_se": mc.std_error,
            "within_3se": bool(abs(mc.mean - exact) <= 3 * mc.std_error),
        }
    series = [
        Series(
            label=f"n={n}",
            x=np.asarray(grid),
            y=np.array([cex.exact_expected_risk(n, lam, dist) for lam in grid]),
        )
        for n in (1, 2)
    ]
    svg = emit_svg_plot(
        os.path.join(out_dir, "counterexample.svg"),
        series,
        title=f"Two-point distribution (A={dist.A:g}, eps={dist.eps:g})",
        xlabel="lambda",
        ylabel="exact expected risk",
        log_x=True,
    )
    summary = {
        "lambda_one": report.lambda_one,
        "lambda_two": report.lambda_two,
        "risk_one": report.risk_one,
        "risk_two": report.risk_two,
        "gap": report.gap,
        "nonmonotonic": report.nonmonotonic,
        "null_risk": dist.null_risk,
        "mc_cross_check": mc_checks,
    }
    return {"csv": [csv_main], "svg": [svg], "summary": summary}


def run_conjecture(cfg: dict, out_dir: str) -> dict:
    batt = cfg.get("battery", {})
    try:
        instances = conj.battery_instances(
            count=int(batt.get("count", 50)),
            seed=int(batt.get("battery_seed", 20240601)),
            n_range=tuple(batt.get("n_range", (2, 12))),
            d_range=tuple(batt.get("d_range", (2, 12))),
            lambdas=tuple(float(v) for v in batt.get("lambdas", (0.1, 1.0, 10.0))),
            q_log_bounds=tuple(batt.get("q_log_bounds", (0.1, 10.0))),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"battery: {exc}")
    if batt.get("include_identity", True):
        n_id = int(batt.get("identity_n", 5))
        d_id = int(batt.get("identity_d", 8))
        for lam in batt.get("lambdas", (0.1, 1.0, 10.0)):
            instances.append((n_id, np.ones(d_id), float(lam)))
    reports = conj.run_battery(instances, cfg["trials"], cfg["seed"], cfg["workers"])
    csv_path = os.path.join(out_dir, "conjecture_battery.csv")
    conj.export_battery_csv(reports, csv_path)
    counts = {"holds": 0, "violated": 0, "inconclusive": 0}
    for r in reports:
        counts[r.verdict] += 1
    ratios = [
        (r.min_eigenvalue / r.std_error)
        if (r.std_error and math.isfinite(r.min_eigenvalue))
        else math.nan
        for r in reports
    ]
    series = []
    for cond in ("one", "two"):
        xs, ys = [], []
        for i, r in enumerate(reports):
            if r.condition == cond and math.isfinite(ratios[i]):
                xs.append(i // 2)
                ys.append(ratios[i])
        series.append(Series(label=f"condition {cond}", x=np.array(xs), y=np.array(ys)))
    svg = emit_svg_plot(
        os.path.join(out_dir, "conjecture.svg"),
        series,
        title="PSD battery: min eigenvalue / SE per instance",
        xlabel="instance",
        ylabel="min eigenvalue / SE",
    )
    summary = {
        "instances": len(instances),
        "verdicts": counts,
        "all_hold": counts["violated"] == 0 and counts["inconclusive"] == 0,
        "no_violations": counts["violated"] == 0,
    }
    return {"csv": [csv_path], "svg": [svg], "summary": summary}


def _relu_datasets(cfg: dict):
    data = cfg.get("data", {})
    if data.get("synthetic", False):
        train = synthetic_dataset(
            int(data.get("train_size", 4000)), seed=cfg["seed"] + 1, name="synthetic-train"
        )
        test = synthetic_dataset(
            int(data.get("test_size", 2000)), seed=cfg["seed"] + 2, name="synthetic-test"
        )
        return train, test
    directory = data.get("dataset_dir", "")
    if not directory:
        raise ConfigError(
            "data.dataset_dir: required for relu experiments unless "
            "--synthetic (data.synthetic = true) is set"
        )
    if not os.path.isdir(directory):
        raise ConfigError(f"data.dataset_dir: no such directory: {directory}")
    return (
        load_idx_dataset(directory, "train"),
        load_idx_dataset(directory, "test"),
    )


def _run_relu(cfg: dict, out_dir: str, sweep_name: str) -> dict:
    kind = cfg["kind"]
    train, test = _relu_datasets(cfg)
    sweep = cfg.get("sweep", {})
    model = cfg.get("model", {})
    if sweep_name == "n":
        values = _int_grid(sweep.get("n_grid"), "sweep.n_grid")
        fixed = int(model.get("num_features", 500))
    else:
        values = _int_grid(sweep.get("d_grid"), "sweep.d_grid")
        fixed = int(model.get("n", 500))
        if fixed > train.n:
            raise ConfigError(f"model.n: only {train.n} training points available")
    if sweep_name == "n" and values[-1] > train.n:
        raise ConfigError(
            f"sweep.n_grid: max {values[-1]} exceeds training size {train.n}"
        )
    grid = _lambda_grid(sweep.get("lambda_grid"), "sweep.lambda_grid")
    all_lams = ([0.0] if sweep.get("include_zero", True) else []) + list(grid)
    repeats = cfg["trials"]

    per_repeat = []
    for r in range(repeats):
        records = feature_sweep(
            train, test, sweep_name, values, fixed, all_lams, seed=cfg["seed"] + 1000 * r
        )
        per_repeat.append({(rec["value"], rec["lambda"]): rec for rec in records})

    def stat(value, lam, field):
        samples = np.array([rep[(value, lam)][field] for rep in per_repeat])
        se = samples.std(ddof=1) / math.sqrt(repeats) if repeats > 1 else 0.0
        return float(samples.mean()), float(se)

    grid_rows, metric_rows = [], []
    results = {}
    for value in values:
        results[value] = {}
        for lam in all_lams:
            err, err_se = stat(value, lam, "test_error")
            mse, mse_se = stat(value, lam, "test_mse")
            tmse, tmse_se = stat(value, lam, "train_mse")
            results[value][lam] = (err, err_se)
            if lam in grid:
                grid_rows.append((value, lam, err, err_se))
            metric_rows.append(
                (value, lam, err, err_se, mse, mse_se, tmse, tmse_se)
            )
    csv_main = emit_csv(
        os.path.join(out_dir, f"{kind}_risk.csv"),
        [sweep_name, "lambda", "test_error_mean", "test_error_se"],
        grid_rows,
    )
    csv_metrics = emit_csv(
        os.path.join(out_dir, f"{kind}_metrics.csv"),
        [
            sweep_name,
            "lambda",
            "test_error_mean",
            "test_error_se",
            "test_mse_mean",
            "test_mse_se",
            "train_mse_mean",
            "train_mse_se",
        ],
        metric_rows,
    )
    envelope = {}
    curve_rows = []
    for value in values:
        lam_best = min(all_lams, key=lambda lam: results[value][lam][0])
        envelope[value] = (lam_best,) + results[value][lam_best]
        curve_rows.append(("envelope", value, *envelope[value]))
        if 0.0 in results[value]:
            curve_rows.append(("zero", value, 0.0, *results[value][0.0]))
    csv_curves = emit_csv(
        os.path.join(out_dir, f"{kind}_curves.csv"),
        ["curve", sweep_name, "lambda", "test_error_mean", "test_error_se"],
        curve_rows,
    )

    def line(lam, label=None):
        return Series(
            label=label or f"lambda={lam:.4g}",
            x=np.asarray(values, dtype=float),
            y=np.array([results[v][lam][0] for v in values]),
        )

    shown = grid[:: max(1, len(grid) // 6)]
    series = ([line(0.0, "lambda=0 (pseudoinverse)")] if 0.0 in all_lams else []) + [
        line(lam) for lam in shown
    ]
    series.append(
        Series(
            label="envelope",
            x=np.asarray(values, dtype=float),
            y=np.array([envelope[v][1] for v in values]),
            role="envelope",
        )
    )
    axis = "training samples n" if sweep_name == "n" else "random features D"
    svg = emit_svg_plot(
        os.path.join(out_dir, f"{kind}.svg"),
        series,
        title=f"Random ReLU features: test error vs {axis} ({train.name})",
        xlabel=axis,
        ylabel="test classification error",
        log_x=True,
    )
    train_series = [
        Series(
            label=f"lambda={lam:.4g}",
            x=np.asarray(values, dtype=float),
            y=np.array([stat(v, lam, "train_mse")[0] for v in values]),
        )
        for lam in ([0.0] if 0.0 in all_lams else []) + list(shown)
    ]
    svg_train = emit_svg_plot(
        os.path.join(out_dir, f"{kind}_train.svg"),
        train_series,
        title=f"Random ReLU features: train MSE vs {axis}",
        xlabel=axis,
        ylabel="train MSE",
        log_x=True,
        log_y=True,
    )

    env_means = [envelope[v][1] for v in values]
    env_ses = [envelope[v][2] for v in values]
    summary = {
        "fixed": fixed,
        "envelope_monotone": monotone_verdict(env_means, env_ses, slack=0.01),
    }
    if 0.0 in all_lams:
        zero_means = [results[v][0.0][0] for v in values]
        summary["zero_curve_peak_at"] = (
            int(values[int(np.argmax(zero_means))]) if values else None
        )
    return {
        "csv": [csv_main, csv_metrics, csv_curves],
        "svg": [svg, svg_train],
        "summary": summary,
    }


def run_relu_samplewise(cfg: dict, out_dir: str) -> dict:
    return _run_relu(cfg, out_dir, "n")


def run_relu_modelwise(cfg: dict, out_dir: str) -> dict:
    return _run_relu(cfg, out_dir, "D")


_RUNNERS = {
    "samplewise-iso": run_samplewise_iso,
    "samplewise-noniso": run_samplewise_noniso,
    "modelwise-proj": run_modelwise_proj,
    "counterexample": run_counterexample,
    "conjecture": run_conjecture,
    "relu-samplewise": run_relu_samplewise,
    "relu-modelwise": run_relu_modelwise,
}


def run(config: dict) -> dict:
    """Run one configured experiment; returns csv paths, svg paths and the
    summary (also written to summary.json in the output directory)."""
    kind = config.get("kind")
    if kind not in _RUNNERS:
        raise ConfigError(f"kind: unknown experiment kind {kind!r}")
    out_dir = config.get("out") or os.path.join("results", kind)
    os.makedirs(out_dir, exist_ok=True)
    result = _RUNNERS[kind](config, out_dir)
    result["summary"] = {
        "kind": kind,
        "seed": config["seed"],
        "trials": config["trials"],
        **result["summary"],
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        json.dump(result["summary"], fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    result["summary_path"] = summary_path
    return result


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _print_summary(result: dict) -> None:
    summary = result["summary"]
    print(f"experiment: {summary['kind']} (seed={summary['seed']}, trials={summary['trials']})")
    for path in result["csv"]:
        print(f"  csv: {path}")
    for path in result["svg"]:
        print(f"  svg: {path}")
    for key, value in summary.items():
        if key in ("kind", "seed", "trials"):
            continue
        if isinstance(value, dict) and "pass" in value:
            status = "pass" if value["pass"] else "FAIL"
            print(
                f"  {key}: {status} (max adjacent increase beyond 2 SE: "
                f"{value['max_excess']:.6g})"
            )
        else:
            print(f"  {key}: {value}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ridgelab",
        description="Ridge-regression risk experiments: CSV tables and SVG figures.",
    )
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        k = sub.add_parser(kind, help=f"run the {kind} experiment")
        k.add_argument("--config", help="TOML config file (defaults built in)")
        k.add_argument("--seed", type=int, help="override the RNG seed")
        k.add_argument("--trials", type=int, help="override the trial count")
        k.add_argument("--out", help="output directory (default results/<kind>)")
        k.add_argument("--workers", type=int, help="worker threads for trial blocks")
        k.add_argument(
            "--synthetic",
            action="store_true",
            help="use the built-in synthetic dataset (relu kinds)",
        )
        k.add_argument(
            "--json", action="store_true", help="print the JSON summary to stdout"
        )
    args = parser.parse_args(argv)
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = build_config(
            args.kind,
            file_cfg,
            seed=args.seed,
            trials=args.trials,
            out=args.out,
            workers=args.workers,
        )
        if args.synthetic:
            cfg.setdefault("data", {})
            cfg["data"]["synthetic"] = True
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(result["summary"], indent=2, sort_keys=True, default=_jsonable))
    else:
        _print_summary(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
