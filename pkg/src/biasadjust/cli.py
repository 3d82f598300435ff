"""Command-line interface.

Subcommands:
    qba        bias-adjust an observed dataset with the default prior set
    simulate   replicated simulation study with oracle / misspecified params
    oracle     large-sample truths and fitted bias-model coefficients
    generate   write a synthetic dataset (ideal or observed form)

All randomness flows from a mandatory --seed; reruns with the same seed and
configuration produce byte-identical outputs.  Exit codes: 0 success,
2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__
from .casestudy import case_study_priors
from .config import ConfigError, load_config, resolve_scenario
from .data_model import Dataset, SchemaError, case_study_schema
from .engine import (AdjustmentPlan, EstimateResult, ExtremeWeightError,
                     BiasSelection, one_at_a_time_suite, primary_analysis,
                     probabilistic_qba)
from .metrics import comparative_table, format_table, performance_report
from .params import PriorError
from .runner import OracleBundle, compute_oracles, run_simulation
from .simgen import ScenarioError, generate_ideal, to_observed

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

CONFIG_ERRORS = (ConfigError, PriorError, ScenarioError)
DATA_ERRORS = (SchemaError, FileNotFoundError)
NUMERIC_ERRORS = (ExtremeWeightError, np.linalg.LinAlgError, RuntimeError,
                  FloatingPointError)


def _classified_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CONFIG_ERRORS as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except DATA_ERRORS as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except NUMERIC_ERRORS as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
    return wrapper


def _settings(config_path, **flags):
    """Merge config-file defaults with command-line flags (flags win)."""
    settings = load_config(config_path) if config_path else {}
    for key, value in flags.items():
        if value is not None:
            settings[key] = value
    if settings.get("seed") is None:
        raise ConfigError("a seed is required (--seed or config key 'seed')")
    return settings


def _outdir(settings) -> Path:
    out = Path(settings.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, settings: dict, extra: dict | None = None):
    lines = [f"version: {__version__}"]
    for key in sorted(settings):
        lines.append(f"{key}: {settings[key]}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {value}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _params_frame(params) -> pd.DataFrame:
    rows = []
    for model in ("gamma", "alpha", "delta", "theta", "lambda_", "eta",
                  "gamma_single", "alpha_single", "delta_single"):
        coef = getattr(params, model)
        if coef is None:
            continue
        for label, value in coef.items():
            rows.append({"model": model, "term": label, "coefficient": value})
    return pd.DataFrame(rows)


def _estimate_row(approach: str, biases: str, est: EstimateResult) -> dict:
    return {
        "approach": approach, "biases": biases,
        "rd": est.rd_hat, "rd_lo": est.interval_rd[0], "rd_hi": est.interval_rd[1],
        "rr": float(np.exp(est.log_rr_hat)),
        "rr_lo": float(np.exp(est.interval_log_rr[0])),
        "rr_hi": float(np.exp(est.interval_log_rr[1])),
        "interval": est.interval_kind,
        "replicates_used": est.n_replicates, "replicates_dropped": est.n_dropped,
        "high_drop_warning": est.high_drop_warning,
    }


common_options = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="YAML configuration file; flags override its values."),
    click.option("--seed", type=int, default=None,
                 help="Root random seed (required; no wall-clock default)."),
    click.option("--out", type=click.Path(), default=None,
                 help="Output directory (default: current directory)."),
]


def add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func
    return wrap


@click.group()
@click.version_option(__version__)
def main():
    """Bias-adjusted causal effect estimation and its simulation harness."""


@main.command()
@add_options(common_options)
@click.option("--dataset", "dataset_path", type=click.Path(), default=None,
              help="Observed dataset CSV.")
@click.option("--draws", type=int, default=None, help="Prior draws (default 500).")
@click.option("--bootstraps", type=int, default=None,
              help="Bootstrap resamples (0 = none; otherwise >= 100).")
@_classified_errors
def qba(config_path, seed, out, dataset_path, draws, bootstraps):
    """Run the bias analysis on an observed dataset."""
    settings = _settings(config_path, seed=seed, out=out, dataset=dataset_path,
                         draws=draws, bootstraps=bootstraps)
    if not settings.get("dataset"):
        raise ConfigError("qba requires a dataset (--dataset or config key)")
    data_path = Path(settings["dataset"])
    if not data_path.exists():
        raise FileNotFoundError(f"dataset file {data_path} does not exist")
    dataset = Dataset.from_csv(data_path, case_study_schema())
    priors = case_study_priors(dataset)
    plan = AdjustmentPlan(
        selection=BiasSelection.all_biases(include_s=True),
        parameters=priors,
        n_parameter_draws=int(settings.get("draws", 500)),
        n_bootstrap=int(settings.get("bootstraps", 0)),
        seed=int(settings["seed"]))
    rows = [_estimate_row("Primary analysis", "NA", primary_analysis(dataset)),
            _estimate_row("Simultaneous bias adjustment", "All biases",
                          probabilistic_qba(dataset, plan))]
    for name, est in one_at_a_time_suite(dataset, plan).items():
        rows.append(_estimate_row("One-at-a-time bias adjustment", name, est))
    frame = pd.DataFrame(rows)
    outdir = _outdir(settings)
    frame.to_csv(outdir / "estimates.csv", index=False)
    _write_manifest(outdir, settings, {"rows": len(frame)})
    click.echo(format_table(frame))


@main.command()
@add_options(common_options)
@click.option("--scenario", default=None,
              help="Preset 'realistic'/'enhanced' or a scenario YAML file.")
@click.option("--reps", type=int, default=None, help="Replications (default 500).")
@click.option("--n", type=int, default=None, help="Cohort size per replication.")
@click.option("--workers", type=int, default=None, help="Worker processes.")
@click.option("--arms", default=None,
              help="Comma-separated parameter arms: correct,x2 (default correct).")
@click.option("--format", "fmt", type=click.Choice(["csv", "table"]), default=None)
@_classified_errors
def simulate(config_path, seed, out, scenario, reps, n, workers, arms, fmt):
    """Run the replicated simulation study and emit performance tables."""
    settings = _settings(config_path, seed=seed, out=out, scenario=scenario,
                         reps=reps, n=n, workers=workers, arms=arms, format=fmt)
    config = resolve_scenario(settings.get("scenario", "realistic"),
                              n=settings.get("n"))
    n_reps = int(settings.get("reps", 500))
    if n_reps < 2:
        raise ConfigError("simulate requires at least 2 replications")
    arm_names = [a.strip() for a in str(settings.get("arms", "correct")).split(",")]
    scales = {"correct": 1.0, "x2": 2.0}
    bad = [a for a in arm_names if a not in scales]
    if bad:
        raise ConfigError(f"unknown arms {bad}; valid arms: correct, x2")
    outdir = _outdir(settings)
    oracles = compute_oracles(config, n_params=1_000_000,
                              seed=int(settings["seed"]) ^ 0x5EED)
    estimate_frames = []
    dropped = {}
    for arm in arm_names:
        log = run_simulation(
            config, oracles, seed=int(settings["seed"]),
            n_reps=n_reps, param_scale=scales[arm],
            workers=int(settings.get("workers", 1)))
        frame = log.frame.assign(arm=arm)
        estimate_frames.append(frame)
        report = performance_report(log)
        parts = []
        for estimand in ("rd", "log_rr"):
            parts.append(comparative_table(report, estimand).assign(estimand=estimand))
        table = pd.concat(parts, ignore_index=True)
        table.to_csv(outdir / f"performance_{config.kind}_{arm}.csv", index=False)
        dropped[arm] = int(table["n_dropped"].sum())
        if settings.get("format") == "table":
            click.echo(f"\narm: {arm}  (rd truth {oracles.rd_true:.4f}, "
                       f"log rr truth {oracles.log_rr_true:.4f})")
            click.echo(format_table(table))
    pd.concat(estimate_frames, ignore_index=True).to_csv(
        outdir / "estimates.csv", index=False)
    _write_manifest(outdir, settings, {
        "rd_true": oracles.rd_true, "log_rr_true": oracles.log_rr_true,
        **{f"dropped_{arm}": count for arm, count in dropped.items()}})


@main.command()
@add_options(common_options)
@click.option("--scenario", default=None)
@click.option("--n", type=int, default=None,
              help="Oracle population size (default 2,000,000; minimum 1,000,000).")
@_classified_errors
def oracle(config_path, seed, out, scenario, n):
    """Compute scenario truths and correct bias-model coefficients."""
    settings = _settings(config_path, seed=seed, out=out, scenario=scenario, n=n)
    config = resolve_scenario(settings.get("scenario", "realistic"))
    n_large = int(settings.get("n", 2_000_000))
    if n_large < 1_000_000:
        raise ConfigError("oracle requires a population of at least 1,000,000")
    bundle = compute_oracles(config, n_truth=n_large, n_params=min(n_large, 1_000_000),
                             seed=int(settings["seed"]))
    outdir = _outdir(settings)
    pd.DataFrame([{"scenario": config.kind, "rd_true": bundle.rd_true,
                   "log_rr_true": bundle.log_rr_true}]).to_csv(
        outdir / f"truth_{config.kind}.csv", index=False)
    _params_frame(bundle.params).to_csv(
        outdir / f"bias_params_{config.kind}.csv", index=False)
    _write_manifest(outdir, settings, {"rd_true": bundle.rd_true,
                                       "log_rr_true": bundle.log_rr_true})
    click.echo(f"rd_true={bundle.rd_true:.4f} log_rr_true={bundle.log_rr_true:.4f}")


@main.command()
@add_options(common_options)
@click.option("--scenario", default=None)
@click.option("--n", type=int, default=None, help="Records to generate.")
@click.option("--ideal/--observed", "ideal_form", default=False,
              help="Write the full-field ideal dataset instead of the observed one.")
@_classified_errors
def generate(config_path, seed, out, scenario, n, ideal_form):
    """Write a synthetic dataset CSV."""
    settings = _settings(config_path, seed=seed, out=out, scenario=scenario, n=n)
    config = resolve_scenario(settings.get("scenario", "realistic"),
                              n=settings.get("n"))
    ideal = generate_ideal(config, int(settings["seed"]))
    dataset = ideal if ideal_form else to_observed(ideal)
    outdir = _outdir(settings)
    name = f"{config.kind}_{'ideal' if ideal_form else 'observed'}.csv"
    dataset.to_csv(outdir / name)
    _write_manifest(outdir, settings, {"records": len(dataset), "file": name})


if __name__ == "__main__":
    main()
