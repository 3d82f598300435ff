"""Simulation performance measures and comparative tables.

Six measures per method and estimand over replicated runs: bias, relative
bias, empirical SE, average model SE, coverage of nominal 95% Wald intervals,
and bias-eliminated coverage (intervals evaluated against the mean estimate
rather than the truth, isolating SE miscalibration from point-estimate bias).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .engine import EstimateResult, Z_95

METHOD_ORDER = ("All biases", "CB", "MB-A", "MB-Y", "SB-collider",
                "SB-generalizability(E)", "SB-generalizability(S)")

LOG_COLUMNS = ("method", "replicate", "rd", "rd_se", "log_rr", "log_rr_se",
               "converged_rd", "converged_rr", "rr_fallback")


@dataclass(frozen=True)
class ReplicationLog:
    """Per-replication estimates for each method, plus the scenario truths."""

    frame: pd.DataFrame
    rd_true: float
    log_rr_true: float

    def __post_init__(self):
        missing = [c for c in LOG_COLUMNS if c not in self.frame.columns]
        if missing:
            raise ValueError(f"replication log is missing columns {missing}")
        if not (np.isfinite(self.rd_true) and np.isfinite(self.log_rr_true)):
            raise ValueError("scenario truths must be finite")
        counts = self.frame.groupby("method")["replicate"].count()
        if counts.nunique() > 1:
            raise ValueError("methods have unequal replication counts")


def log_row(method: str, replicate: int, est: EstimateResult) -> dict:
    """One replication-log row from an estimate."""
    return {"method": method, "replicate": replicate,
            "rd": est.rd_hat, "rd_se": est.rd_se,
            "log_rr": est.log_rr_hat, "log_rr_se": est.log_rr_se,
            "converged_rd": est.converged_rd, "converged_rr": est.converged_rr,
            "rr_fallback": est.rr_fallback}


@dataclass(frozen=True)
class MethodPerformance:
    """The six performance measures for one method and estimand."""

    method: str
    estimand: str  # "rd" | "log_rr"
    truth: float
    bias: float
    relative_bias: float | None  # percent; None when the truth is zero
    empirical_se: float
    model_se: float
    coverage: float
    bias_eliminated_coverage: float
    n_used: int
    n_dropped: int


@dataclass(frozen=True)
class PerformanceReport:
    measures: tuple[MethodPerformance, ...]

    def by_method(self, method: str, estimand: str) -> MethodPerformance:
        for m in self.measures:
            if m.method == method and m.estimand == estimand:
                return m
        raise KeyError((method, estimand))


def _measures(method: str, estimand: str, est: np.ndarray, se: np.ndarray,
              truth: float, n_dropped: int) -> MethodPerformance:
    if len(est) < 2:
        raise ValueError(f"method {method!r} has < 2 converged replications")
    bias = float(est.mean() - truth)
    rel = None if truth == 0 else 100.0 * bias / truth
    lo, hi = est - Z_95 * se, est + Z_95 * se
    mean_est = est.mean()
    return MethodPerformance(
        method=method, estimand=estimand, truth=truth, bias=bias,
        relative_bias=rel,
        empirical_se=float(est.std(ddof=1)),
        model_se=float(se.mean()),
        coverage=float(np.mean((lo <= truth) & (truth <= hi))),
        bias_eliminated_coverage=float(np.mean((lo <= mean_est) & (mean_est <= hi))),
        n_used=len(est), n_dropped=n_dropped,
    )


def performance_report(log: ReplicationLog) -> PerformanceReport:
    """Aggregate a replication log into per-method performance measures.

    Non-converged replications are excluded per estimand, with counts
    reported.
    """
    out = []
    for method, grp in log.frame.groupby("method", sort=False):
        for estimand, truth, conv_col, se_col in (
                ("rd", log.rd_true, "converged_rd", "rd_se"),
                ("log_rr", log.log_rr_true, "converged_rr", "log_rr_se")):
            keep = grp[grp[conv_col].astype(bool)]
            out.append(_measures(
                method, estimand,
                keep[estimand if estimand == "rd" else "log_rr"].to_numpy(float),
                keep[se_col].to_numpy(float), truth,
                n_dropped=len(grp) - len(keep)))
    return PerformanceReport(tuple(out))


def comparative_table(report: PerformanceReport, estimand: str) -> pd.DataFrame:
    """Comparative rows for one estimand, simultaneous adjustment first.

    Values carry full precision; use format_table for 2-decimal display.
    """
    rows = [m for m in report.measures if m.estimand == estimand]
    order = {name: i for i, name in enumerate(METHOD_ORDER)}
    rows.sort(key=lambda m: order.get(m.method, len(order)))
    return pd.DataFrame([{
        "method": m.method,
        "bias": m.bias,
        "relative_bias_pct": m.relative_bias,
        "empirical_se": m.empirical_se,
        "model_se": m.model_se,
        "coverage": m.coverage,
        "bias_eliminated_coverage": m.bias_eliminated_coverage,
        "n_used": m.n_used,
        "n_dropped": m.n_dropped,
    } for m in rows])


def format_table(table: pd.DataFrame) -> str:
    """Aligned text rendering with 2-decimal numeric display."""
    shown = table.copy()
    for col in shown.columns:
        if shown[col].dtype.kind == "f":
            shown[col] = shown[col].map(
                lambda v: "" if pd.isna(v) else f"{v:.2f}")
    return shown.to_string(index=False)
