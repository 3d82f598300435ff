"""Bias-adjustment engine: imputation, selection weighting, weighted fits.

The adjustment pipeline for one parameter set:

1. restrict to records with an observed outcome (r_y = 1);
2. impute the true exposure from the gamma model, the true outcome from the
   alpha model, and the unmeasured confounder from the delta model, each by
   a Bernoulli draw at the model's predicted probability (inactive
   imputations carry the starred value through unchanged);
3. form inverse-probability weights from the selection models (consent,
   eligibility, outcome response) that are switched on;
4. fit weighted identity-link and log-link outcome regressions of the
   working outcome on the working exposure, the confounders, and (when
   confounding adjustment is active) the imputed confounder.

The probabilistic loop repeats the pipeline over draws from the bias
parameter priors (optionally coupled to bootstrap resamples) and summarizes
the replicate estimates with percentile simulation intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .data_model import (ConfounderSchema, Dataset, INTERCEPT,
                         apply_linear_model, design_from_columns)
from .glm import GlmFit, fit_identity_binomial, fit_log_binomial, invlogit
from .params import (BiasParameterPriors, BiasParameterSet, BiasSelection,
                     Coefficients, PriorError, sample_prior)

Z_95 = 1.959963984540054  # standard normal 97.5th percentile

ONE_AT_A_TIME_ORDER = ("CB", "MB-A", "MB-Y", "SB-collider",
                       "SB-generalizability(E)", "SB-generalizability(S)")


class ExtremeWeightError(ValueError):
    """A predicted selection probability fell below the positivity floor."""

    def __init__(self, records):
        self.records = list(records)
        super().__init__(
            f"{len(self.records)} records with selection probability < 1e-6 "
            f"(first few: {self.records[:5]})")


@dataclass(frozen=True)
class WeightVector:
    """Inverse-probability weights with summary diagnostics."""

    weights: np.ndarray
    max_weight: float
    cv: float

    @classmethod
    def from_probs(cls, prob: np.ndarray) -> "WeightVector":
        bad = np.where(prob < 1e-6)[0]
        if len(bad):
            raise ExtremeWeightError(bad)
        w = 1.0 / prob
        mean = float(w.mean())
        cv = float(w.std() / mean) if mean > 0 else 0.0
        return cls(w, float(w.max()), cv)

    def effective_sample_size(self) -> float:
        w = self.weights
        return float(w.sum() ** 2 / np.sum(w * w))


@dataclass(frozen=True)
class EstimateResult:
    """Adjusted (or primary) effect estimates on both scales."""

    rd_hat: float
    log_rr_hat: float
    rd_se: float
    log_rr_se: float
    interval_rd: tuple[float, float]
    interval_log_rr: tuple[float, float]
    interval_kind: str  # "confidence" | "simulation"
    converged_rd: bool = True
    converged_rr: bool = True
    rr_fallback: bool = False
    n_records: int = 0
    max_weight: float = 1.0
    weight_ess: float = float("nan")
    n_replicates: int = 0
    n_dropped: int = 0
    high_drop_warning: bool = False

    @property
    def converged(self) -> bool:
        return self.converged_rd and self.converged_rr


@dataclass(frozen=True)
class AdjustmentPlan:
    """Settings for a probabilistic bias analysis."""

    selection: BiasSelection
    parameters: BiasParameterSet | BiasParameterPriors
    n_parameter_draws: int = 1
    n_bootstrap: int = 0
    seed: int | None = None

    def __post_init__(self):
        if isinstance(self.parameters, BiasParameterPriors) and self.n_parameter_draws < 1:
            raise PriorError("probabilistic mode requires n_parameter_draws >= 1")
        if self.n_bootstrap != 0 and self.n_bootstrap < 100:
            raise PriorError("bootstrap count must be 0 or >= 100")


def _bernoulli(rng: np.random.Generator, prob: np.ndarray) -> np.ndarray:
    # probabilities below the double-precision floor are treated as exactly
    # zero so that perfect-measurement limits reproduce the input exactly
    prob = np.where(prob < 1e-300, 0.0, prob)
    return (rng.random(len(prob)) < prob).astype(float)


def _model_prob(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                coef: Coefficients) -> np.ndarray:
    return invlogit(apply_linear_model(columns, schema, coef))


def analytic_columns(dataset: Dataset) -> dict[str, np.ndarray]:
    """Columns of the analytic sample (observed-outcome records).

    Adds working copies "a" and "y" initialized to the starred values;
    imputation overwrites them in place when active.
    """
    mask = dataset.column("r_y") == 1
    if not mask.any():
        raise ValueError("no records with an observed outcome (r_y = 1)")
    cols = {name: arr[mask] for name, arr in dataset.columns().items()}
    cols["a"] = cols["a_star"].copy()
    cols["y"] = cols["y_star"].copy()
    return cols


def impute_exposure(columns: dict[str, np.ndarray], schema: ConfounderSchema,
                    gamma: Coefficients, rng: np.random.Generator) -> np.ndarray:
    """Draw the true exposure from the gamma bias model."""
    columns["a"] = _bernoulli(rng, _model_prob(columns, schema, gamma))
    return columns["a"]


def impute_outcome(columns: dict[str, np.ndarray], schema: ConfounderSchema,
                   alpha: Coefficients, rng: np.random.Generator) -> np.ndarray:
    """Draw the true outcome from the alpha bias model."""
    columns["y"] = _bernoulli(rng, _model_prob(columns, schema, alpha))
    return columns["y"]


def impute_confounder_u(columns: dict[str, np.ndarray], schema: ConfounderSchema,
                        delta: Coefficients, rng: np.random.Generator) -> np.ndarray:
    """Draw the unmeasured confounder from the delta bias model."""
    columns["u"] = _bernoulli(rng, _model_prob(columns, schema, delta))
    return columns["u"]


def derive_weights(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                   params: BiasParameterSet, active: BiasSelection) -> WeightVector:
    """Inverse-probability weights for the active selection mechanisms."""
    n = len(columns["a_star"])
    prob = np.ones(n)
    if active.selection_consent_s:
        prob = prob * _model_prob(columns, schema, params.theta)
    if active.selection_english_e:
        prob = prob * _model_prob(columns, schema, params.lambda_)
    if active.missingness_ry:
        prob = prob * _model_prob(columns, schema, params.eta)
    return WeightVector.from_probs(prob)


def _fit_estimates(columns: Mapping[str, np.ndarray], schema: ConfounderSchema,
                   include_u: bool, weights: np.ndarray | None,
                   interval_kind: str = "confidence",
                   wv: WeightVector | None = None) -> EstimateResult:
    terms = ["a"] + schema.names + (["u"] if include_u else [])
    X, labels = design_from_columns(columns, schema, terms)
    y = columns["y"]
    fit_rd = fit_identity_binomial(X, y, weights, labels=labels)
    fit_rr = fit_log_binomial(X, y, weights, labels=labels)
    rd, rd_se = float(fit_rd.coefficients[1]), float(fit_rd.se()[1])
    lrr, lrr_se = float(fit_rr.coefficients[1]), float(fit_rr.se()[1])
    return EstimateResult(
        rd_hat=rd, log_rr_hat=lrr, rd_se=rd_se, log_rr_se=lrr_se,
        interval_rd=(rd - Z_95 * rd_se, rd + Z_95 * rd_se),
        interval_log_rr=(lrr - Z_95 * lrr_se, lrr + Z_95 * lrr_se),
        interval_kind=interval_kind,
        converged_rd=fit_rd.converged,
        converged_rr=fit_rr.converged or fit_rr.fallback,
        rr_fallback=fit_rr.fallback,
        n_records=len(y),
        max_weight=wv.max_weight if wv is not None else 1.0,
        weight_ess=wv.effective_sample_size() if wv is not None else float(len(y)),
    )


def primary_analysis(dataset: Dataset) -> EstimateResult:
    """Unadjusted analysis: observed outcome on observed exposure + confounders."""
    cols = analytic_columns(dataset)
    return _fit_estimates(cols, dataset.schema, include_u=False, weights=None)


def adjust_once(dataset: Dataset, params: BiasParameterSet,
                selection: BiasSelection, rng: np.random.Generator) -> EstimateResult:
    """One pass of the simultaneous adjustment pipeline with fixed parameters."""
    if not selection.any():
        raise PriorError("adjustment requires at least one active bias flag")
    params.require(selection)
    schema = dataset.schema
    cols = analytic_columns(dataset)
    if selection.misclass_a:
        impute_exposure(cols, schema, params.gamma, rng)
    if selection.misclass_y:
        impute_outcome(cols, schema, params.alpha, rng)
    if selection.confounding_u:
        impute_confounder_u(cols, schema, params.delta, rng)
    weights = None
    wv = None
    if (selection.selection_consent_s or selection.selection_english_e
            or selection.missingness_ry):
        wv = derive_weights(cols, schema, params, selection)
        weights = wv.weights
    return _fit_estimates(cols, schema, selection.confounding_u, weights, wv=wv)


def _resample(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    idx = rng.integers(0, len(dataset), size=len(dataset))
    frame = dataset.frame.copy(deep=False)
    frame.flags.allows_duplicate_labels = True  # labels reset after selection
    return dataset.replace_frame(frame.iloc[idx])


def probabilistic_qba(dataset: Dataset, plan: AdjustmentPlan) -> EstimateResult:
    """Probabilistic bias analysis with percentile simulation intervals.

    Without bootstrapping, each replicate draws one parameter set from the
    priors and adjusts the original data.  With bootstrapping, each replicate
    pairs a fresh parameter draw with a with-replacement resample, so the
    interval also reflects sampling variability.  Non-converged replicates
    are dropped and counted; losing more than 5% raises a warning flag.
    """
    priors = plan.parameters
    probabilistic = isinstance(priors, BiasParameterPriors)
    if probabilistic:
        priors.require(plan.selection)
    else:
        plan.parameters.require(plan.selection)
    n_rep = plan.n_bootstrap if plan.n_bootstrap else plan.n_parameter_draws
    root = np.random.SeedSequence(plan.seed)
    streams = [np.random.default_rng(s) for s in root.spawn(n_rep)]
    calib_cols = analytic_columns(dataset)
    rd, lrr, dropped = [], [], 0
    for rng in streams:
        data = _resample(dataset, rng) if plan.n_bootstrap else dataset
        if probabilistic:
            params = sample_prior(priors, rng, calib_cols, dataset.schema)
        else:
            params = plan.parameters
        try:
            est = adjust_once(data, params, plan.selection, rng)
        except (ExtremeWeightError, np.linalg.LinAlgError):
            dropped += 1
            continue
        if not est.converged:
            dropped += 1
            continue
        rd.append(est.rd_hat)
        lrr.append(est.log_rr_hat)
    if not rd:
        raise RuntimeError("all probabilistic replicates failed")
    rd = np.asarray(rd)
    lrr = np.asarray(lrr)
    kept = len(rd)
    # percentiles by linear interpolation between order statistics (type 7)
    rd_lo, rd_hi = np.percentile(rd, [2.5, 97.5])
    rr_lo, rr_hi = np.percentile(lrr, [2.5, 97.5])
    return EstimateResult(
        rd_hat=float(np.median(rd)), log_rr_hat=float(np.median(lrr)),
        rd_se=float(rd.std(ddof=1)) if kept > 1 else 0.0,
        log_rr_se=float(lrr.std(ddof=1)) if kept > 1 else 0.0,
        interval_rd=(float(rd_lo), float(rd_hi)),
        interval_log_rr=(float(rr_lo), float(rr_hi)),
        interval_kind="simulation",
        n_records=len(calib_cols["y"]),
        n_replicates=kept, n_dropped=dropped,
        high_drop_warning=dropped > 0.05 * n_rep,
    )


def one_at_a_time_suite(dataset: Dataset, plan: AdjustmentPlan,
                        ) -> dict[str, EstimateResult]:
    """Single-bias adjustments, one result per configured mechanism.

    Each run activates exactly one bias flag; the reduced single-bias
    imputation model is used where the parameter set provides one, and the
    starred working values stand in for any latent regressors otherwise.
    """
    probabilistic = isinstance(plan.parameters, BiasParameterPriors)
    results: dict[str, EstimateResult] = {}
    root = np.random.SeedSequence(plan.seed)
    streams = root.spawn(len(ONE_AT_A_TIME_ORDER))
    for name, stream in zip(ONE_AT_A_TIME_ORDER, streams):
        selection = BiasSelection.single(name)
        sub_params = plan.parameters.for_single(name)
        try:
            sub_params.require(selection)
        except PriorError:
            continue  # this mechanism is not configured
        if probabilistic:
            sub = replace(plan, selection=selection, parameters=sub_params,
                          seed=int(stream.generate_state(1)[0]))
            results[name] = probabilistic_qba(dataset, sub)
        else:
            rng = np.random.default_rng(stream)
            results[name] = adjust_once(dataset, sub_params, selection, rng)
    return results


def identity_parameter_set(u_prevalence: float | None = None) -> BiasParameterSet:
    """Parameter set whose adjustment leaves the primary analysis unchanged.

    Perfect-measurement limits for the misclassification models, unit
    selection probabilities for the selection models, and (optionally) a
    confounder independent of exposure and outcome.
    """
    big = 1500.0
    out = BiasParameterSet(
        gamma={INTERCEPT: -big / 2, "a_star": big},
        alpha={INTERCEPT: -big / 2, "y_star": big},
        theta={INTERCEPT: big},
        lambda_={INTERCEPT: big},
        eta={INTERCEPT: big},
        delta=None if u_prevalence is None else {
            INTERCEPT: float(np.log(u_prevalence / (1 - u_prevalence)))},
    )
    return out
