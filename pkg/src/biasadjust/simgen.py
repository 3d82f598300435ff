"""Synthetic data generation and large-sample oracles.

Records are generated sequentially: independent baseline confounders, then
maternal covariates, birth covariates, an unmeasured confounder U, the true
exposure A, an eligibility indicator E, the true outcome Y, misclassified
reports A* and Y*, and an outcome-response indicator R_y.  All conditional
models are logistic with fixed coefficient tables; the scenario knobs
(prevalences, odds ratios, sensitivity/specificity pairs) control the
strength of each bias mechanism.

The oracles fit the generating-scale quantities on a large synthetic
population: true_ace returns the adjusted exposure coefficients (risk
difference and log risk ratio) and correct_bias_params returns the bias-model
coefficients the adjustment engine treats as correctly specified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .data_model import (ConfounderSchema, Dataset, INTERCEPT,
                         apply_linear_model, case_study_schema,
                         design_from_columns)
from .engine import EstimateResult, _fit_estimates
from .glm import fit_identity_binomial, fit_log_binomial, fit_logistic, invlogit
from .params import BiasParameterSet, Coefficients

CHUNK_SIZE = 250_000


class ScenarioError(ValueError):
    """Raised when a scenario configuration is invalid."""


def enhance_parameter(theta_r: float, nv: float) -> float:
    """Move a bias parameter twice as far from its null value."""
    if not (np.isfinite(theta_r) and np.isfinite(nv)):
        raise ScenarioError("enhance_parameter requires finite inputs")
    return nv + (theta_r - nv) * 2


def or_from_sens_spec(sens: float, spec: float, prevalence: float = 0.5,
                      n: float = 1000.0) -> float:
    """Odds ratio linking a misclassified report to the true value.

    Built from the implied confusion-table counts TP = p·N·sens,
    FN = p·N − TP, FP = (1−p)·N·spec, TN = (1−p)·N − FP as
    [TP/FN] / [FP/TN]; algebraically independent of prevalence and N.
    """
    for name, v in (("sens", sens), ("spec", spec)):
        if not 0 < v < 1:
            raise ScenarioError(f"{name} must lie strictly inside (0, 1)")
    if not (0 < prevalence < 1 and n > 0):
        raise ScenarioError("prevalence in (0,1) and n > 0 required")
    tp = prevalence * n * sens
    fn = prevalence * n - tp
    fp = (1 - prevalence) * n * spec
    tn = (1 - prevalence) * n - fp
    return (tp / fn) / (fp / tn)


# ---------------------------------------------------------------------------
# Generating-model coefficient tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DgpTables:
    """Coefficient tables of the sequential generating models."""

    p_fhx: float = 0.69
    p_fpa: float = 0.14
    p_fma: float = 0.15
    p_peth: tuple[float, ...] = (0.60, 0.10, 0.30)
    p_nsibs: tuple[float, ...] = (0.50, 0.33, 0.13, 0.04)
    p_sex: float = 0.49
    p_ses: tuple[float, ...] = (0.20, 0.20, 0.21, 0.19, 0.20)

    mage_mean: Coefficients = field(default_factory=lambda: {
        INTERCEPT: 30.82, "ses_2": 2.20, "ses_3": 2.14, "ses_4": 2.65, "ses_5": 3.75})
    mage_sd: float = 4.8
    msmk: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -2.10, "ses_2": -1.25, "ses_3": -0.84, "ses_4": -1.48, "ses_5": -2.57})
    gage: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -2.51, "mage": 0.01, "ses_2": 0.04, "ses_3": -0.16,
        "ses_4": -0.31, "ses_5": -0.16, "msmk": -0.08})
    dmode: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -2.92, "mage": 0.07, "ses_2": -0.05, "ses_3": -0.07,
        "ses_4": -0.16, "ses_5": -0.11})
    lbw: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -4.81, "dmode": 0.70, "gage": 3.85, "mage": 0.01,
        "ses_2": 0.14, "ses_3": -0.01, "ses_4": 0.16, "ses_5": 0.34, "msmk": 0.66})
    exposure: Coefficients = field(default_factory=lambda: {
        INTERCEPT: 1.79, "sex": -0.17, "nsibs_2": -0.56, "nsibs_3": -0.99,
        "nsibs_4": -1.06, "lbw": -0.38, "peth_2": 0.31, "peth_3": 0.36,
        "fma": 0.04, "fpa": -0.11, "fhx": -0.01, "dmode": -0.10, "gage": 0.03,
        "mage": 0.03, "ses_2": 0.86, "ses_3": 1.08, "ses_4": 0.72,
        "ses_5": 0.81, "msmk": -0.575})
    outcome: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -2.39, "sex": -0.63, "nsibs_2": 0.05, "nsibs_3": 0.02,
        "nsibs_4": -0.02, "lbw": 0.19, "peth_2": -0.04, "peth_3": 0.07,
        "fma": 0.95, "fpa": 0.69, "fhx": -0.11, "dmode": 0.17, "gage": 0.19,
        "mage": 0.02, "ses_2": 0.11, "ses_3": -0.05, "ses_4": -0.12,
        "ses_5": -0.02, "msmk": 0.80})
    response: Coefficients = field(default_factory=lambda: {
        INTERCEPT: -1.74, "a_true": 0.79, "sex": -0.11, "nsibs_2": -0.19,
        "nsibs_3": -0.30, "nsibs_4": -0.52, "lbw": -0.18, "peth_2": -0.29,
        "peth_3": -0.35, "fma": 0.22, "fpa": 0.21, "fhx": 0.29, "dmode": -0.13,
        "gage": 0.13, "mage": 0.06, "ses_2": 0.07, "ses_3": 0.21,
        "ses_4": 0.13, "ses_5": -0.01, "msmk": -0.54})


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario knobs plus generating-model coefficient tables."""

    kind: str = "custom"
    p_e: float = 0.85
    or_ya_e: float = 0.70
    p_u: float = 0.10
    or_a_u: float = 0.60
    or_y_u: float = 1.30
    sens_a: float = 0.90
    spec_a: float = 0.84
    p_a: float = 0.94
    sens_y: float = 0.83
    spec_y: float = 0.90
    p_y: float = 0.10
    or_y_ry: float = 1.20
    a_coef: float = -0.43
    e_coef: float = 0.18
    n: int = 2000
    dgp: DgpTables = field(default_factory=DgpTables)

    def __post_init__(self):
        for name in ("p_e", "p_u", "p_a", "p_y", "sens_a", "spec_a",
                     "sens_y", "spec_y"):
            if not 0 < getattr(self, name) < 1:
                raise ScenarioError(f"{name} must lie in (0, 1)")
        for name in ("or_ya_e", "or_a_u", "or_y_u", "or_y_ry"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be > 0")


def realistic_scenario(n: int = 2000) -> ScenarioConfig:
    return ScenarioConfig(kind="realistic", n=n)


def enhanced_scenario(n: int = 2000) -> ScenarioConfig:
    """Realistic knobs moved twice as far from their null values.

    Odds ratios, sensitivities/specificities and the retention prevalence
    are doubled away from 1; the confounder prevalence away from 0.  The
    exposure effect itself is weakened to its stated enhanced value.
    """
    r = realistic_scenario(n)
    return replace(
        r, kind="enhanced",
        p_e=enhance_parameter(r.p_e, 1.0),
        or_ya_e=enhance_parameter(r.or_ya_e, 1.0),
        p_u=enhance_parameter(r.p_u, 0.0),
        or_a_u=enhance_parameter(r.or_a_u, 1.0),
        or_y_u=enhance_parameter(r.or_y_u, 1.0),
        sens_a=enhance_parameter(r.sens_a, 1.0),
        spec_a=enhance_parameter(r.spec_a, 1.0),
        sens_y=enhance_parameter(r.sens_y, 1.0),
        spec_y=enhance_parameter(r.spec_y, 1.0),
        or_y_ry=enhance_parameter(r.or_y_ry, 1.0),
        a_coef=-0.05,
    )


def scenario_preset(name: str, n: int = 2000) -> ScenarioConfig:
    presets = {"realistic": realistic_scenario, "enhanced": enhanced_scenario}
    try:
        return presets[name](n)
    except KeyError:
        raise ScenarioError(f"unknown scenario preset {name!r}") from None


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _generate_chunk(config: ScenarioConfig, schema: ConfounderSchema,
                    n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    d = config.dgp

    def bern(p):
        return (rng.random(n) < p).astype(float)

    cols: dict[str, np.ndarray] = {}
    cols["fhx"] = bern(d.p_fhx)
    cols["fpa"] = bern(d.p_fpa)
    cols["fma"] = bern(d.p_fma)
    cols["peth"] = rng.choice(len(d.p_peth), size=n, p=d.p_peth).astype(float)
    cols["nsibs"] = rng.choice(len(d.p_nsibs), size=n, p=d.p_nsibs).astype(float)
    cols["sex"] = bern(d.p_sex)
    cols["ses"] = rng.choice(len(d.p_ses), size=n, p=d.p_ses).astype(float)

    lp = lambda coef: apply_linear_model(cols, schema, coef)  # noqa: E731
    cols["mage"] = rng.normal(lp(d.mage_mean), d.mage_sd)
    cols["msmk"] = bern(invlogit(lp(d.msmk)))
    cols["gage"] = bern(invlogit(lp(d.gage)))
    cols["dmode"] = bern(invlogit(lp(d.dmode)))
    cols["lbw"] = bern(invlogit(lp(d.lbw)))

    cols["u"] = bern(config.p_u)
    lp_a = lp(d.exposure)
    cols["a_true"] = bern(invlogit(lp_a + math.log(config.or_a_u) * cols["u"]))
    cols["e"] = bern(config.p_e)
    lp_y = lp(d.outcome) + config.a_coef * cols["a_true"]
    cols["y_true"] = bern(invlogit(
        lp_y + math.log(config.or_y_u) * cols["u"] + config.e_coef * cols["e"]
        + math.log(config.or_ya_e) * cols["a_true"] * cols["e"]))
    or_astar_a = or_from_sens_spec(config.sens_a, config.spec_a)
    or_ystar_y = or_from_sens_spec(config.sens_y, config.spec_y)
    cols["a_star"] = bern(invlogit(lp_a + math.log(or_astar_a) * cols["a_true"]))
    cols["y_star"] = bern(invlogit(lp_y + math.log(or_ystar_y) * cols["y_true"]))
    cols["r_y"] = bern(invlogit(lp(d.response) + math.log(config.or_y_ry) * cols["y_true"]))
    return cols


IDEAL_COLUMNS = ("a_true", "y_true", "u", "e", "a_star", "y_star", "r_y")


def generate_ideal(config: ScenarioConfig, seed, n: int | None = None) -> Dataset:
    """Generate a synthetic-ideal dataset with all latent fields present.

    seed may be an int or a numpy SeedSequence.  Generation is chunked, with
    one child random stream per chunk, so output is identical regardless of
    how chunks are scheduled.
    """
    n = config.n if n is None else n
    schema = case_study_schema()
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = max(1, -(-n // CHUNK_SIZE))
    sizes = [CHUNK_SIZE] * (n_chunks - 1) + [n - CHUNK_SIZE * (n_chunks - 1)]
    chunks = [
        _generate_chunk(config, schema, size, np.random.default_rng(child))
        for size, child in zip(sizes, seq.spawn(n_chunks))
    ]
    cols = {name: np.concatenate([c[name] for c in chunks])
            for name in chunks[0]}
    frame = pd.DataFrame({**{name: cols[name] for name in schema.names},
                          **{name: cols[name] for name in IDEAL_COLUMNS}})
    return Dataset(schema, frame, provenance="synthetic-ideal")


def to_observed(ideal: Dataset) -> Dataset:
    """Restrict to eligible records and hide the latent fields."""
    frame = ideal.frame
    kept = frame[frame["e"] == 1].drop(columns=["a_true", "y_true", "u", "e"])
    if len(kept) == 0:
        raise ScenarioError("no eligible records remain after restriction")
    kept = kept.copy()
    kept.loc[kept["r_y"] == 0, "y_star"] = np.nan
    return Dataset(ideal.schema, kept.reset_index(drop=True),
                   provenance="synthetic-observed")


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def _ideal_working_columns(ideal: Dataset) -> dict[str, np.ndarray]:
    cols = ideal.columns()
    cols["a"] = cols["a_true"]
    cols["y"] = cols["y_true"]
    return cols


def true_ace(config: ScenarioConfig, n_large: int = 2_000_000,
             seed=20_240_101) -> tuple[float, float]:
    """Adjusted exposure coefficients on a large ideal population.

    Fits the identity-link and log-link outcome models of the true outcome
    on true exposure, confounders and U over the full (unrestricted)
    population and returns (risk difference, log risk ratio).
    """
    ideal = generate_ideal(config, seed, n=n_large)
    cols = _ideal_working_columns(ideal)
    est = _fit_estimates(cols, ideal.schema, include_u=True, weights=None)
    return est.rd_hat, est.log_rr_hat


def correct_bias_params(config: ScenarioConfig, n_large: int = 1_000_000,
                        seed=20_240_202) -> BiasParameterSet:
    """Bias-model coefficients fitted to a large ideal population.

    The eligibility model is fitted on the full population and the response
    model on the eligible stratum.  Alongside the full models, the reduced
    single-mechanism imputation models (exposure given report and
    confounders only, outcome given report and confounders only, confounder
    given the two reports) are fitted for one-at-a-time use.  The consent
    model is not part of the simulation design and is left unset.
    """
    ideal = generate_ideal(config, seed, n=n_large)
    schema = ideal.schema
    cols = _ideal_working_columns(ideal)
    e1 = cols["e"] == 1
    cols_e1 = {k: v[e1] for k, v in cols.items()}

    def fit(cols_, target, terms):
        X, labels = design_from_columns(cols_, schema, terms)
        fit_ = fit_logistic(X, cols_[target], labels=labels)
        return dict(zip(labels, fit_.coefficients))

    conf = schema.names
    return BiasParameterSet(
        gamma=fit(cols, "a", ["a_star", "y_star"] + conf),
        alpha=fit(cols, "y", ["y_star", "a"] + conf),
        delta=fit(cols, "u", ["a", "y"]),
        lambda_=fit(cols, "e", ["a_star", "y_star", "a_star:y_star"]),
        eta=fit(cols_e1, "r_y", ["a_star", "y_star"] + conf),
        gamma_single=fit(cols, "a", ["a_star"] + conf),
        alpha_single=fit(cols, "y", ["y_star"] + conf),
        delta_single={
            # stored against the working exposure/outcome labels: in a
            # confounding-only run those carry the starred values this
            # reduced model was fitted to
            {"a_star": "a", "y_star": "y", INTERCEPT: INTERCEPT}.get(k, k): v
            for k, v in fit(cols, "u", ["a_star", "y_star"]).items()},
    )
