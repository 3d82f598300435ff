"""Default prior set for case-study-style analyses.

Encodes literature- and elicitation-based prior distributions for the bias
models of a breastfeeding/childhood-asthma cohort analysis:

- unmeasured confounding by gestational hypertension (prevalence plus
  exposure and outcome associations);
- misclassification of breastfeeding self-reports and parent-reported
  asthma (sensitivity/specificity/prevalence priors, converted to
  report-true odds ratios);
- selection on consent and on English-speaking eligibility (marginal odds
  plus conditional odds-ratio priors, with an exposure-by-outcome
  interaction);
- outcome missingness (response odds ratio for the reported outcome).

Coefficients on the observed confounders, where a bias model needs them,
are estimated from the data at hand by regressing the corresponding
observed variable (or the response indicator) on the confounders; model
intercepts are calibrated per prior draw so the implied marginal prevalence
matches its target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, INTERCEPT, design_from_columns
from .glm import fit_logistic
from .params import (Beta, BiasParameterPriors, ModelPrior, NormalOnLog,
                     PointMass, Prior, Uniform)
from .simgen import or_from_sens_spec


@dataclass(frozen=True)
class OddsPrevalence:
    """Prior over a marginal odds, sampled as the implied prevalence."""

    odds: NormalOnLog

    def sample(self, rng: np.random.Generator) -> float:
        o = math.exp(self.odds.sample(rng))
        return o / (1 + o)


@dataclass(frozen=True)
class LogOrFromSensSpec:
    """Prior over log OR(report, truth) induced by sens/spec priors."""

    sens: Beta
    spec: Beta

    def sample(self, rng: np.random.Generator) -> float:
        return math.log(or_from_sens_spec(self.sens.sample(rng),
                                          self.spec.sample(rng)))


def _observed_fit(dataset: Dataset, target: str, terms: list[str],
                  mask: np.ndarray | None = None) -> dict[str, float]:
    """Point estimates of a helper model fitted to the observed data."""
    cols = dataset.columns()
    if mask is not None:
        cols = {k: v[mask] for k, v in cols.items()}
    X, labels = design_from_columns(cols, dataset.schema, terms)
    fit = fit_logistic(X, cols[target], labels=labels)
    return dict(zip(labels, fit.coefficients))


def _as_point_slopes(coef: dict[str, float]) -> dict[str, Prior]:
    """Fitted slopes as point-mass priors, dropping the intercept."""
    return {k: PointMass(float(v)) for k, v in coef.items() if k != INTERCEPT}


def case_study_priors(dataset: Dataset) -> BiasParameterPriors:
    """Default bias-parameter priors, anchored to the supplied dataset."""
    conf = dataset.schema.names
    ry1 = dataset.column("r_y") == 1

    a_star_on_c = _as_point_slopes(_observed_fit(dataset, "a_star", conf))
    y_star_on_c = _as_point_slopes(_observed_fit(dataset, "y_star", conf, mask=ry1))
    ry_model = _observed_fit(dataset, "r_y", ["a_star"] + conf)
    observed_response_rate = float(np.mean(dataset.column("r_y")))

    exposure_misclass = LogOrFromSensSpec(Beta(44, 4), Beta(82, 18))
    outcome_misclass = LogOrFromSensSpec(Beta(54, 13), Beta(42, 5))

    gamma = ModelPrior(
        coefficients={"a_star": exposure_misclass, **a_star_on_c},
        marginal_target=Uniform(0.80, 0.90))
    alpha_single = ModelPrior(
        coefficients={"y_star": outcome_misclass, **y_star_on_c},
        marginal_target=Uniform(0.21, 0.30))
    alpha = ModelPrior(
        coefficients={"y_star": outcome_misclass,
                      # true exposure-outcome association, needed only when
                      # the exposure is imputed alongside the outcome
                      "a": NormalOnLog.from_percentiles(0.6, 0.5, 0.8),
                      **y_star_on_c},
        marginal_target=Uniform(0.21, 0.30))

    delta = ModelPrior(
        coefficients={"a": NormalOnLog.from_percentiles(0.70, 0.50, 0.80),
                      "y": NormalOnLog.from_percentiles(1.1, 0.88, 1.2)},
        marginal_target=OddsPrevalence(NormalOnLog.from_percentiles(0.12, 0.07, 0.20)))

    theta = ModelPrior(
        coefficients={"a_star": NormalOnLog.from_percentiles(1.1, 1.0, 1.3),
                      "y_star": NormalOnLog.from_percentiles(1.2, 0.9, 1.3),
                      "a_star:y_star": NormalOnLog.from_percentiles(1.4, 1.0, 1.7)},
        marginal_target=OddsPrevalence(NormalOnLog.from_percentiles(2.8, 2.3, 4.0)))

    lambda_ = ModelPrior(
        coefficients={"a_star": NormalOnLog.from_percentiles(0.88, 0.84, 0.93),
                      "y_star": NormalOnLog.from_percentiles(1.2, 0.90, 1.5),
                      "a_star:y_star": NormalOnLog.from_percentiles(0.70, 0.5, 0.80)},
        marginal_target=OddsPrevalence(NormalOnLog.from_percentiles(5.0, 4.0, 9.0)))

    eta = ModelPrior(
        coefficients={"y_star": NormalOnLog.from_percentiles(1.2, 1.10, 1.5),
                      **_as_point_slopes(ry_model)},
        marginal_target=PointMass(observed_response_rate))

    return BiasParameterPriors(
        gamma=gamma, alpha=alpha, delta=delta, theta=theta, lambda_=lambda_,
        eta=eta, gamma_single=gamma, alpha_single=alpha_single, delta_single=delta)
