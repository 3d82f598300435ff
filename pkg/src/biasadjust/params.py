"""Bias-model parameter containers, priors and prior sampling.

Each bias model is represented by a term-keyed coefficient mapping on the
log-odds scale, e.g. {"(intercept)": -1.2, "a_star": 0.8, "sex": 0.1}.  The
labels follow the design-matrix conventions of data_model (categorical
indicators "ses_2", interactions "a_star:y_star").  The working exposure and
outcome columns are named "a" and "y": in a model conditioning on the true
exposure, the label "a" automatically resolves to the starred value whenever
exposure imputation is inactive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import brentq

from .data_model import INTERCEPT, ConfounderSchema, apply_linear_model
from .glm import invlogit

Coefficients = dict[str, float]


class PriorError(ValueError):
    """Raised when a prior specification is invalid or incomplete."""


def sd_from_percentiles(lo: float, hi: float) -> float:
    """Normal sd implied by 2.5th/97.5th percentile anchors on the log scale."""
    return abs(math.log(hi) - math.log(lo)) / (2 * 1.96)


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointMass:
    value: float

    def sample(self, rng: np.random.Generator) -> float:
        return self.value


@dataclass(frozen=True)
class NormalOnLog:
    """Normal prior on the log-odds(-ratio) scale.

    Draws are returned directly on the log scale (ready for use as model
    coefficients).  Optionally constructed from percentile anchors.
    """

    mean_log: float
    sd_log: float
    anchors: tuple[float, float] | None = None

    def __post_init__(self):
        if self.sd_log <= 0:
            raise PriorError("NormalOnLog sd_log must be > 0")

    @classmethod
    def from_percentiles(cls, median: float, lo: float, hi: float) -> "NormalOnLog":
        return cls(math.log(median), sd_from_percentiles(lo, hi), (lo, hi))

    def sample(self, rng: np.random.Generator) -> float:
        return rng.normal(self.mean_log, self.sd_log)


@dataclass(frozen=True)
class Beta:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise PriorError("Beta parameters must be > 0")

    def sample(self, rng: np.random.Generator) -> float:
        return rng.beta(self.a, self.b)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PriorError("Uniform requires lo < hi")

    def sample(self, rng: np.random.Generator) -> float:
        return rng.uniform(self.lo, self.hi)


Prior = PointMass | NormalOnLog | Beta | Uniform


# ---------------------------------------------------------------------------
# Fixed parameter sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasSelection:
    """Which bias mechanisms an adjustment run corrects for."""

    confounding_u: bool = False
    misclass_a: bool = False
    misclass_y: bool = False
    selection_consent_s: bool = False
    selection_english_e: bool = False
    missingness_ry: bool = False

    def any(self) -> bool:
        return any((self.confounding_u, self.misclass_a, self.misclass_y,
                    self.selection_consent_s, self.selection_english_e,
                    self.missingness_ry))

    @classmethod
    def all_biases(cls, include_s: bool = False) -> "BiasSelection":
        return cls(confounding_u=True, misclass_a=True, misclass_y=True,
                   selection_consent_s=include_s, selection_english_e=True,
                   missingness_ry=True)

    @classmethod
    def single(cls, name: str) -> "BiasSelection":
        mapping = {
            "CB": cls(confounding_u=True),
            "MB-A": cls(misclass_a=True),
            "MB-Y": cls(misclass_y=True),
            "SB-collider": cls(missingness_ry=True),
            "SB-generalizability(E)": cls(selection_english_e=True),
            "SB-generalizability(S)": cls(selection_consent_s=True),
        }
        try:
            return mapping[name]
        except KeyError:
            raise PriorError(f"unknown bias name {name!r}") from None


def _check_model(name: str, coef: Mapping[str, float] | None, required: bool):
    if coef is None:
        if required:
            raise PriorError(f"bias model {name!r} is missing")
        return
    for label, value in coef.items():
        if not np.isfinite(value):
            raise PriorError(f"non-finite coefficient {label!r} in model {name!r}")


@dataclass(frozen=True)
class BiasParameterSet:
    """Fixed coefficients of the six bias models.

    gamma: P(A=1 | A*, Y*, C)          alpha: P(Y=1 | Y*, A, C)
    delta: P(U=1 | A, Y)               theta: P(S=1 | A*, Y*, A*Y*)
    lambda_: P(E=1 | A*, Y*, A*Y*)     eta:   P(R_y=1 | A*, Y*, C)

    The *_single variants, when present, are the reduced models used by
    one-at-a-time adjustment of a single mechanism: they condition only on
    quantities available without the other bias models (gamma_single drops
    Y*, alpha_single drops A, delta_single conditions on A*, Y*).
    """

    gamma: Coefficients | None = None
    alpha: Coefficients | None = None
    delta: Coefficients | None = None
    theta: Coefficients | None = None
    lambda_: Coefficients | None = None
    eta: Coefficients | None = None
    gamma_single: Coefficients | None = None
    alpha_single: Coefficients | None = None
    delta_single: Coefficients | None = None

    def __post_init__(self):
        for name in ("gamma", "alpha", "delta", "theta", "lambda_", "eta",
                     "gamma_single", "alpha_single", "delta_single"):
            _check_model(name, getattr(self, name), required=False)

    def require(self, selection: BiasSelection) -> None:
        """Raise unless every model needed by the selection is present."""
        needed = [("misclass_a", "gamma"), ("misclass_y", "alpha"),
                  ("confounding_u", "delta"), ("selection_consent_s", "theta"),
                  ("selection_english_e", "lambda_"), ("missingness_ry", "eta")]
        for flag, model in needed:
            if getattr(selection, flag) and getattr(self, model) is None:
                raise PriorError(f"selection requires bias model {model!r}")

    def scaled(self, factor: float) -> "BiasParameterSet":
        """All coefficients multiplied by a constant (misspecification arms)."""
        def mul(coef):
            return None if coef is None else {k: factor * v for k, v in coef.items()}
        return BiasParameterSet(*(mul(getattr(self, f)) for f in (
            "gamma", "alpha", "delta", "theta", "lambda_", "eta",
            "gamma_single", "alpha_single", "delta_single")))

    def for_single(self, name: str) -> "BiasParameterSet":
        """Parameter set to use when adjusting one mechanism in isolation.

        Substitutes the reduced single-bias imputation model where one is
        available; the full model is used otherwise (starred working values
        then stand in for any latent regressors).
        """
        subs = {"MB-A": ("gamma", "gamma_single"),
                "MB-Y": ("alpha", "alpha_single"),
                "CB": ("delta", "delta_single")}
        if name in subs:
            full, single = subs[name]
            if getattr(self, single) is not None:
                return replace(self, **{full: getattr(self, single)})
        return self


# ---------------------------------------------------------------------------
# Prior sets over parameter sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelPrior:
    """Prior specification for one bias model.

    coefficients maps design labels to priors over log-odds coefficients.
    marginal_target, when given, is a prior over the marginal prevalence of
    the modelled variable: after the slope coefficients are drawn, the
    intercept is calibrated by root finding so the implied mean probability
    over the calibration records matches the drawn target.  A Beta/Uniform
    prior used directly as a coefficient prior is invalid (coefficients live
    on the log-odds scale).
    """

    coefficients: dict[str, Prior]
    marginal_target: Prior | None = None

    def __post_init__(self):
        for label, prior in self.coefficients.items():
            if label != INTERCEPT and isinstance(prior, (Beta, Uniform)):
                raise PriorError(
                    f"prior for coefficient {label!r} must be on the log-odds "
                    "scale (PointMass or NormalOnLog)")
        if self.marginal_target is not None and INTERCEPT in self.coefficients:
            raise PriorError("give either an intercept prior or a marginal target")

    def sample(self, rng: np.random.Generator,
               calibration_lp: Callable[[Coefficients], np.ndarray] | None = None,
               ) -> Coefficients:
        coef = {label: prior.sample(rng) for label, prior in self.coefficients.items()}
        if self.marginal_target is not None:
            target = float(self.marginal_target.sample(rng))
            if calibration_lp is None:
                raise PriorError("marginal-target calibration needs calibration data")
            coef = dict(coef)
            coef[INTERCEPT] = calibrate_intercept(
                lambda b0: calibration_lp({**coef, INTERCEPT: b0}), target)
        return coef


def calibrate_intercept(lp_at: Callable[[float], np.ndarray], target: float,
                        lo: float = -30.0, hi: float = 30.0) -> float:
    """Intercept for which the mean inverse-logit probability equals target."""
    if not 0 < target < 1:
        raise PriorError(f"marginal target {target} outside (0, 1)")

    def gap(b0):
        return float(np.mean(invlogit(lp_at(b0)))) - target

    return float(brentq(gap, lo, hi, xtol=1e-10))


@dataclass(frozen=True)
class BiasParameterPriors:
    """Priors for each bias model; structure mirrors BiasParameterSet."""

    gamma: ModelPrior | None = None
    alpha: ModelPrior | None = None
    delta: ModelPrior | None = None
    theta: ModelPrior | None = None
    lambda_: ModelPrior | None = None
    eta: ModelPrior | None = None
    gamma_single: ModelPrior | None = None
    alpha_single: ModelPrior | None = None
    delta_single: ModelPrior | None = None

    def require(self, selection: BiasSelection) -> None:
        needed = [("misclass_a", "gamma"), ("misclass_y", "alpha"),
                  ("confounding_u", "delta"), ("selection_consent_s", "theta"),
                  ("selection_english_e", "lambda_"), ("missingness_ry", "eta")]
        for flag, model in needed:
            if getattr(selection, flag) and getattr(self, model) is None:
                raise PriorError(f"no prior supplied for required bias model {model!r}")

    def for_single(self, name: str) -> "BiasParameterPriors":
        """Prior set for one-at-a-time adjustment of a single mechanism."""
        subs = {"MB-A": ("gamma", "gamma_single"),
                "MB-Y": ("alpha", "alpha_single"),
                "CB": ("delta", "delta_single")}
        if name in subs:
            full, single = subs[name]
            if getattr(self, single) is not None:
                return replace(self, **{full: getattr(self, single)})
        return self


def sample_prior(priors: BiasParameterPriors, rng: np.random.Generator,
                 columns: Mapping[str, np.ndarray] | None = None,
                 schema: ConfounderSchema | None = None) -> BiasParameterSet:
    """Draw one BiasParameterSet from a prior set.

    columns/schema supply the calibration records used to pin intercepts to
    marginal-prevalence targets; they may be omitted when no model carries a
    marginal target.
    """
    drawn: dict[str, Coefficients | None] = {}
    for name in ("gamma", "alpha", "delta", "theta", "lambda_", "eta",
                 "gamma_single", "alpha_single", "delta_single"):
        model: ModelPrior | None = getattr(priors, name)
        if model is None:
            drawn[name] = None
            continue
        lp = None
        if model.marginal_target is not None:
            if columns is None or schema is None:
                raise PriorError(
                    f"model {name!r} needs calibration data for its marginal target")
            lp = lambda coef: apply_linear_model(columns, schema, coef)  # noqa: E731
        drawn[name] = model.sample(rng, lp)
    return BiasParameterSet(**drawn)
