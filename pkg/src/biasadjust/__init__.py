"""Simultaneous quantitative bias analysis for causal effect estimates.

Adjusts risk-difference and risk-ratio estimates for unmeasured confounding,
exposure/outcome misclassification, selection, and outcome missingness in a
single imputation-and-weighting pipeline, with a probabilistic layer over
bias-parameter priors and a Monte Carlo harness for evaluating simultaneous
versus one-at-a-time adjustment.
"""

__version__ = "1.0.0"

from .data_model import (ConfounderSchema, Covariate, Dataset, SchemaError,
                         build_design_matrix, case_study_schema)
from .engine import (AdjustmentPlan, EstimateResult, ExtremeWeightError,
                     WeightVector, adjust_once, derive_weights,
                     identity_parameter_set, one_at_a_time_suite,
                     primary_analysis, probabilistic_qba)
from .glm import (GlmFit, RankDeficiencyError, fit_identity_binomial,
                  fit_log_binomial, fit_logistic, predict_prob, sandwich_se)
from .metrics import (PerformanceReport, ReplicationLog, comparative_table,
                      performance_report)
from .params import (Beta, BiasParameterPriors, BiasParameterSet,
                     BiasSelection, ModelPrior, NormalOnLog, PointMass,
                     PriorError, Uniform, sample_prior)
from .runner import OracleBundle, compute_oracles, run_simulation
from .simgen import (ScenarioConfig, ScenarioError, correct_bias_params,
                     enhance_parameter, enhanced_scenario, generate_ideal,
                     or_from_sens_spec, realistic_scenario, to_observed,
                     true_ace)
