"""Conditional sure independence screening (CSIS) and likelihood-ratio screening for GLMs."""
from .glm import Family, FitProblem, FitResult, RankDeficientError, cumulant, fit_glm, neg_loglik, observed_information
from .screening import (ConditioningSet, Dataset, ScreenStatistics, rank_features, screen_conditional,
                        select_by_likelihood, select_by_magnitude)
from .thresholding import ThresholdRule, decoupling_threshold, fdr_select, normal_quantile
from .metrics import conditional_eigen_ratio, fp_fn, minimum_model_size, summarize_mms
from .datagen import (CovariateModel, ExperimentSpec, example_spec, gen_equicorrelated, gen_factor_mixture,
                      gen_response, rho_to_loading)
from .harness import ReportRow, RunConfig, load_csv, run_experiment

__version__ = "0.1.0"
