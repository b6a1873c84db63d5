"""Orthogonal causal machine learning on a parallel task pool.

Estimates average and heterogeneous treatment effects from observational
data by cross-fitted residualization, with every fold fit, tuning
candidate, and refutation replication dispatched to a worker pool as an
independent pure task. Results are bit-identical for any worker count.
"""

from .crossfit import FoldPlan, NuisancePredictions, crossfit_predict, make_folds
from .data import (
    Dataset,
    DgpSpec,
    GroundTruth,
    generate_synthetic,
    load_csv,
    save_csv,
)
from .dml import (
    CateModel,
    DmlSpec,
    EffectEstimate,
    NuisanceDiagnostics,
    cate,
    effect_estimate_to_dict,
    effect_estimate_to_json,
    estimate,
    estimate_detailed,
    fit_final,
    plugin_ate,
    residualize,
)
from .exceptions import (
    CausalPoolError,
    ConfigError,
    DataError,
    EstimationError,
    TaskError,
)
from .learners import (
    FittedModel,
    HyperParams,
    LearnerSpec,
    cv_score,
    deserialize_model,
    fit,
    predict,
    serialize_model,
)
from .refute import (
    OverlapReport,
    RefutationReport,
    overlap_diagnostic,
    placebo_treatment,
    random_common_cause,
    subset_refuter,
)
from .runtime import BenchReport, BenchRow, Executor, benchmark
from .seeding import derive_seed
from .tune import ParamGrid, TuneResult, grid_search, resolve_tuned

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "BenchRow",
    "CateModel",
    "CausalPoolError",
    "ConfigError",
    "DataError",
    "Dataset",
    "DgpSpec",
    "DmlSpec",
    "EffectEstimate",
    "EstimationError",
    "Executor",
    "FittedModel",
    "FoldPlan",
    "GroundTruth",
    "HyperParams",
    "LearnerSpec",
    "NuisanceDiagnostics",
    "NuisancePredictions",
    "OverlapReport",
    "ParamGrid",
    "RefutationReport",
    "TaskError",
    "TuneResult",
    "benchmark",
    "cate",
    "crossfit_predict",
    "cv_score",
    "derive_seed",
    "deserialize_model",
    "effect_estimate_to_dict",
    "effect_estimate_to_json",
    "estimate",
    "estimate_detailed",
    "fit",
    "fit_final",
    "generate_synthetic",
    "grid_search",
    "load_csv",
    "make_folds",
    "overlap_diagnostic",
    "placebo_treatment",
    "plugin_ate",
    "predict",
    "random_common_cause",
    "resolve_tuned",
    "residualize",
    "save_csv",
    "serialize_model",
    "subset_refuter",
]
