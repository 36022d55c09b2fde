"""Integrated control-variable selection and robust parameter design.

Fits dual response surfaces (process mean and noise-transmitted variance)
to observational data, searches control-variable subsets with a genetic
algorithm whose fitness is the achieved design quality, and benchmarks the
wrapper against mutual-information and random-forest sequential pipelines
on synthetic ground-truth processes.
"""

from .data import (
    Bounds,
    DataError,
    Dataset,
    FoldAssignment,
    VariableRole,
    derive_bounds,
    load_dataset,
    noise_covariance,
    split_folds,
    standardize_noise,
)
from .rsm import (
    DesignMatrix,
    RsmModel,
    build_design_matrix,
    delta_variance,
    fit_on_subset,
    fit_rsm,
    mean_surface,
    variance_surface,
)
from .design import (
    DegenerateStatisticError,
    DesignGoal,
    DesignSolution,
    Formulation,
    SnrMode,
    closed_form_variance_min,
    optimize_design,
    snr,
)
from .search import (
    FitnessEvaluator,
    FitnessWeights,
    Fitness,
    GaConfig,
    SearchResult,
    evaluate_fitness,
    exhaustive_search,
    ga_search,
)
from .baselines import RankedVariables, RfConfig, mi_rank, rf_rank, sequential_pipeline
from .synth import (
    BUILTIN_SETTINGS,
    ExperimentSetting,
    GroundTruthModel,
    MetricsReport,
    case_study_dataset,
    compute_metrics,
    generate_ground_truth,
    get_setting,
    run_experiment,
    sample_observations,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds", "DataError", "Dataset", "FoldAssignment", "VariableRole",
    "derive_bounds", "load_dataset", "noise_covariance", "split_folds",
    "standardize_noise",
    "DesignMatrix", "RsmModel", "build_design_matrix", "delta_variance",
    "fit_on_subset", "fit_rsm", "mean_surface", "variance_surface",
    "DegenerateStatisticError", "DesignGoal", "DesignSolution", "Formulation",
    "SnrMode", "closed_form_variance_min", "optimize_design", "snr",
    "FitnessEvaluator", "FitnessWeights", "Fitness", "GaConfig", "SearchResult",
    "evaluate_fitness", "exhaustive_search", "ga_search",
    "RankedVariables", "RfConfig", "mi_rank", "rf_rank", "sequential_pipeline",
    "BUILTIN_SETTINGS", "ExperimentSetting", "GroundTruthModel", "MetricsReport",
    "case_study_dataset", "compute_metrics", "generate_ground_truth",
    "get_setting", "run_experiment", "sample_observations",
    "__version__",
]
