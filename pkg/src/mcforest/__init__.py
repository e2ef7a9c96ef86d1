"""Multi-study causal forests: honest effect estimation with data borrowing.

The package fits honest causal forests under per-observation weights and
uses two data-driven borrowing weights (propensity overlap and effect
correlation) to decide how much of an auxiliary study to pool into a
primary analysis. A seeded simulation harness benchmarks the resulting
six estimators by test-set RMSE over replicated synthetic study pairs.
"""

from .data import (
    SplitSpec,
    StudyDataset,
    concat,
    read_csv,
    split_train_test,
    validate,
    write_csv,
)
from .forest import (
    ForestConfig,
    ProbabilityForest,
    Tree,
    default_classification_config,
    fit_classification_forest,
    grow_tree,
    predict_probability,
)
from .causal import (
    CausalForestModel,
    CausalTree,
    default_causal_config,
    fit_causal_forest,
    grow_causal_tree,
    leaf_estimate,
    predict_cate,
    predict_cate_oob,
    split_score,
)
from .mcf import (
    EstimatorKind,
    McfFit,
    correlation_weight,
    fit_mcf,
    predict_all,
    propensity_weights,
    summarize_fit,
)
from .simgen import (
    GeneratedPair,
    SimScenario,
    StudyCoefficients,
    assign_treatment,
    generate_covariates,
    generate_outcome,
    generate_pair,
    load_scenario,
    resolve_scenario,
    save_scenario,
    scenario_from_name,
    scenario_from_tables,
    treatment_probability,
)
from .harness import (
    FailedReplication,
    ReplicationResult,
    StudySummary,
    desk_scale_configs,
    emit_boxplot_svg,
    emit_csv,
    full_scale_configs,
    read_long_csv,
    rmse,
    run_replication,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "CausalForestModel",
    "CausalTree",
    "EstimatorKind",
    "FailedReplication",
    "ForestConfig",
    "GeneratedPair",
    "McfFit",
    "ProbabilityForest",
    "ReplicationResult",
    "SimScenario",
    "SplitSpec",
    "StudyCoefficients",
    "StudyDataset",
    "StudySummary",
    "Tree",
    "assign_treatment",
    "concat",
    "correlation_weight",
    "default_causal_config",
    "default_classification_config",
    "desk_scale_configs",
    "emit_boxplot_svg",
    "emit_csv",
    "fit_causal_forest",
    "fit_classification_forest",
    "fit_mcf",
    "full_scale_configs",
    "generate_covariates",
    "generate_outcome",
    "generate_pair",
    "grow_causal_tree",
    "grow_tree",
    "leaf_estimate",
    "load_scenario",
    "predict_all",
    "predict_cate",
    "predict_cate_oob",
    "predict_probability",
    "propensity_weights",
    "read_csv",
    "read_long_csv",
    "resolve_scenario",
    "rmse",
    "run_replication",
    "run_study",
    "save_scenario",
    "scenario_from_name",
    "scenario_from_tables",
    "split_score",
    "split_train_test",
    "summarize_fit",
    "treatment_probability",
    "validate",
    "write_csv",
]
