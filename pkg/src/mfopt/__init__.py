"""Multi-fidelity active-learning surrogate optimization.

A library and CLI for globally optimizing noisy black-box objectives
that can be evaluated at several fidelity levels of different cost.
Surrogates are stochastic RBF ensembles with least-squares regression;
the sampling loop combines a penalized lower-confidence-bound
acquisition with benefit-cost fidelity selection under a fixed
evaluation budget.
"""

from .active_learning import (
    AcquisitionConfig,
    CampaignConfig,
    CampaignRecord,
    acquisition,
    penalty,
    propose_point,
    run_campaign,
    select_fidelity,
    should_stop,
)
from .benchmarks import (
    EvaluationError,
    FidelityStack,
    default_costs,
    initial_design,
    make_stack,
    rotation_matrix,
)
from .external import PipeEvaluator
from .metrics import (
    BoxStats,
    ReferenceOptimum,
    aggregate_stats,
    prediction_error,
    reference_errors,
    reference_for_stack,
    relative_improvements,
)
from .multifidelity import (
    BudgetLedger,
    FidelityLevels,
    MfSurrogate,
    add_observation,
    combine_uncertainties,
    computational_cost,
    fit_hierarchy,
    inter_level_errors,
)
from .pso import PsoConfig, init_swarm, minimize, unit_box
from .srbf import (
    FitConditionWarning,
    Prediction,
    RbfEnsemble,
    SrbfConfig,
    TrainingSet,
    fit_ensemble,
    fit_weights,
    kmeans_centers,
    loocv_rmse,
    select_num_centers,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "BoxStats", "BudgetLedger", "CampaignConfig",
    "CampaignRecord", "EvaluationError", "FidelityLevels", "FidelityStack",
    "FitConditionWarning", "MfSurrogate", "PipeEvaluator", "Prediction",
    "PsoConfig", "RbfEnsemble", "ReferenceOptimum", "SrbfConfig",
    "TrainingSet", "acquisition", "add_observation", "aggregate_stats",
    "combine_uncertainties", "computational_cost", "default_costs",
    "fit_ensemble", "fit_hierarchy", "fit_weights", "init_swarm",
    "initial_design", "inter_level_errors", "kmeans_centers", "loocv_rmse",
    "make_stack", "minimize", "penalty", "prediction_error", "propose_point",
    "reference_errors", "reference_for_stack", "relative_improvements",
    "rotation_matrix", "run_campaign", "select_fidelity",
    "select_num_centers", "should_stop", "unit_box",
]
