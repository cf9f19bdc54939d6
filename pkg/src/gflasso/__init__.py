"""Structured sparse multi-task regression with graph-guided coefficient fusion.

The estimator couples an entrywise l1 penalty with a fusion penalty along the
edges of a task-correlation graph, and is solved by an accelerated
proximal-gradient method on a smoothed surrogate of the non-smooth penalty.
Companion baselines (lasso, row-grouped l1/l2, univariate fused regression),
a synthetic-data benchmark harness, and a CLI round out the package.
"""

__version__ = "0.1.0"

from .errors import DegenerateInputError, NumericError
from .graph import TaskGraph, build_correlation_graph, chain_graph, incidence_matrix, pearson, weighted_degrees
from .models import (
    FitResult,
    PenaltySpec,
    fit_fused_univariate,
    fit_gflasso,
    fit_group_l1l2,
    fit_lasso,
    objective_gflasso,
)
from .simulate import Dataset, GroundTruth, SimulationSpec, simulate_dataset
from .smoothing import FusionOperator, gap_constant, operator_norm_bound, shrink
from .solver import Solution, SolverConfig, iteration_bound, largest_eigenvalue, prox_grad_fit, subgradient_fit

__all__ = [
    "DegenerateInputError",
    "NumericError",
    "TaskGraph",
    "build_correlation_graph",
    "chain_graph",
    "incidence_matrix",
    "pearson",
    "weighted_degrees",
    "FitResult",
    "PenaltySpec",
    "fit_fused_univariate",
    "fit_gflasso",
    "fit_group_l1l2",
    "fit_lasso",
    "objective_gflasso",
    "Dataset",
    "GroundTruth",
    "SimulationSpec",
    "simulate_dataset",
    "FusionOperator",
    "gap_constant",
    "operator_norm_bound",
    "shrink",
    "Solution",
    "SolverConfig",
    "iteration_bound",
    "largest_eigenvalue",
    "prox_grad_fit",
    "subgradient_fit",
]
