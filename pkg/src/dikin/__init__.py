"""Uniform sampling from polytopes with the Dikin walk."""

from .barriers import (
    MetricEvaluation,
    MetricKind,
    evaluate_metric,
    hessian_directional_derivative,
    log_barrier_hessian,
    ls_matrix,
    ls_weights,
)
from .estimators import (
    LogDetEstimatorSpec,
    det_from_log_sample,
    det_ratio_estimate,
    logdet_sample,
)
from .exceptions import DikinError
from .polytope import (
    Polytope,
    analytic_center,
    chord_through,
    cross_ratio_distance,
    cube,
    cube_dup,
    load_polytope,
    make_polytope,
    random_polytope,
    simplex,
)
from .sampler import DikinSampler
from .walk import WalkConfig, dikin_step, run_chain, run_chains

__version__ = "0.1.0"

__all__ = [
    "DikinError",
    "DikinSampler",
    "LogDetEstimatorSpec",
    "MetricEvaluation",
    "MetricKind",
    "Polytope",
    "WalkConfig",
    "analytic_center",
    "chord_through",
    "cross_ratio_distance",
    "cube",
    "cube_dup",
    "det_from_log_sample",
    "det_ratio_estimate",
    "dikin_step",
    "evaluate_metric",
    "hessian_directional_derivative",
    "load_polytope",
    "log_barrier_hessian",
    "logdet_sample",
    "ls_matrix",
    "ls_weights",
    "make_polytope",
    "random_polytope",
    "run_chain",
    "run_chains",
    "simplex",
]
