"""Moment-method deconvolution of Gaussian-noise matrix observations under stacking."""

from .diagrams import (
    DiagramShape,
    DiagramSummary,
    PartialPermutation,
    enumerate_sp,
    enumerate_spr,
    sp_count,
    summarize,
)
from .moments import (
    CapacityError,
    EvaluationError,
    ModelDims,
    MomentExpression,
    StackingScheme,
    estimator_coeffs,
    evaluate,
    forward_map,
    noisy_estimator_coeffs,
    partition,
    scale_moments,
    stacked_estimator_coeffs,
)
from .variance import (
    AsymptoticLimits,
    VarianceReport,
    asymptotic_limits,
    averaging_variance,
    optimal_stacking,
    stacked_variance,
    variance_expression,
)
from .matrices import (
    SeededSampler,
    empirical_variance,
    gram_moments,
    observe_additive,
    observe_model2,
    sample_gaussian,
    stack,
)
from .estimation import stacked_estimate
from .wishart import (
    DegenerateMapError,
    MomentVector,
    WishartMap,
    invert_map,
    two_stage_estimate,
    wishart_forward,
)
from .experiments import ExperimentConfig, batched_runs, run_experiment

__version__ = "0.1.0"
