"""Apply the moment estimators to observed matrices."""

from __future__ import annotations

import numpy as np

from .matrices import gram_moments, stack
from .moments import (
    P_MAX,
    ModelDims,
    MomentExpression,
    StackingScheme,
    estimator_coeffs,
    lookup,
    stacked_estimator_coeffs,
)


def evaluate_observed(expr: MomentExpression, values) -> np.ndarray | float:
    """Float evaluation that also works when the values are arrays over runs."""
    total = 0.0
    for lam, c in expr.items():
        total = total + float(c) * lookup(values, lam)
    return total


def estimate_from_matrix(expr: MomentExpression, Y, col_norm: float):
    values = gram_moments(Y, col_norm, [lam for lam in expr if lam])
    return evaluate_observed(expr, values)


def stacked_estimate(observations, parts, dims: ModelDims, s: StackingScheme, p_max: int = P_MAX):
    """Estimate of ``D_parts`` from ``L = L1 L2`` observations stacked as ``s``.

    ``observations`` has shape ``(..., L, n, N)``; leading axes are runs.
    With ``s.averaging`` the single-observation estimates are averaged.
    """
    obs = np.asarray(observations)
    if s.averaging:
        single = estimate_from_matrix(estimator_coeffs(parts, dims, p_max), obs, dims.N)
        return np.mean(single, axis=-1)
    expr = stacked_estimator_coeffs(parts, dims, s, p_max)
    return estimate_from_matrix(expr, stack(obs, s), dims.N * s.L2)
