"""Exact variances of the stacked and averaged moment estimators."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .diagrams import spr_term_table
from .moments import (
    D_BASIS,
    P_MAX,
    CapacityError,
    ModelDims,
    MomentExpression,
    StackingScheme,
    as_fraction,
    evaluate,
    lookup,
    scale_moments,
)


@dataclass(frozen=True)
class VarianceReport:
    p: int
    dims: ModelDims
    scheme: StackingScheme | None
    value: float | Fraction
    expression: MomentExpression

    @property
    def L(self) -> int:
        return 1 if self.scheme is None else self.scheme.L

    @property
    def L_times_value(self):
        return self.L * self.value


@dataclass(frozen=True)
class AsymptoticLimits:
    """Limits of ``L * variance`` as ``L`` grows, per kind of stacking."""

    rect: float
    vert: float
    horiz: float
    avg: float


def _check_p(p: int, p_max: int) -> None:
    if p < 1:
        raise ValueError(f"moment order must be positive, got {p}")
    if p > p_max:
        raise CapacityError(f"p={p} exceeds p_max={p_max}; pass a larger p_max explicitly")


def _spr_fold(p: int, n, N) -> dict:
    n = as_fraction(n)
    N = as_fraction(N)
    out = defaultdict(Fraction)
    for (r, halves, free_even, free_odd), mult in spr_term_table(p).items():
        out[halves] += Fraction(mult) * n ** (len(halves) - 2) / N**r * N**free_even * n**free_odd
    return out


def variance_expression(p: int, dims: ModelDims, p_max: int = P_MAX) -> MomentExpression:
    """Variance of the single-observation estimator of ``D_p`` in the ``D`` basis."""
    _check_p(p, p_max)
    terms = _spr_fold(p, dims.n, dims.N)
    noise2 = as_fraction(dims.sigma) ** 2
    if noise2 != 1:
        # each diagram carries sigma^2 per random edge pair; total weight is 2p
        terms = {lam: c * noise2 ** (2 * p - sum(lam)) for lam, c in terms.items()}
    return MomentExpression(terms, D_BASIS)


def stacked_variance_expression(
    p: int, dims: ModelDims, s: StackingScheme, p_max: int = P_MAX
) -> MomentExpression:
    """Variance of the ``L1 x L2`` stacked estimator of ``D_p``, in the ``D`` basis.

    The single-observation expression is evaluated at the compound dimensions,
    its ``F`` moments are rescaled to ``D`` moments, and the ``L1^(1-p)``
    prefactor of the estimator enters squared.
    """
    if s.averaging:
        return variance_expression(p, dims, p_max).scaled(Fraction(1, s.L))
    compound = ModelDims(dims.n * s.L1, dims.N * s.L2, dims.sigma)
    base = variance_expression(p, compound, p_max)
    pre = Fraction(s.L1) ** (2 - 2 * p)
    return MomentExpression(
        {lam: c * pre * (scale_moments(lam, s.L1) if lam else 1) for lam, c in base.items()},
        D_BASIS,
    )


def d_moments_from_matrix(D, q_max: int, col_norm: float | None = None) -> dict:
    """``D_q = tr(((1/N) D D^H)^q)`` for ``q = 1 .. q_max`` from a matrix."""
    from .matrices import gram_moments

    D = np.asarray(D)
    col_norm = D.shape[1] if col_norm is None else col_norm
    return gram_moments(D, col_norm, [(q,) for q in range(1, q_max + 1)])


def _resolve_moments(d_moments, q_max: int) -> Mapping:
    if isinstance(d_moments, np.ndarray):
        return d_moments_from_matrix(d_moments, q_max)
    return d_moments


def stacked_variance(
    p: int,
    dims: ModelDims,
    s: StackingScheme,
    d_moments,
    exact: bool = False,
    p_max: int = P_MAX,
) -> VarianceReport:
    """Exact variance of the stacked (or averaged) estimator at given moments of ``D``.

    ``d_moments`` is a mapping from partitions (or ints) to ``D_q`` values, or
    the matrix ``D`` itself.  Only ``D_q`` for ``q <= 2p - 1`` are needed.
    """
    expr = stacked_variance_expression(p, dims, s, p_max)
    values = _resolve_moments(d_moments, 2 * p - 1)
    return VarianceReport(p, dims, s, evaluate(expr, values, exact=exact), expr)


def averaging_variance(
    p: int, dims: ModelDims, L: int, d_moments, exact: bool = False, p_max: int = P_MAX
) -> VarianceReport:
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    return stacked_variance(p, dims, StackingScheme.average(L), d_moments, exact, p_max)


def asymptotic_limits(p: int, dims: ModelDims, d_moments, p_max: int = P_MAX) -> AsymptoticLimits:
    """Limits of ``L v`` for rectangular, vertical, horizontal stacking and averaging."""
    if p < 1:
        raise ValueError(f"moment order must be positive, got {p}")
    values = _resolve_moments(d_moments, 2 * p - 1)
    n, N = dims.n, dims.N
    if p == 1:
        v = (2 * float(lookup(values, (1,))) + 1) / (n * N)
        return AsymptoticLimits(v, v, v, v)
    odd = float(lookup(values, (2 * p - 1,)))
    even = float(lookup(values, (2 * p - 2,)))
    rect = 2 * p**2 / (n * N) * odd
    vert = rect + p**2 / N**2 * even
    horiz = rect + p**2 / (n * N) * even
    avg = evaluate(variance_expression(p, dims, p_max), values)
    return AsymptoticLimits(rect, vert, horiz, avg)


def factorizations(L: int) -> list[StackingScheme]:
    """Every ``L1 x L2 = L`` layout, ordered by ``L1``."""
    return [StackingScheme(a, L // a) for a in range(1, L + 1) if L % a == 0]


def squareness(dims: ModelDims, s: StackingScheme) -> float:
    """``|log c|`` with ``c = n L1 / (N L2)``; zero for a square compound matrix."""
    return abs(math.log(dims.n * s.L1) - math.log(dims.N * s.L2))


def optimal_stacking(
    dims: ModelDims, L: int, p: int | None = None, d_moments=None
) -> StackingScheme:
    """Layout whose compound matrix is closest to square; ties go to the smaller ``L1``.

    With ``p`` and ``d_moments`` given, the choice is cross-checked against a
    brute-force evaluation of every factorization's exact variance.
    """
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    candidates = factorizations(L)
    best = min(candidates, key=lambda s: (round(squareness(dims, s), 12), s.L1))
    if p is not None and d_moments is not None:
        exact = isinstance(d_moments, Mapping) and all(
            isinstance(v, (int, Fraction)) for v in d_moments.values()
        )
        values = {s: stacked_variance(p, dims, s, d_moments, exact=exact).value for s in candidates}
        low = min(values.values())
        if values[best] > low * (1 + 1e-12):
            raise RuntimeError(
                f"squarest layout {best} is not variance-optimal: {values[best]} > {low}"
            )
    return best


VARIANCE_CSV_COLUMNS = ["L", "L1", "L2", "c", "kind", "variance", "L_times_variance"]


def variance_curve_rows(p: int, dims: ModelDims, schedule, d_moments, include_average=True):
    """Rows of the variance-curve CSV for every factorization of each ``L``."""
    rows = []
    for L in schedule:
        schemes = factorizations(L) + ([StackingScheme.average(L)] if include_average else [])
        for s in schemes:
            v = stacked_variance(p, dims, s, d_moments).value
            c = "" if s.averaging else float(s.aspect_ratio(dims))
            rows.append(
                {"L": L, "L1": "" if s.averaging else s.L1, "L2": "" if s.averaging else s.L2,
                 "c": c, "kind": s.kind, "variance": v, "L_times_variance": L * v}
            )
    return rows


def write_variance_csv(rows, fmt=lambda x: x) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, VARIANCE_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: fmt(v) for k, v in row.items()})
    return buf.getvalue()
