"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Expected values come from the independent oracles in ``tests/oracles.py`` or
from closed forms, never from the code under test.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from stackdeconv.diagrams import enumerate_sp, enumerate_spr, DiagramShape
from stackdeconv.experiments import ExperimentConfig, batched_runs, run_fig3
from stackdeconv.estimation import stacked_estimate
from stackdeconv.matrices import SeededSampler, diag_matrix, diag_moments, empirical_variance, observe_additive, observe_model2
from stackdeconv.moments import (
    ModelDims,
    StackingScheme,
    compose_expectation,
    evaluate,
    forward_map,
    partitions_upto,
    stacked_estimator_coeffs,
)
from stackdeconv.variance import factorizations, stacked_variance, variance_expression
from stackdeconv.wishart import HORIZONTAL, AVERAGE, two_stage_estimate, wishart_forward

from . import oracles

F = Fraction
SEED = 7
DIAG = [2, 1, 1, F(1, 2)]
DIMS = ModelDims(4, 4)


def test_01_symbolic_unbiasedness(report):
    bad = []
    for parts in partitions_upto(4):
        for n, N, L1, L2 in itertools.product([1, 2, 4], [1, 2, 4], [1, 2, 3], [1, 2, 3]):
            dims, s = ModelDims(n, N), StackingScheme(L1, L2)
            got = compose_expectation(stacked_estimator_coeffs(parts, dims, s), dims, s)
            if got.terms != {parts: 1}:
                bad.append((parts, n, N, L1, L2))
    report("1 symbolic unbiasedness", not bad, f"{len(bad)} failing cases")
    assert not bad


def test_02_enumeration_counts(report):
    sp = [sum(1 for _ in enumerate_sp(DiagramShape((p,)))) for p in (1, 2, 3, 4)]
    spr = [sum(1 for _ in enumerate_spr(p)) for p in (1, 2, 3)]
    ok = sp == [2, 7, 34, 209] and spr == [4, 49, 1156]
    report("2 enumeration counts", ok, f"SP={sp} SPR={spr}")
    assert ok


def test_03_first_moment_variance(report):
    worst = 0.0
    for n, N in itertools.product([1, 2, 3, 4, 7], repeat=2):
        for diag in ([1], [2, 1, 1, 0.5], [0.3, 5.0, 0.0], [np.pi, np.e]):
            D = diag_matrix(diag, n, N)
            d1 = np.sum(np.abs(D) ** 2) / (n * N)
            v = evaluate(variance_expression(1, ModelDims(n, N)), {(1,): d1})
            closed = (2 * d1 + 1) / (n * N)
            worst = max(worst, abs(v - closed) / closed)
    report("3 p=1 exact variance", worst < 1e-12, f"max rel err {worst:.2e}")
    assert worst < 1e-12


def test_04_scalar_wick(report):
    worst = 0.0
    dims = ModelDims(1, 1)
    for d in [0.0, 0.1, 1.0, math.sqrt(2), 3.7, 12.0]:
        vals = {(q,): d ** (2 * q) for q in range(1, 4)}
        v1 = evaluate(variance_expression(1, dims), vals)
        m2 = evaluate(forward_map((2,), dims), vals)
        worst = max(worst, abs(v1 - (2 * d * d + 1)) / (2 * d * d + 1))
        worst = max(worst, abs(m2 - (d**4 + 4 * d * d + 2)) / (d**4 + 4 * d * d + 2))
    # the closed forms themselves against Gaussian index summation at rational d
    for d in [F(0), F(3, 2), F(5)]:
        D = [[d]]
        assert oracles.mixed_moment(D, (2,)) == d**4 + 4 * d * d + 2
        assert oracles.mixed_moment(D, (1, 1)) - oracles.mixed_moment(D, (1,)) ** 2 == 2 * d * d + 1
    report("4 scalar Wick cross-check", worst < 1e-12, f"max rel err {worst:.2e}")
    assert worst < 1e-12


def test_05_empirical_vs_exact_variance(report):
    D = diag_matrix(DIAG)
    moments = diag_moments(DIAG, 4, 5)
    ratios = {}
    for L1, L2 in [(1, 50), (2, 25), (5, 10), (10, 5)]:
        s = StackingScheme(L1, L2)
        obs = observe_additive(D, 1.0, SeededSampler(SEED, (2, 50, L1)), size=(1000, 50))
        emp = empirical_variance(stacked_estimate(obs, (3,), DIMS, s))
        ratios[(L1, L2)] = emp / stacked_variance(3, DIMS, s, moments).value
    ok = all(abs(r - 1) <= 0.15 for r in ratios.values())
    report("5 empirical vs exact variance", ok, " ".join(f"{k}:{v:.3f}" for k, v in ratios.items()))
    assert ok


def test_06_orderings(report):
    failures = []
    for L in (12, 36, 144):
        for p in (2, 3):
            moments = diag_moments(DIAG, 4, 2 * p - 1)
            schemes = sorted(factorizations(L), key=lambda s: abs(math.log(4 * s.L1 / (4 * s.L2))))
            vals = [stacked_variance(p, DIMS, s, moments, exact=True).value for s in schemes]
            if any(a > b for a, b in zip(vals, vals[1:])):
                failures.append(("monotone", L, p))
            avg = stacked_variance(p, DIMS, StackingScheme.average(L), moments, exact=True).value
            if not all(v < avg for v in vals):
                failures.append(("averaging", L, p))
        moments = diag_moments(DIAG, 4, 1)
        p1 = {stacked_variance(1, DIMS, s, moments, exact=True).value for s in factorizations(L)}
        p1.add(stacked_variance(1, DIMS, StackingScheme.average(L), moments, exact=True).value)
        if len(p1) != 1:
            failures.append(("p=1", L))
    report("6 stacking orderings", not failures, str(failures) if failures else "exact")
    assert not failures


def test_07_limit_convergence(report):
    L = 10_000
    moments = diag_moments(DIAG, 4, 5)
    d5, d4 = float(moments[(5,)]), float(moments[(4,)])
    rect_limit = 2 * 9 / 16 * d5
    side_limit = rect_limit + 9 / 16 * d4
    errs = {
        "rect": L * stacked_variance(3, DIMS, StackingScheme(100, 100), moments).value / rect_limit - 1,
        "vert": L * stacked_variance(3, DIMS, StackingScheme(L, 1), moments).value / side_limit - 1,
        "horiz": L * stacked_variance(3, DIMS, StackingScheme(1, L), moments).value / side_limit - 1,
    }
    ok = all(abs(e) < 0.02 for e in errs.values())
    report("7 limit convergence", ok, " ".join(f"{k}:{v:+.4f}" for k, v in errs.items()))
    assert ok


def test_08_wishart_oracle(report):
    sigmas = {
        1: [[[F(2)]], [[F(1, 3)]]],
        2: [[[F(2), F(0)], [F(0), F(1, 2)]], [[F(1), F(1, 2)], [F(1, 2), F(2)]]],
    }
    mismatches = 0
    checked = 0
    for n in (1, 2):
        for N_eff in (1, 2, 3):
            wmap = wishart_forward(3, n, N_eff)
            for Sigma in sigmas[n]:
                delta = oracles.delta_values(Sigma, 3)
                for lam in wmap.partitions:
                    pred = sum(c * oracles.product_value(delta, mu) for mu, c in wmap.row(lam).items())
                    checked += 1
                    mismatches += pred != oracles.wishart_moment(Sigma, lam, N_eff)
    report("8 Wishart map oracle", mismatches == 0, f"{checked} exact comparisons")
    assert mismatches == 0


@pytest.mark.slow
def test_09_two_stage_unbiased(report):
    D = diag_matrix(DIAG)
    # tr_n((D D^H)^3) evaluated exactly from the diagonal
    target = sum(F(x) ** 6 for x in DIAG) / 4
    assert target == F("16.50390625")
    runs = batched_runs(
        lambda smp, k: two_stage_estimate(observe_model2(D, 4, smp, size=(k, 100)), (4, 4, 4), 3, HORIZONTAL)[(3,)],
        10_000, SEED, (9,),
    )
    mean = runs.mean()
    se = runs.std(ddof=1) / math.sqrt(len(runs))
    z = (mean - float(target)) / se
    ok = abs(z) < 3
    report("9 two-stage unbiasedness", ok, f"mean={mean:.4f} target={float(target)} z={z:+.2f}")
    assert ok


def test_10_horizontal_beats_average_trend(report):
    config = ExperimentConfig(experiment="fig3", seed=SEED, K=50, schedule=[20, 40, 60, 80, 100])
    rows = run_fig3(config)
    var = {(r["L"], r["mode"]): r["empirical_variance"] for r in rows}
    wins = sum(var[(L, HORIZONTAL)] < var[(L, AVERAGE)] for L in config.schedule)
    report("10 horizontal vs average trend", wins >= 4, f"{wins}/5 points")
    assert wins >= 4
