"""Two-stage spectrum estimation for the model ``Y = D X1 + X2``.

Stage one treats ``R = D X1`` as the signal of the additive model and
estimates the mixed moments of ``S = (1/N') R R^H``.  Stage two inverts the
linear map taking the moments ``Delta_lambda = prod tr_n((D D^H)^lambda_i)``
to the expected moments of ``S``, which is a complex Wishart matrix with
covariance ``D D^H`` and ``N'`` degrees of freedom.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy

from .matrices import stack
from .moments import (
    DELTA_BASIS,
    P_MAX,
    S_BASIS,
    CapacityError,
    ModelDims,
    Partition,
    StackingScheme,
    estimator_coeffs,
    format_partition,
    partitions_upto,
)
from .estimation import estimate_from_matrix

HORIZONTAL = "horizontal-stack"
AVERAGE = "average"


class DegenerateMapError(ArithmeticError):
    """The moment map is singular for this number of columns."""


@dataclass(frozen=True)
class MomentVector:
    entries: dict
    basis: str = DELTA_BASIS

    def __getitem__(self, lam):
        return self.entries[tuple(lam)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["partition", "value"])
        for lam, v in self.entries.items():
            writer.writerow([format_partition(lam), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True)
class WishartMap:
    """Square rational matrix acting on moment vectors ordered as ``partitions``.

    Forward maps take ``Delta`` moments (columns) to ``S`` moments (rows).
    """

    p: int
    n: int
    N_eff: int
    partitions: tuple[Partition, ...]
    matrix: tuple[tuple[Fraction, ...], ...]
    source: str = DELTA_BASIS
    target: str = S_BASIS

    def row(self, lam: Partition) -> dict:
        i = self.partitions.index(tuple(lam))
        return {mu: c for mu, c in zip(self.partitions, self.matrix[i]) if c}

    def apply(self, values: dict) -> dict:
        """Matrix-vector product; values may be floats or arrays over runs."""
        out = {}
        for lam, row in zip(self.partitions, self.matrix):
            acc = 0.0
            for mu, c in zip(self.partitions, row):
                if c:
                    acc = acc + float(c) * values[mu]
            out[lam] = acc
        return out


def _cycles(perm: tuple[int, ...]) -> list[int]:
    seen = [False] * len(perm)
    lengths = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        x = start
        while not seen[x]:
            seen[x] = True
            x = perm[x]
            length += 1
        lengths.append(length)
    return lengths


def _cycle_perm(parts: Partition) -> tuple[int, ...]:
    perm = []
    start = 0
    for size in parts:
        perm.extend(start + (i + 1) % size for i in range(size))
        start += size
    return tuple(perm)


def wishart_row(parts: Partition, n: int, N_eff: int) -> dict:
    """``E prod_j tr_n(S^{p_j})`` as a combination of ``Delta`` moments.

    Sum over permutations ``s`` of the ``w`` factors of
    ``N'^(#cycles(s) - w) n^(#cycles(g s) - k) Delta_{type(g s)}``, ``g`` the
    cycle permutation of ``parts``.
    """
    w = sum(parts)
    k = len(parts)
    gamma = _cycle_perm(parts)
    out: dict[Partition, Fraction] = {}
    n = Fraction(n)
    N_eff = Fraction(N_eff)
    for s in itertools.permutations(range(w)):
        gs = tuple(gamma[s[i]] for i in range(w))
        lam = tuple(sorted(_cycles(gs), reverse=True))
        c = N_eff ** (len(_cycles(s)) - w) * n ** (len(lam) - k)
        out[lam] = out.get(lam, Fraction(0)) + c
    return out


def wishart_forward(p: int, n: int, N_eff: int, p_max: int = P_MAX) -> WishartMap:
    if p > p_max:
        raise CapacityError(f"p={p} exceeds p_max={p_max}")
    parts = tuple(partitions_upto(p))
    rows = []
    for lam in parts:
        r = wishart_row(lam, n, N_eff)
        rows.append(tuple(r.get(mu, Fraction(0)) for mu in parts))
    return WishartMap(p, n, N_eff, parts, tuple(rows))


def invert_map(wmap: WishartMap) -> WishartMap:
    M = sympy.Matrix([[sympy.Rational(c.numerator, c.denominator) for c in row] for row in wmap.matrix])
    if M.det() == 0:
        raise DegenerateMapError(f"moment map is singular for N_eff={wmap.N_eff}")
    inv = M.inv()
    rows = tuple(
        tuple(Fraction(int(inv[i, j].p), int(inv[i, j].q)) for j in range(inv.cols))
        for i in range(inv.rows)
    )
    return WishartMap(wmap.p, wmap.n, wmap.N_eff, wmap.partitions, rows, wmap.target, wmap.source)


def stage_one(observations, n: int, N: int, p: int, mode: str) -> dict:
    """Unbiased estimates of the mixed moments of ``S`` for every partition of weight ``<= p``."""
    obs = np.asarray(observations)
    L = obs.shape[-3]
    parts = partitions_upto(p)
    if mode == HORIZONTAL:
        Y = stack(obs, StackingScheme(1, L))
        dims = ModelDims(n, N * L)
        return {lam: estimate_from_matrix(estimator_coeffs(lam, dims), Y, N * L) for lam in parts}
    if mode == AVERAGE:
        dims = ModelDims(n, N)
        return {
            lam: np.mean(estimate_from_matrix(estimator_coeffs(lam, dims), obs, N), axis=-1)
            for lam in parts
        }
    raise ValueError(f"unknown mode {mode!r}")


def two_stage_estimate(observations, dims: tuple[int, int, int], p: int, mode: str = HORIZONTAL) -> MomentVector:
    """Estimates of ``Delta_lambda`` for all partitions of weight ``<= p``.

    ``observations`` has shape ``(..., L, n, N)`` and ``dims = (n, m, N)``.
    """
    n, m, N = dims
    obs = np.asarray(observations)
    if obs.shape[-2:] != (n, N):
        raise ValueError(f"observations have shape {obs.shape[-2:]}, expected {(n, N)}")
    L = obs.shape[-3]
    s_hat = stage_one(obs, n, N, p, mode)
    N_eff = N * L if mode == HORIZONTAL else N
    inverse = invert_map(wishart_forward(p, n, N_eff))
    return MomentVector(inverse.apply(s_hat), DELTA_BASIS)


def delta_moments(D, q_max: int) -> dict:
    """``Delta_q = tr_n((D D^H)^q)`` for ``q = 1 .. q_max``."""
    D = np.asarray(D)
    eig = np.linalg.eigvalsh(D @ np.conj(D.T))
    return {(q,): float(np.sum(eig**q) / D.shape[0]) for q in range(1, q_max + 1)}
