"""Sampling, stacking and observed moments of complex matrices.

Matrices are plain complex numpy arrays.  Functions accept leading batch
axes so that many Monte-Carlo runs can be handled in one call: a batch of
``K`` runs of ``L`` observations is an array of shape ``(K, L, n, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .moments import Partition, StackingScheme, as_fraction


@dataclass(frozen=True)
class SeededSampler:
    """Counter-style random substreams keyed by ``(master_seed, stream_id)``.

    The same key always reproduces the same draws, whatever order or process
    the streams are consumed in.
    """

    master_seed: int
    stream_id: int | tuple[int, ...] = 0

    def substream(self, *stream_id: int) -> SeededSampler:
        return SeededSampler(self.master_seed, stream_id)

    def generator(self) -> np.random.Generator:
        key = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(seq))


def _rng(sampler) -> np.random.Generator:
    if isinstance(sampler, np.random.Generator):
        return sampler
    if isinstance(sampler, SeededSampler):
        return sampler.generator()
    return np.random.default_rng(sampler)


def sample_gaussian(n: int, N: int, sampler, size: tuple[int, ...] = ()) -> np.ndarray:
    """Standard complex Gaussian ``n x N`` matrices, shape ``size + (n, N)``.

    Real and imaginary parts are independent with variance 1/2 each.
    """
    if n < 1 or N < 1:
        raise ValueError(f"dimensions must be positive, got {n}x{N}")
    rng = _rng(sampler)
    shape = tuple(size) + (n, N)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def observe_additive(D, sigma: float, sampler, size: tuple[int, ...] = ()) -> np.ndarray:
    """Observations ``D + sigma X`` of the additive model."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    D = np.asarray(D, dtype=complex)
    if sigma == 0:
        return np.broadcast_to(D, tuple(size) + D.shape).copy()
    return D + sigma * sample_gaussian(*D.shape, sampler, size)


def observe_model2(D, N: int, sampler, size: tuple[int, ...] = ()) -> np.ndarray:
    """Observations ``D X1 + X2`` with ``D`` of shape ``n x m``.

    ``X1`` (``m x N``) and ``X2`` (``n x N``) are drawn from the same stream,
    ``X1`` first.
    """
    D = np.asarray(D, dtype=complex)
    if D.ndim != 2:
        raise ValueError(f"D must be a matrix, got shape {D.shape}")
    n, m = D.shape
    rng = _rng(sampler)
    X1 = sample_gaussian(m, N, rng, size)
    X2 = sample_gaussian(n, N, rng, size)
    return D @ X1 + X2


def stack(observations, s: StackingScheme) -> np.ndarray:
    """Compound ``(n L1) x (N L2)`` block matrix, filled row-major.

    Observation ``b`` goes to block ``(b // L2, b % L2)``.  ``observations`` is
    a sequence of ``L`` equal-shape matrices or an array ``(..., L, n, N)``.
    """
    obs = np.asarray(observations)
    if obs.ndim < 3:
        raise ValueError("need a sequence of matrices")
    *batch, L, n, N = obs.shape
    if L != s.L:
        raise ValueError(f"got {L} observations for a {s.L1}x{s.L2} stacking")
    blocks = obs.reshape(*batch, s.L1, s.L2, n, N)
    blocks = np.moveaxis(blocks, -3, -2)  # (..., L1, n, L2, N)
    return blocks.reshape(*batch, s.L1 * n, s.L2 * N)


def trace_powers(Y: np.ndarray, col_norm: float, q_max: int) -> np.ndarray:
    """``tr(((1/col_norm) Y Y^H)^q)`` for ``q = 1 .. q_max``, shape ``(..., q_max)``.

    The trace is normalized by the number of rows.  Powers are taken of the
    Gram matrix on the smaller side, which has the same nonzero spectrum.
    """
    Y = np.asarray(Y)
    rows, cols = Y.shape[-2:]
    Yh = np.conj(np.swapaxes(Y, -1, -2))
    G = (Yh @ Y) if cols < rows else (Y @ Yh)
    G = G / col_norm
    out = []
    P = G
    for q in range(1, q_max + 1):
        if q > 1:
            P = P @ G
        out.append(np.real(np.trace(P, axis1=-2, axis2=-1)) / rows)
    return np.stack(out, axis=-1)


def gram_moments(Y, col_norm: float, partitions: Iterable[Partition]) -> dict:
    """Observed mixed moments of ``(1/col_norm) Y Y^H``.

    Mixed partitions are products of single-trace values of the same matrix.
    Values are floats (or arrays over leading batch axes).
    """
    if not col_norm > 0:
        raise ValueError(f"col_norm must be positive, got {col_norm}")
    partitions = [tuple(lam) for lam in partitions]
    q_max = max((max(lam) for lam in partitions if lam), default=0)
    singles = trace_powers(Y, col_norm, q_max) if q_max else None
    out = {}
    for lam in partitions:
        v = 1.0
        for x in lam:
            v = v * singles[..., x - 1]
        out[lam] = v
    return out


def diag_moments(diag: Sequence, N: int, q_max: int, n: int | None = None) -> dict:
    """Exact ``D_q = tr(((1/N) D D^H)^q)`` for an ``n x N`` matrix with the given diagonal.

    Entries are converted to rationals, so the result is exact.  ``n``
    defaults to the length of the diagonal (remaining rows are zero).
    """
    d = [as_fraction(x) for x in diag]
    n = len(d) if n is None else n
    return {
        (q,): sum((x * x / N) ** q for x in d) / Fraction(n)
        for q in range(1, q_max + 1)
    }


def diag_matrix(diag: Sequence, n: int | None = None, N: int | None = None) -> np.ndarray:
    d = np.asarray([float(x) for x in diag], dtype=complex)
    n = len(d) if n is None else n
    N = n if N is None else N
    D = np.zeros((n, N), dtype=complex)
    k = min(len(d), n, N)
    D[np.arange(k), np.arange(k)] = d[:k]
    return D


def empirical_variance(samples) -> float:
    """Unbiased sample variance with the ``1/(K-1)`` normalization."""
    x = np.asarray(samples, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("need at least two samples for an empirical variance")
    return float(np.var(x, axis=0, ddof=1)) if x.ndim == 1 else np.var(x, axis=0, ddof=1)


def read_matrix(path) -> np.ndarray:
    """Read the text format: ``rows cols`` then rows of alternating Re, Im values."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    rows, cols = (int(x) for x in lines[0].split())
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"{path}: expected {rows} data lines, got {len(body)}")
    data = np.array([[float(x) for x in ln.split()] for ln in body])
    if data.shape != (rows, 2 * cols):
        raise ValueError(f"{path}: expected {2 * cols} values per line")
    return data[:, 0::2] + 1j * data[:, 1::2]


def write_matrix(path, M) -> None:
    M = np.asarray(M, dtype=complex)
    rows, cols = M.shape
    inter = np.empty((rows, 2 * cols))
    inter[:, 0::2] = M.real
    inter[:, 1::2] = M.imag
    lines = [f"{rows} {cols}"] + [" ".join(repr(float(v)) for v in row) for row in inter]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_diag(text: str) -> list[Fraction]:
    """Comma list such as ``2,1,1,0.5`` to exact rationals."""
    try:
        return [Fraction(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValueError(f"bad diagonal list {text!r}") from exc
