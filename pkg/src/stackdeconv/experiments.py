"""Seeded experiment runners producing CSV tables.

Each runner takes an :class:`ExperimentConfig` and returns a list of row
dicts; :func:`write_csv` renders them with a provenance comment line and
fixed 12-significant-digit formatting so identical configs give identical
bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimation import stacked_estimate
from .matrices import (
    SeededSampler,
    diag_matrix,
    diag_moments,
    empirical_variance,
    observe_additive,
    observe_model2,
    read_matrix,
)
from .moments import ModelDims, StackingScheme
from .variance import (
    asymptotic_limits,
    d_moments_from_matrix,
    factorizations,
    stacked_variance,
    variance_curve_rows,
    VARIANCE_CSV_COLUMNS,
)
from .wishart import AVERAGE, HORIZONTAL, delta_moments, two_stage_estimate

OUT_ENV = "STACKDECONV_OUT"
DEFAULT_DIAG = ["2", "1", "1", "0.5"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "custom"
    diag: list | None = field(default_factory=lambda: list(DEFAULT_DIAG))
    matrix: str | None = None
    n: int | None = None
    N: int | None = None
    m: int | None = None
    p: int = 3
    schedule: list | None = None
    stackings: list | str = "all-factorizations"
    K: int | None = None
    sigma: float = 1.0
    seed: int | None = None
    out: str | None = None
    empirical_L: int = 50
    empirical_L1: list = field(default_factory=lambda: [1, 2, 5, 10])

    @classmethod
    def from_json(cls, path, **overrides) -> ExperimentConfig:
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def matrix_D(self) -> np.ndarray:
        if self.matrix:
            D = read_matrix(self.matrix)
            if self.n is not None and self.n != D.shape[0]:
                raise ConfigError(f"n={self.n} does not match matrix rows {D.shape[0]}")
            if self.N is not None and self.N != D.shape[1] and self.experiment != "fig3":
                raise ConfigError(f"N={self.N} does not match matrix columns {D.shape[1]}")
            return D
        if not self.diag:
            raise ConfigError("need a matrix file or a diagonal")
        n = self.n or len(self.diag)
        cols = self.m if self.experiment == "fig3" else self.N
        return diag_matrix(self.diag, n, cols or n)

    def dims(self) -> ModelDims:
        D = self.matrix_D()
        N = self.N or D.shape[1]
        return ModelDims(D.shape[0], N, self.sigma)

    def d_moments(self, q_max: int):
        """Exact moments for diagonal input, floats for a matrix file."""
        if self.matrix:
            return d_moments_from_matrix(self.matrix_D(), q_max)
        dims = self.dims()
        return diag_moments(self.diag, dims.N, q_max, dims.n)

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError(f"experiment {self.experiment} needs a seed")
        return int(self.seed)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(rows, columns, config: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# experiment={config.experiment} config_sha256={config.digest()} seed={config.seed}\n")
    writer = csv.DictWriter(buf, columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in columns})
    return buf.getvalue()


def output_dir(config: ExperimentConfig) -> Path:
    return Path(config.out or os.environ.get(OUT_ENV, "results"))


CHUNK = 250


def batched_runs(simulate, K: int, seed: int, tag: tuple, chunk: int = CHUNK) -> np.ndarray:
    """Concatenate ``simulate(sampler, k)`` over chunks of at most ``chunk`` runs.

    Chunk ``c`` draws from substream ``tag + (c,)``, so results depend only on
    ``(seed, tag, K, chunk)`` and memory stays bounded.
    """
    out = []
    for c, start in enumerate(range(0, K, chunk)):
        k = min(chunk, K - start)
        out.append(np.asarray(simulate(SeededSampler(seed, tuple(tag) + (c,)), k)))
    return np.concatenate(out, axis=0)


FIG1_COLUMNS = ["L", "estimate", "true_D3"]


def run_fig1(config: ExperimentConfig) -> list[dict]:
    """One square-stacked estimate per ``L``, fresh observations for every ``L``."""
    seed = config.require_seed()
    schedule = config.schedule or [k * k for k in range(1, 31)]
    D = config.matrix_D()
    dims = config.dims()
    truth = float(config.d_moments(config.p)[(config.p,)])
    rows = []
    for L in schedule:
        root = math.isqrt(L)
        if root * root != L:
            raise ConfigError(f"fig1 needs square L, got {L}")
        s = StackingScheme(root, root)
        obs = observe_additive(D, config.sigma, SeededSampler(seed, (1, L)), size=(L,))
        est = stacked_estimate(obs, (config.p,), dims, s)
        rows.append({"L": L, "estimate": float(est), "true_D3": truth})
    return rows


FIG2_COLUMNS = ["L", "L1", "L2", "c", "exact_Lv", "limit_rect", "limit_horiz", "limit_avg", "empirical_Lv"]


def run_fig2(config: ExperimentConfig) -> list[dict]:
    """Exact ``L v`` over every factorization, limit lines, and empirical points."""
    schedule = config.schedule or [5, 50]
    K = config.K or 1000
    p = config.p
    D = config.matrix_D()
    dims = config.dims()
    moments = config.d_moments(2 * p - 1)
    lim = asymptotic_limits(p, dims, moments)
    rows = []
    for L in schedule:
        for s in factorizations(L):
            row = {
                "L": L, "L1": s.L1, "L2": s.L2, "c": float(s.aspect_ratio(dims)),
                "exact_Lv": L * stacked_variance(p, dims, s, moments).value,
                "limit_rect": lim.rect, "limit_horiz": lim.horiz, "limit_avg": lim.avg,
                "empirical_Lv": "",
            }
            if L == config.empirical_L and s.L1 in config.empirical_L1:
                seed = config.require_seed()
                obs = observe_additive(D, config.sigma, SeededSampler(seed, (2, L, s.L1)), size=(K, L))
                est = stacked_estimate(obs, (p,), dims, s)
                row["empirical_Lv"] = L * empirical_variance(est)
            rows.append(row)
    return rows


FIG3_COLUMNS = ["L", "mode", "estimate_mean", "empirical_variance", "true_moment"]


def run_fig3(config: ExperimentConfig) -> list[dict]:
    """Two-stage estimates for ``D X1 + X2``: horizontal stacking vs averaging.

    Both modes see the same ``K`` sets of ``L`` observations.
    """
    seed = config.require_seed()
    schedule = config.schedule or list(range(10, 101, 10))
    K = config.K or 50
    p = config.p
    D = config.matrix_D()
    n, m = D.shape
    N = config.N or n
    truth = delta_moments(D, p)[(p,)]
    rows = []
    for L in schedule:
        obs = observe_model2(D, N, SeededSampler(seed, (3, L)), size=(K, L))
        for mode in (HORIZONTAL, AVERAGE):
            est = two_stage_estimate(obs, (n, m, N), p, mode)[(p,)]
            rows.append({
                "L": L, "mode": mode, "estimate_mean": float(np.mean(est)),
                "empirical_variance": empirical_variance(est), "true_moment": truth,
            })
    return rows


def run_custom(config: ExperimentConfig) -> list[dict]:
    """Exact variance curves over a schedule of ``L``."""
    schedule = config.schedule or [4, 16, 64]
    dims = config.dims()
    moments = config.d_moments(2 * config.p - 1)
    if config.stackings == "all-factorizations":
        return variance_curve_rows(config.p, dims, schedule, moments)
    rows = []
    for L1, L2 in config.stackings:
        s = StackingScheme(L1, L2)
        v = stacked_variance(config.p, dims, s, moments).value
        rows.append({"L": s.L, "L1": L1, "L2": L2, "c": float(s.aspect_ratio(dims)),
                     "kind": s.kind, "variance": v, "L_times_variance": s.L * v})
    return rows


RUNNERS = {
    "fig1": (run_fig1, FIG1_COLUMNS),
    "fig2": (run_fig2, FIG2_COLUMNS),
    "fig3": (run_fig3, FIG3_COLUMNS),
    "custom": (run_custom, VARIANCE_CSV_COLUMNS),
}


def run_experiment(config: ExperimentConfig, write: bool = True) -> tuple[str, Path | None]:
    """Run, render the CSV and (optionally) write ``<out>/<experiment>.csv``."""
    try:
        runner, columns = RUNNERS[config.experiment]
    except KeyError:
        raise ConfigError(f"unknown experiment {config.experiment!r}") from None
    text = write_csv(runner(config), columns, config)
    if not write:
        return text, None
    out = output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{config.experiment}.csv"
    path.write_text(text)
    return text, path
