"""Command line front end.

Single results are printed as ``key=value`` lines, tables as CSV.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import diagrams
from .estimation import stacked_estimate
from .experiments import RUNNERS, ExperimentConfig, run_experiment
from .matrices import (
    SeededSampler,
    diag_matrix,
    diag_moments,
    observe_additive,
    parse_diag,
    read_matrix,
)
from .moments import (
    P_MAX,
    ModelDims,
    StackingScheme,
    coefficient_table,
    forward_map,
    partition,
    stacked_estimator_coeffs,
)
from .variance import asymptotic_limits, d_moments_from_matrix, optimal_stacking, stacked_variance


def _num(x) -> str:
    return f"{float(x):.12g}"


def _add_matrix_flags(ap):
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--diag", help="diagonal of D as a comma list, e.g. 2,1,1,0.5")
    src.add_argument("--matrix", help="matrix file (rows cols, then Re Im pairs)")
    ap.add_argument("--n", type=int)
    ap.add_argument("--N", type=int)
    ap.add_argument("--sigma", type=float, default=1.0)


def _source(args, q_max):
    """``(D, dims, moments)`` from --diag or --matrix."""
    if args.matrix:
        D = read_matrix(args.matrix)
        dims = ModelDims(D.shape[0], D.shape[1], args.sigma)
        if (args.n and args.n != dims.n) or (args.N and args.N != dims.N):
            raise ValueError(f"--n/--N do not match the {dims.n}x{dims.N} matrix")
        return D, dims, d_moments_from_matrix(D, q_max)
    if not args.diag:
        raise ValueError("need --diag or --matrix")
    diag = parse_diag(args.diag)
    n = args.n or len(diag)
    N = args.N or n
    dims = ModelDims(n, N, args.sigma)
    return diag_matrix(diag, n, N), dims, diag_moments(diag, N, q_max, n)


def _scheme(args) -> StackingScheme:
    if args.L1 or args.L2:
        return StackingScheme(args.L1 or 1, args.L2 or 1)
    if args.L:
        return StackingScheme.average(args.L)
    return StackingScheme(1, 1)


def cmd_enumerate(args):
    if args.kind == "sp":
        shape = diagrams.DiagramShape(tuple(int(x) for x in args.shape.split(",")) if args.shape else (args.p,))
        items = diagrams.enumerate_sp(shape)
    else:
        items = diagrams.enumerate_spr(args.p)
    if args.list:
        for pp in items:
            print(" ".join(f"{i}->{j}" for i, j in pp.pairs) or "-")
    else:
        print(sum(1 for _ in items))


def cmd_variance(args):
    _, dims, moments = _source(args, 2 * args.p - 1)
    s = _scheme(args)
    rep = stacked_variance(args.p, dims, s, moments, p_max=args.p_max)
    print(f"p={args.p}")
    print(f"kind={s.kind}")
    print(f"L1={s.L1}" if not s.averaging else "L1=")
    print(f"L2={s.L2}" if not s.averaging else "L2=")
    print(f"variance={_num(rep.value)}")
    print(f"L_times_variance={_num(rep.L_times_value)}")


def cmd_limits(args):
    _, dims, moments = _source(args, 2 * args.p - 1)
    lim = asymptotic_limits(args.p, dims, moments, p_max=args.p_max)
    for key in ("rect", "vert", "horiz", "avg"):
        print(f"{key}={_num(getattr(lim, key))}")


def cmd_optimal(args):
    if args.L is None:
        raise ValueError("--L is required")
    if args.diag or args.matrix:
        _, dims, moments = _source(args, 2 * args.p - 1)
        s = optimal_stacking(dims, args.L, args.p, moments)
    else:
        if not (args.n and args.N):
            raise ValueError("need --n and --N (or a matrix)")
        s = optimal_stacking(ModelDims(args.n, args.N), args.L)
    print(f"L1={s.L1} L2={s.L2}")


def cmd_estimate(args):
    parts = (args.p,)
    if args.obs:
        obs = np.stack([read_matrix(f) for f in args.obs])
        n, N = obs.shape[-2:]
        dims = ModelDims(n, N, args.sigma)
        s = _scheme(args)
        if s.L != len(obs):
            raise ValueError(f"{len(obs)} observation files for L={s.L}")
        truth = None
    else:
        if args.seed is None:
            raise ValueError("--seed is required when simulating observations")
        D, dims, moments = _source(args, args.p)
        s = _scheme(args)
        obs = observe_additive(D, args.sigma, SeededSampler(args.seed), size=(s.L,))
        truth = moments[parts]
    value = stacked_estimate(obs, parts, dims, s, p_max=args.p_max)
    print(f"estimate={_num(value)}")
    if truth is not None:
        print(f"true={_num(truth)}")


def cmd_coeffs(args):
    dims = ModelDims(args.n, args.N, args.sigma)
    s = StackingScheme(args.L1 or 1, args.L2 or 1)
    targets = [partition(*(int(x) for x in t.split("+"))) for t in args.parts] if args.parts else [(args.p,)]
    if args.kind == "forward":
        exprs = [(t, forward_map(t, dims, args.p_max)) for t in targets]
    else:
        exprs = [(t, stacked_estimator_coeffs(t, dims, s, args.p_max)) for t in targets]
    sys.stdout.write(coefficient_table(exprs))


def cmd_experiment(args):
    overrides = {k: getattr(args, k) for k in ("seed", "out", "K", "p") if getattr(args, k, None) is not None}
    if args.diag:
        overrides["diag"] = [str(x) for x in parse_diag(args.diag)]
    if args.schedule:
        overrides["schedule"] = [int(x) for x in args.schedule.split(",")]
    overrides["experiment"] = args.experiment
    if args.config:
        config = ExperimentConfig.from_json(args.config, **overrides)
    else:
        config = ExperimentConfig(**overrides)
    text, path = run_experiment(config, write=not args.stdout)
    if args.stdout:
        sys.stdout.write(text)
    else:
        print(f"wrote={path}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stackdeconv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enumerate", help="count (or list) partial permutations")
    e.add_argument("--p", type=int, required=True)
    e.add_argument("--kind", choices=["sp", "spr"], default="sp")
    e.add_argument("--shape", help="pair counts per circle for sp, e.g. 2,1")
    e.add_argument("--list", action="store_true")
    e.set_defaults(func=cmd_enumerate)

    for name, func, hlp in [
        ("variance", cmd_variance, "exact variance of a stacked or averaged estimator"),
        ("limits", cmd_limits, "limits of L * variance"),
        ("optimal-stacking", cmd_optimal, "squarest stacking for L observations"),
        ("estimate", cmd_estimate, "run the estimator on simulated or given observations"),
    ]:
        c = sub.add_parser(name, help=hlp)
        _add_matrix_flags(c)
        c.add_argument("--p", type=int, default=3)
        c.add_argument("--L1", type=int)
        c.add_argument("--L2", type=int)
        c.add_argument("--L", type=int, help="number of observations (averaging unless L1/L2 given)")
        c.add_argument("--seed", type=int)
        c.add_argument("--p-max", dest="p_max", type=int, default=P_MAX)
        if name == "estimate":
            c.add_argument("--obs", nargs="+", help="observation matrix files, row-major block order")
        c.set_defaults(func=func)

    c = sub.add_parser("coeffs", help="CSV coefficient table of the forward map or estimator")
    c.add_argument("--p", type=int, default=2)
    c.add_argument("--parts", nargs="+", help="target partitions such as 2+1")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--L1", type=int)
    c.add_argument("--L2", type=int)
    c.add_argument("--sigma", type=float, default=1.0)
    c.add_argument("--kind", choices=["estimator", "forward"], default="estimator")
    c.add_argument("--p-max", dest="p_max", type=int, default=P_MAX)
    c.set_defaults(func=cmd_coeffs)

    for name in RUNNERS:
        x = sub.add_parser(name, help=f"run the {name} experiment and write CSV")
        x.add_argument("--config", help="JSON config file; flags override its fields")
        x.add_argument("--seed", type=int)
        x.add_argument("--out", help="output directory (default $STACKDECONV_OUT or ./results)")
        x.add_argument("--diag")
        x.add_argument("--p", type=int)
        x.add_argument("--K", type=int)
        x.add_argument("--schedule", help="comma list of L values")
        x.add_argument("--stdout", action="store_true", help="print CSV instead of writing a file")
        x.set_defaults(func=cmd_experiment, experiment=name)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
