"""Command-line entry point.

Every subcommand writes to ``--out`` (or stdout) and is deterministic for a
fixed seed. Failures exit with status 1 and a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from .adaptive import ld_schedule, refine_loop, simulated_acquirer, write_jsonl
from .fisher import crb_gap, fisher_matrix, projection_fisher_matrix
from .harness import (PROJECTION_SWEEP, ExperimentConfig, build_schedule, cell_estimates,
                      emit_results, run_comparison)
from .likelihood import FitResult, strategy3
from .model import ModelKind, SystemParams, benchmark_params
from .noise import MeasurementTrace, NoiseSpec, simulate_trace, uniform_schedule
from .spectral import fourier_estimate


class CliError(Exception):
    pass


def _params(args) -> SystemParams:
    if args.omega is not None or args.gamma is not None:
        if args.omega is None or args.gamma is None:
            raise CliError("--omega and --gamma must be given together")
        base = SystemParams(args.omega, args.gamma)
    else:
        base = benchmark_params(args.model, args.kind)
    theta_I = base.theta_I if args.theta_i is None else args.theta_i
    theta_M = base.theta_M if args.theta_m is None else args.theta_m
    return SystemParams(base.omega, base.gamma, theta_I, theta_M)


def _noise(args) -> NoiseSpec:
    if args.noise == "none":
        return NoiseSpec()
    if args.level is None:
        raise CliError(f"--level is required for {args.noise} noise")
    return NoiseSpec(args.noise, args.level)


def _write(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _add_system_args(p):
    p.add_argument("--kind", choices=["fid", "rabi"], default="fid")
    p.add_argument("--model", type=int, default=1, help="benchmark model index 1-10")
    p.add_argument("--omega", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--theta-i", type=float)
    p.add_argument("--theta-m", type=float)


def _add_noise_args(p, default="gaussian", level=None):
    p.add_argument("--noise", choices=["none", "gaussian", "projection"], default=default)
    p.add_argument("--level", type=float, default=level, help="sigma, or Ne for projection noise")


def cmd_simulate(args):
    params = _params(args)
    if args.schedule == "uniform":
        times = uniform_schedule(args.n_t, args.T)
    else:
        times = build_schedule({"type": "ld", "n_t": args.n_t, "T": args.T})
    trace = simulate_trace(params, args.kind, times, _noise(args), args.seed)
    _write(trace.to_csv(), args.out)


def cmd_estimate(args):
    trace = MeasurementTrace.from_csv(sys.stdin if args.input == "-" else args.input)
    kind = ModelKind.parse(args.kind)
    if args.strategy == 3:
        fit = strategy3(trace, kind, uncertainties=not args.no_uncertainty)
        fit.extra = {"strategy": 3}
    else:
        if kind is not ModelKind.FID:
            raise CliError("strategies 1 and 2 only apply to the fid model")
        omega, gamma, clipped = fourier_estimate(trace, args.strategy)
        fit = FitResult(omega, gamma, math.nan, math.nan, (math.nan, math.nan), math.nan, math.nan,
                        extra={"strategy": args.strategy, "clipped": bool(clipped)})
    _write(fit.to_json() + "\n", args.out)


def cmd_compare(args):
    config = ExperimentConfig.from_json(args.config)
    stats = run_comparison(config, workers=args.workers)
    if args.summary:
        rows = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                for r in stats.summary()]
        _write(json.dumps(rows, indent=1, sort_keys=True) + "\n", args.out)
    else:
        _write(emit_results(stats, format=args.format), args.out)


def cmd_adaptive(args):
    params = _params(args)
    noise = _noise(args)
    acquire = simulated_acquirer(params, args.kind, noise, args.seed)
    if args.initial == "ld":
        initial = ld_schedule(args.n0, args.ni, 0, args.T)[0].times
    else:
        initial = uniform_schedule(args.n0, args.T)
    results = refine_loop(initial, acquire, args.method, args.iterations, args.kind, args.T, args.ni,
                          seed=args.seed)
    _write(write_jsonl(results), args.out)


def cmd_fisher(args):
    if args.kind != "fid":
        raise CliError("the Fisher bound is defined for the fid signal only")
    params = _params(args)
    times = uniform_schedule(args.n_t, args.T)
    sweep = args.ne_sweep or list(PROJECTION_SWEEP)
    records = []
    for ne in sweep:
        if args.bound == "binomial":
            fm = projection_fisher_matrix(params, times, ne)
        else:
            fm = fisher_matrix(params, times, ne ** -0.5)
        est = cell_estimates(params, ModelKind.FID, times, NoiseSpec.projection(ne), [3],
                             args.runs, args.seed, args.model)[3]
        est = est[np.all(np.isfinite(est), axis=1)]
        gap = crb_gap(est, fm)
        records.append({"ne": int(ne), "fisher": fm.matrix.tolist(), **gap.to_dict()})
    _write(json.dumps(records, indent=1, sort_keys=True) + "\n", args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlsid", description="Two-level system parameter estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated trace as CSV")
    _add_system_args(p)
    _add_noise_args(p, level=0.05)
    p.add_argument("--n-t", type=int, default=100)
    p.add_argument("--T", type=float, default=30.0)
    p.add_argument("--schedule", choices=["uniform", "ld"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit a trace CSV and write FitResult JSON")
    p.add_argument("--strategy", type=int, choices=[1, 2, 3], default=3)
    p.add_argument("--kind", choices=["fid", "rabi"], default="fid")
    p.add_argument("--in", dest="input", required=True, help="trace CSV, '-' for stdin")
    p.add_argument("--no-uncertainty", action="store_true", help="skip the FWHM scan")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="Monte-Carlo strategy comparison from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--summary", action="store_true", help="emit min/median/max across models")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("adaptive", help="iterative refinement, one JSON line per iteration")
    p.add_argument("--method", choices=["ld", "variance"], default="ld")
    _add_system_args(p)
    _add_noise_args(p, level=0.05)
    p.add_argument("--initial", choices=["ld", "uniform"], default="ld")
    p.add_argument("--n0", type=int, default=20)
    p.add_argument("--ni", type=int, default=8)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--T", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_adaptive)

    p = sub.add_parser("fisher", help="estimator covariance against the Cramer-Rao bound")
    _add_system_args(p)
    p.add_argument("--ne-sweep", type=int, nargs="*", help=f"ensemble sizes (default {list(PROJECTION_SWEEP)})")
    p.add_argument("--bound", choices=["binomial", "gaussian"], default="binomial")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--n-t", type=int, default=100)
    p.add_argument("--T", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fisher)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (CliError, ValueError, ArithmeticError, RuntimeError, OSError, KeyError,
            np.linalg.LinAlgError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
