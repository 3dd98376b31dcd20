"""Command-line front end.

Exit codes: 0 success, 1 solver error, 2 usage error, 3 monitor violation.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional

import numpy as np

from .adaptive import rho_total
from .core import UsageError
from .harness import (
    build_problem,
    load_config,
    make_rho,
    read_trace,
    run_experiment,
    summary_table,
    write_libsvm,
    write_summary,
    write_trace,
)
from .monitor import monitor_check
from .problems import logistic_synthetic, mc_synthetic, nmf_synthetic
from .solver import SolverConfig, run

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_USAGE = 2
EXIT_MONITOR = 3


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default="adapgnc",
                   choices=["adapgnc", "adapgnc-relaxed", "adapgnc-bb",
                            "adgd", "fixed", "gd-ls"])
    p.add_argument("--rho", default="rho2", choices=["rho1", "rho2", "zero"])
    p.add_argument("--lambda0", type=float, default=1.0)
    p.add_argument("--fixed-step", type=float, default=None)
    p.add_argument("--tol", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--max-seconds", type=float, default=math.inf)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--monitor", action="store_true")


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", default="quadratic",
                   choices=["quadratic", "logistic", "lasso", "nmf", "mc"])
    p.add_argument("--data", help="LIBSVM file for the logistic problem")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--nobs", type=int)
    p.add_argument("--gamma", type=float)


def _problem_spec(args) -> dict:
    spec = {"kind": args.problem}
    for key in ("data", "m", "n", "r", "dim", "nobs", "gamma"):
        val = getattr(args, key, None)
        if val is not None:
            spec[key] = str(val)
    return spec


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaprox",
                                 description="Adaptive proximal-gradient toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one solver on one problem")
    _add_problem_flags(ps)
    _add_solver_flags(ps)
    ps.add_argument("--out", help="trace output path")
    ps.add_argument("--format", default="csv", choices=["csv", "json"])

    pb = sub.add_parser("bench", help="run an experiment grid from a config file")
    pb.add_argument("--config", required=True)

    pc = sub.add_parser("check", help="replay a trace through the theory monitor")
    pc.add_argument("trace", help="trace file (json carries solver metadata)")
    pc.add_argument("--known-L", type=float, default=None)
    pc.add_argument("--fstar", type=float, default=None)
    pc.add_argument("--rho", default=None, choices=["rho1", "rho2", "zero"])

    pg = sub.add_parser("gen", help="emit a synthetic dataset to a file")
    _add_problem_flags(pg)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True)
    return ap


def _cmd_solve(args) -> int:
    problem, x0 = build_problem(_problem_spec(args), args.seed)
    config = SolverConfig(engine=args.solver, rho=make_rho(args.rho),
                          lambda0=args.lambda0, fixed_step=args.fixed_step,
                          max_iters=args.max_iters, max_seconds=args.max_seconds,
                          gradmap_tol=args.tol, monitor=args.monitor)
    result = run(problem, x0, config, seed=args.seed)
    trace = result.trace
    print(f"{problem.name}: {args.solver} terminated by {trace.termination} "
          f"after {len(trace.records)} iterations; "
          f"best F = {result.best_F:.10e}, min ||G|| = {trace.min_gradmap():.3e}")
    if result.report is not None:
        for line in result.report.summary_lines():
            print("  monitor", line)
    if args.out:
        write_trace(trace, args.format, args.out)
        print(f"trace written to {args.out}")
    if result.report is not None and not result.report.passed:
        return EXIT_MONITOR
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = load_config(args.config)
    rows, fhat = run_experiment(config)
    print(summary_table(rows))
    print(f"F*_hat = {fhat:.10e}")
    summary_path = f"{config.out_dir}/summary.json"
    write_summary(rows, fhat, summary_path)
    print(f"summary written to {summary_path}")
    if any(r.error for r in rows):
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_check(args) -> int:
    trace = read_trace(args.trace)
    total = rho_total(make_rho(args.rho)) if args.rho else None
    report = monitor_check(trace, None, total, fstar=args.fstar,
                           known_L=args.known_L)
    for line in report.summary_lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_MONITOR


def _cmd_gen(args) -> int:
    if args.problem == "logistic":
        design = logistic_synthetic(args.m or 200, args.n or 20, args.seed)
        with open(args.out, "w") as fh:
            write_libsvm(design, fh)
    elif args.problem == "nmf":
        A = nmf_synthetic(args.n or 200, args.r or 5, args.m or 300, args.seed)
        np.savetxt(args.out, A, fmt="%.17g", delimiter=",")
    elif args.problem == "mc":
        obs = mc_synthetic(args.m or 15, args.n or 12, args.r or 3,
                           args.nobs or 60, 0.0, args.seed)
        with open(args.out, "w") as fh:
            fh.write("i,j,s\n")
            for i, j, s in zip(obs.i, obs.j, obs.s):
                fh.write(f"{i},{j},{format(s, '.17g')}\n")
    else:
        raise UsageError(f"gen does not support problem {args.problem!r}")
    print(f"dataset written to {args.out}")
    return EXIT_OK


def cli_main(argv: Optional[list] = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "check":
            return _cmd_check(args)
        return _cmd_gen(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(cli_main())
