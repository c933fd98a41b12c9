"""Command-line front end.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 a check
command's acceptance gate failed.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (ConfigError, parse_scenario_file, run_convergence,
                          run_grad_check, run_optimize, run_simulate)
from .transport import SolverError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mixopt",
        description="Finite-volume mixing control: simulate, optimize and "
                    "verify scenarios described by INI config files.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("simulate", "forward run under a fixed schedule"),
            ("optimize", "optimize the schedule, then re-simulate it"),
            ("grad-check", "adjoint gradient vs central differences"),
            ("convergence", "refinement study with an order gate")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="scenario INI file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--tol", type=float, default=None,
                       help="override the solver tolerance")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized check harnesses only; "
                            "solver paths never draw random numbers")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_scenario_file(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            _, summary = run_simulate(cfg, args.out, tol=args.tol)
            print(f"final mix-norm {summary['final_mix_norm']:.6e} "
                  f"(series.csv written to {args.out})")
        elif args.command == "optimize":
            _, report, _, summary = run_optimize(cfg, args.out,
                                                 tol=args.tol)
            print(f"{report.termination} after {report.n_iterations} "
                  f"iterations; objective {report.objectives[-1]:.6e}, "
                  f"final mix-norm {summary['final_mix_norm']:.6e}")
        elif args.command == "grad-check":
            summary = run_grad_check(cfg, args.out, tol=args.tol,
                                     seed=args.seed)
            print(f"max relative gradient error "
                  f"{summary['max_rel_error']:.3e} "
                  f"(threshold {summary['threshold']:.1e})")
            if not summary["passed"]:
                return 4
        else:
            summary = run_convergence(cfg, args.out, tol=args.tol)
            verdict = "pass" if summary["passed"] else "FAIL"
            print(f"{summary['study']} refinement study: {verdict} "
                  f"(required order {summary['required_order']:.2f}; "
                  f"details in {args.out}/report.json)")
            if not summary["passed"]:
                return 4
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
