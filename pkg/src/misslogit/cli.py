"""Command-line entry point: ``misslogit run | summarize | oracle-check | illustrate-2d``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import MissLogitError
from .harness import ExperimentConfig, oracle_check, run_experiment, summarize_dir
from .illustration import illustrate_2d, write_illustration_csv


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    rows = run_experiment(config, args.out, workers=args.workers, resume=args.resume)
    failed = sum(r["status"] not in ("ok", "not_converged") for r in rows)
    print(f"wrote {len(rows)} result rows to {args.out}/results.csv ({failed} failed)")
    return 0


def _cmd_summarize(args) -> int:
    group = tuple(g.strip() for g in args.group.split(",") if g.strip())
    overall, patterns = summarize_dir(args.input, group)
    print(f"wrote {overall} and {patterns}")
    return 0


def _cmd_oracle_check(args) -> int:
    report = oracle_check(ExperimentConfig.load(args.config), rows=args.rows)
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


def _cmd_illustrate(args) -> int:
    x1, gauss, expo = illustrate_2d(k=args.k, seed=args.seed)
    write_illustration_csv(args.out, x1, gauss, expo)
    print(f"gaussian: max |bayes - best logistic| = {gauss.max_deviation:.4f}")
    print(f"exponential: max |bayes - best logistic| = {expo.max_deviation:.4f}")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misslogit", description="Logistic prediction with missing covariates.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--resume", action="store_true", help="reuse finished cells from a previous run")
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="mean and SE per group of a results directory")
    summ.add_argument("--in", dest="input", required=True, help="directory holding results.csv")
    summ.add_argument("--group", default="scenario,method,n")
    summ.set_defaults(func=_cmd_summarize)

    check = sub.add_parser("oracle-check", help="compare closed-form oracles with Monte Carlo")
    check.add_argument("--config", required=True)
    check.add_argument("--rows", type=int, default=200)
    check.set_defaults(func=_cmd_oracle_check)

    ill = sub.add_parser("illustrate-2d", help="two-feature curves: Gaussian vs exponential missing feature")
    ill.add_argument("--out", default="illustration_2d.csv")
    ill.add_argument("--k", type=int, default=200_000, help="Monte Carlo draws per grid point")
    ill.add_argument("--seed", type=int, default=0)
    ill.set_defaults(func=_cmd_illustrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MissLogitError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
