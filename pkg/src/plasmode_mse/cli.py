"""Command-line front end: ``plasmode-mse run|ingest|truth``.

Exit status: 0 on success, 2 when some sweep entries were skipped as
infeasible, 1 on fatal errors (bad config, rejected dataset, oracle failure).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .io import DatasetError, emit_results, ingest_dataset
from .sweep import ConfigError, OracleError, load_config, run_sweep, run_truth_only

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plasmode-mse",
        description="Compare parametric and Plasmode estimates of the component-wise MSE "
                    "of least squares against a Monte Carlo truth.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write result files")
    run.add_argument("config", help="JSON sweep configuration")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, help="worker processes (overrides config and env)")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--truth-reps", type=int, help="replications of the true-MSE oracle")
    run.add_argument("--preset", choices=["full_grid"],
                     help="deviation grid for scenarios that list no deviations")

    ingest = sub.add_parser("ingest", help="check a dataset and print its correlation summary")
    ingest.add_argument("csv", help="numeric CSV file with a header row")

    truth = sub.add_parser("truth", help="compute only the true MSEs of a config")
    truth.add_argument("config", help="JSON sweep configuration")
    truth.add_argument("--workers", type=int)
    truth.add_argument("--seed", type=int)
    truth.add_argument("--truth-reps", type=int)
    return parser


def _overrides(args) -> dict:
    return {"workers": args.workers, "master_seed": args.seed,
            "truth_replications": args.truth_reps}


def _cmd_run(args) -> int:
    config = load_config(args.config, preset=args.preset, overrides=_overrides(args))
    bundle = run_sweep(config)
    paths = emit_results(bundle, args.out)
    print(f"wrote {len(bundle.results)} studies to {args.out}")
    for name in sorted(paths):
        print(f"  {paths[name]}")
    if bundle.skipped:
        print(f"skipped {len(bundle.skipped)} entries:", file=sys.stderr)
        for entry in bundle.skipped:
            print(f"  {entry['scenario']} {entry['deviation']} {entry['variant']}: "
                  f"{entry['reason']}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_ingest(args) -> int:
    summary = ingest_dataset(args.csv)
    json.dump(summary.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_truth(args) -> int:
    config = load_config(args.config, overrides=_overrides(args))
    out = run_truth_only(config)
    doc = {name: {"key": e["key"], "replications": e["true_mse"].replications,
                  "true_mse": e["true_mse"].per_coefficient.tolist(),
                  "standard_errors": e["true_mse"].standard_errors.tolist()}
           for name, e in out.items()}
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "ingest": _cmd_ingest, "truth": _cmd_truth}
    try:
        return handlers[args.command](args)
    except (ConfigError, DatasetError, OracleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
