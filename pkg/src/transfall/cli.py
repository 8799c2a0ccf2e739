"""Command line entry point.

    transfall run --config exp.yaml --data DIR --out DIR [--seed N] [--workers N]
    transfall report --in DIR
    transfall synth --out DIR [--subjects a b ...] [--devices s3_1 ...]
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import synthetic
from .errors import TransfallError
from .harness import load_config, run_matrix
from .harness.report import format_table, read_outputs, render, write_outputs

logger = logging.getLogger("transfall")


def _cmd_run(args) -> int:
    exp = load_config(args.config)
    scenarios = list(exp.scenarios)
    if args.seed is not None:
        scenarios = [s.with_seed(args.seed) for s in scenarios]
    result = run_matrix(scenarios, args.data, exp.dataset, workers=args.workers)
    rows = write_outputs(result.runs, args.out)
    print(format_table(rows))
    n_failed = sum(not r.ok for r in result.runs)
    if n_failed:
        print(f"{n_failed} of {len(result.runs)} runs failed; see {args.out}/failures.csv",
              file=sys.stderr)
    return 1 if n_failed == len(result.runs) else 0


def _cmd_report(args) -> int:
    from pathlib import Path

    runs = read_outputs(args.in_dir)
    rows = render(runs, Path(args.in_dir))
    print(format_table(rows))
    return 0


def _cmd_synth(args) -> int:
    paths = synthetic.write_corpus(
        args.out, args.subjects, args.devices,
        seconds_per_activity=args.seconds, rate_hz=args.rate, seed=args.seed,
    )
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transfall", description=__doc__.splitlines()[0] or None)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the scenarios of a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--data", required=True, help="directory holding the CSV files")
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None, help="override every scenario's seed")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="re-render summaries and figures of a finished run")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.set_defaults(func=_cmd_report)

    syn = sub.add_parser("synth", help="write a synthetic multi-device corpus")
    syn.add_argument("--out", required=True)
    syn.add_argument("--subjects", nargs="+", default=["a", "b", "c"])
    syn.add_argument("--devices", nargs="+", default=["s3_1", "s3_2", "nexus4_1"])
    syn.add_argument("--seconds", type=float, default=20.0, help="seconds per activity")
    syn.add_argument("--rate", type=float, default=50.0)
    syn.add_argument("--seed", type=int, default=0)
    syn.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except TransfallError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
