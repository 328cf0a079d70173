"""Command-line entry point: ``gitfl run | summarize | partition-stats``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .config import ConfigError, load_config
from .experiment import run_experiment
from .orchestrator import build_environment
from .reporting import load_run_directory, summarize, write_summary


def cmd_run(args) -> int:
    spec = load_config(args.config)
    if args.output_dir:
        spec.output_dir = args.output_dir
    print(f"{len(spec.runs)} runs -> {spec.output_dir}", file=sys.stderr)
    return run_experiment(spec, jobs=args.jobs)


def cmd_summarize(args) -> int:
    grouped = load_run_directory(args.directory)
    if not grouped:
        print(f"no metrics files found in {args.directory}", file=sys.stderr)
        return 1
    write_summary(summarize(grouped, args.target), sys.stdout)
    return 0


def cmd_partition_stats(args) -> int:
    spec = load_config(args.config)
    w = csv.writer(sys.stdout, lineterminator="\n")
    seen = set()
    header = None
    for cfg in spec.runs:
        # the partition depends only on data settings, alpha and seed
        key = (cfg.alpha, cfg.seed)
        if key in seen:
            continue
        seen.add(key)
        env = build_environment(cfg)
        classes = env.task.classes
        if classes == 0:
            print("partition-stats needs a classification task", file=sys.stderr)
            return 1
        columns = ["alpha", "seed", "client", "samples"] + [f"class_{k}" for k in range(classes)]
        if columns != header:
            w.writerow(columns)
            header = columns
        for cid, shard in enumerate(env.shards):
            hist = shard.label_histogram(classes)
            alpha = "iid" if cfg.alpha is None else repr(cfg.alpha)
            w.writerow([alpha, cfg.seed, cid, len(shard)] + hist.tolist())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gitfl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute every run of an experiment config")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="time/communication-to-target report for a run directory")
    p.add_argument("directory")
    p.add_argument("--target", type=float, required=True, help="target accuracy in (0, 1)")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("partition-stats", help="per-client label histograms of the data split")
    p.add_argument("config")
    p.set_defaults(func=cmd_partition_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
