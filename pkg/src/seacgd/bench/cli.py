"""``bench <experiment> --config file.json [overrides]``.

Exit codes: 0 success, 1 at least one run failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigurationError
from .config import EXPERIMENTS, PARALLEL, SIMULATED, ExperimentConfig, load_config
from .experiments import run_experiment

log = logging.getLogger("seacgd.bench")


def _list_of(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _tau(text):
    if text in ("W-1", "2W"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("tau must be an integer, 'W-1' or '2W'") from None


def build_parser():
    p = argparse.ArgumentParser(prog="bench", description="Reproduce the SE-ACGD experiments at desk scale.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON experiment config (a previous summary.json also works)")
    p.add_argument("--dim", type=_list_of(int), help="comma-separated dimensions, e.g. 100,10000")
    p.add_argument("--workers", type=_list_of(int), help="comma-separated worker counts")
    p.add_argument("--tau", type=_tau, help="delay bound: integer, 'W-1' or '2W'")
    p.add_argument("--expected-delay", type=_list_of(float), help="comma-separated mean injected delays")
    p.add_argument("--seed", type=_list_of(int), help="comma-separated seeds")
    p.add_argument("--algorithms", type=_list_of(str), help="subset of SEACGD,SerialGD,SyncParallelPGD")
    p.add_argument("--mode", choices=(SIMULATED, PARALLEL))
    p.add_argument("--eps", type=float, help="target accuracy (default 0.1 for d<=1000, else 1)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="run cells in this many processes")
    p.add_argument("--allow-large-dims", action="store_true", help="permit dimensions above 10^6")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    overrides = {"dims": args.dim, "workers": args.workers, "tau": args.tau, "expected_delays": args.expected_delay,
                 "seeds": args.seed, "algorithms": args.algorithms, "mode": args.mode, "eps": args.eps,
                 "output_dir": args.out, "allow_large_dims": True if args.allow_large_dims else None}
    try:
        if args.config:
            cfg = load_config(args.config, args.experiment, **overrides)
        else:
            cfg = ExperimentConfig.with_defaults(args.experiment, **overrides)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    def progress(cell, row):
        if row.get("error"):
            log.warning("%s failed: %s", cell.run_id, row["error"])
        else:
            log.info("%-55s f=%.6g t*=%s", cell.run_id, row["final_f"], row["time_to_target"])

    try:
        report = run_experiment(cfg, jobs=args.jobs, progress=progress)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2
    log.info("summary: %s/summary.json", cfg.output_dir)
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
