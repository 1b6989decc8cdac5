"""Command line entry point: ``impulse-lsmc {simulate,solve,backtest,full}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import NumericalError, Run, read_distribution_csv, run_pipeline

log = logging.getLogger("impulse_lsmc")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="master seed")
    p.add_argument("--output-dir", metavar="PATH")
    p.add_argument("--threads", type=int)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impulse-lsmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="simulate reference-measure paths and write paths.csv")
    _common(p)
    p = sub.add_parser("solve", help="run the backward induction, write stopping_distribution.csv and value.json")
    _common(p)
    p.add_argument("--paths", metavar="CSV", help="reuse a paths.csv instead of simulating")
    p = sub.add_parser("backtest", help="backtest the optimal schedule against random baselines")
    _common(p)
    p.add_argument("--distribution", metavar="CSV",
                   help="stopping_distribution.csv to schedule from (default: in the output dir)")
    p = sub.add_parser("full", help="run every stage")
    _common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, seed=args.seed,
                          output_dir=args.output_dir, threads=args.threads)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "full":
            run = run_pipeline(cfg)
        else:
            run = Run(cfg)
            if args.command == "simulate":
                run.dump_bundle(run.simulate())
            elif args.command == "solve":
                bundle = run.load_bundle(args.paths) if args.paths else run.simulate()
                run.solve(bundle)
            else:
                src = Path(args.distribution) if args.distribution else run.out / "stopping_distribution.csv"
                run.backtest(read_distribution_csv(src, cfg.params.horizon))
            run.manifest()
    except (NumericalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name in run.files:
        print(run.out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
