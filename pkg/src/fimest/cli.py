"""Command-line entry point.

    estimate run   --config exp.cfg [--snr 0,5,10] [--paths 3] [--trials 200]
                   [--seed 1] [--out results.csv] [--workers 2]
    estimate sweep {snr|array|morph} --config exp.cfg [same overrides]

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness
from .harness import ConfigError, ExperimentConfig

_SWEEPS = {
    "snr": harness.snr_vs_paths,
    "array": harness.array_size,
    "morph": harness.morph_range,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad CLI usage is a configuration error
        raise ConfigError(message)


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value experiment config file")
    parser.add_argument("--snr", help="comma-separated SNR list in dB (inf = noiseless)")
    parser.add_argument("--paths", type=int, help="number of propagation paths")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
    parser.add_argument("--seed", type=int, help="experiment seed")
    parser.add_argument("--out", help="per-trial CSV output path")
    parser.add_argument("--workers", type=int, help="parallel trial workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="estimate", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="sweep the configured SNR/morph lists")
    _add_common_options(run)
    sweep = sub.add_parser("sweep", help="run one of the preset sweeps")
    sweep.add_argument("kind", choices=sorted(_SWEEPS))
    _add_common_options(sweep)
    return parser


def _load(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.snr is not None:
        try:
            updates["snr_db_list"] = tuple(float(v) for v in args.snr.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --snr value: {exc}") from exc
    if args.paths is not None:
        updates["num_paths"] = args.paths
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_path"] = args.out
    if args.workers is not None:
        updates["workers"] = args.workers
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _emit(cfg: ExperimentConfig, records) -> None:
    harness.write_records_csv(cfg.output_path, records)
    agg_path = harness.aggregates_path(cfg.output_path)
    harness.write_aggregates_csv(agg_path, harness.aggregate_records(records))
    print(f"wrote {len(records)} trial rows to {cfg.output_path}")
    print(f"wrote aggregates to {agg_path}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _load(args)
        if args.command == "run":
            records = harness.run_experiment(cfg)
        else:
            records = _SWEEPS[args.kind](cfg)
        _emit(cfg, records)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
