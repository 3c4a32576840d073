"""Command-line entry point.

    plotkit --in <sweep.csv> --kind snr_paths|antennas|morph --out <figure.png>
            [--metric nmse_A|nmse_B|nmse_channel]

Exit codes: 0 success, 1 bad input (schema, empty data, arguments),
2 unexpected failure.
"""

from __future__ import annotations

import argparse
import sys

from .dataset import EmptyDatasetError, SchemaError
from .render import FIGURE_KINDS, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plotkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--in", dest="input", required=True,
                        help="per-trial sweep CSV from the estimation harness")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image (png/svg)")
    parser.add_argument("--metric", default="nmse_A",
                        choices=("nmse_A", "nmse_B", "nmse_channel"))
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        series = render(args.input, args.kind, args.out, metric=args.metric)
        print(f"wrote {args.out} ({len(series)} curves)")
        return 0
    except (SchemaError, EmptyDatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
