"""plots <runs-dir> [--linear] [--out <dir>]

Exit codes: 0 success, 1 usage/missing input, 2 malformed CSV.
"""

import argparse
import sys

from .render import MalformedCsv, PlotSpec, render


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser():
    parser = _Parser(prog="plots", description=__doc__)
    parser.add_argument("runs_dir", help="experiment runs directory")
    parser.add_argument("--linear", action="store_true",
                        help="linear y axis (default: log scale)")
    parser.add_argument("--out", default=".", help="output directory")
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        spec = PlotSpec(runs_dir=args.runs_dir, out_dir=args.out,
                        log_scale=not args.linear)
        for path in render(spec):
            print(f"wrote {path}")
        return 0
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except MalformedCsv as err:
        print(f"malformed input: {err}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
