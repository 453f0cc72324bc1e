"""Command line: mclnn-render --kind <kind> --in <csv...> --out <png>.

Exit codes: 0 success, 2 bad arguments or schema violation, 4 I/O error.
"""

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .schemas import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mclnn-render",
        description="Render figures from mclnn CSV outputs (pure file-in, "
                    "file-out).")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--label", action="append", default=[],
                        help="series label per input (repeatable)")
    parser.add_argument("--raw", action="store_true",
                        help="potential-curve: also draw the uncorrected "
                             "learned curve")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(inputs=args.inputs, kind=args.kind, output=args.out,
                          show_raw_curve=args.raw, labels=args.label)
        path = render(spec)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    except (ValueError,) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 4
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
