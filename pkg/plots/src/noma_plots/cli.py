"""noma-plot: render figures from noma-forge sweep CSVs."""

import argparse
import sys

from .render import KINDS, FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noma-plot", description="Render figures from noma-forge sweep CSVs"
    )
    parser.add_argument("--in", dest="input_csv", required=True, metavar="CSV")
    parser.add_argument("--out", dest="output_image", required=True, metavar="IMG")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--schemes", help="comma list restricting the plotted schemes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    schemes = tuple(s.strip() for s in args.schemes.split(",")) if args.schemes else ()
    try:
        spec = FigureSpec(args.input_csv, args.output_image, args.kind, schemes)
        out = render(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
