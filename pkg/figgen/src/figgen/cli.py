"""Command-line entry: ``figgen <kind> <csv...> -o <img>``."""

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FiggenError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figgen",
        description="render figures from cclab trace CSVs")
    parser.add_argument("kind", choices=KINDS, help="figure type")
    parser.add_argument("csv", nargs="+", type=Path,
                        help="trace.csv files, plotted in the order given")
    parser.add_argument("-o", "--output", required=True, type=Path,
                        help="output image path (format from the extension)")
    parser.add_argument("--warmup-us", type=int, default=0,
                        help="drop samples at or before this time")
    parser.add_argument("--bucket-us", type=int, default=100_000,
                        help="rate bucket width for timeseries_rate")
    parser.add_argument("--mss-bytes", type=int, default=1500,
                        help="segment size for rate reconstruction "
                             "(traces do not carry it)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.csv),
                          output=args.output, warmup_us=args.warmup_us,
                          bucket_us=args.bucket_us, mss_bytes=args.mss_bytes)
        path = render(spec)
    except FiggenError as exc:
        print(f"figgen: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"figgen: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
