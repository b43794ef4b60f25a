"""render --figure N --in <csv...> --out <image>"""
from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render",
                                     description="Render simulation figures from pipeline CSVs")
    parser.add_argument("--figure", type=int, required=True, choices=(1, 2, 3, 4))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image (svg/pdf/png)")
    parser.add_argument("--L-eff", type=float, default=0.625,
                        help="multimode threshold guide for figure 2 (m)")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(figure_id=args.figure, inputs=args.inputs,
                          output=args.out, L_eff_m=args.L_eff)
        render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
