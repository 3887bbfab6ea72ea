"""Command line interface: render figures from run log CSVs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tiltship-plot", description="Render figures from tiltship run logs"
    )
    parser.add_argument("log", help="run log CSV")
    parser.add_argument(
        "--kind", default="all", choices=FIGURE_KINDS + ("all",),
        help="figure kind (default: all)",
    )
    parser.add_argument("--out", help="output image path (or directory for --kind all)")
    args = parser.parse_args(argv)

    log_path = Path(args.log)
    kinds = FIGURE_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        if args.kind == "all":
            out_dir = Path(args.out) if args.out else log_path.parent
            out = out_dir / f"{log_path.stem}_{kind}.png"
        else:
            out = Path(args.out) if args.out else log_path.with_name(
                f"{log_path.stem}_{kind}.png"
            )
        path = render(FigureSpec(log_path, kind, out))
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
