"""Run every experiment spec under scripts/specs and print per-cell medians.

Usage: python scripts/run_sweeps.py [--jobs N] [--only NAME ...]
"""
import argparse
import sys
from pathlib import Path

from dpreg import cli

SPEC_DIR = Path(__file__).resolve().parent / "specs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--only", nargs="*", help="spec file stems to run (default: all)")
    parser.add_argument("--results", default="results")
    args = parser.parse_args()

    Path(args.results).mkdir(parents=True, exist_ok=True)
    specs = sorted(SPEC_DIR.glob("*.json"))
    if args.only:
        specs = [p for p in specs if p.stem in args.only]
    for path in specs:
        out = Path(args.results) / f"{path.stem}.csv"
        print(f"== {path.stem}", flush=True)
        code = cli.main(["sweep", "--spec", str(path), "--out", str(out), "--jobs", str(args.jobs)])
        if code:
            return code
        cli.main(["evaluate", "--data", str(out), "--out", str(out.with_suffix(".summary.csv"))])
        print(out.with_suffix(".summary.csv").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
