#!/usr/bin/env python3
"""Run the baseline scenario: all four solver tiers at the default
operating point, writing time-series CSVs, a cycle summary, and a run
manifest into the output directory."""
import argparse
import sys

from ottosim.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/baseline",
                    help="output directory (default runs/baseline)")
    ap.add_argument("--config", default=None,
                    help="optional TOML scenario file")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    argv = ["run", "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
