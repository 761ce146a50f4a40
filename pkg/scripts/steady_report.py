#!/usr/bin/env python3
"""Constant-drive steady-state report for both dissipator placements:
density-matrix nullspace observables against the closed-form moment
fixed point."""
import argparse
import sys

from ottosim.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="6,50", help="truncation, e.g. 6,50")
    ap.add_argument("--method", default="nullspace",
                    choices=("nullspace", "propagate", "both"))
    args = ap.parse_args()
    rc = 0
    for model in ("local", "global"):
        rc = rc or cli_main(["steady", "--model", model,
                             "--dims", args.dims, "--method", args.method])
        print()
    return rc


if __name__ == "__main__":
    sys.exit(main())
