#!/usr/bin/env python3
"""Photon statistics of the LF mode across hot-bath occupancies.

Runs the density-matrix tier to the steady cycle for each hot occupancy
and reports the second-order coherence g2(0) at the start (thermal,
g2 = 2) and at the cycle end, the number-quadrature correlations, and
the LF occupation distribution P(n). Expect a few minutes of runtime.
"""
import argparse
import os
import sys

import numpy as np

from ottosim import lindblad as lb
from ottosim.config import atomic_write_text
from ottosim.fock import ModeDim, partial_trace
from ottosim.params import EngineParams
from ottosim.thermo import SWEEP_NBAR_H, occupation_distribution, thermo_from_series


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/correlations",
                    help="output directory (default runs/correlations)")
    ap.add_argument("--nbar-h", default=",".join(str(v) for v in SWEEP_NBAR_H))
    ap.add_argument("--dims", default="13,50")
    ap.add_argument("--cycles", type=int, default=20)
    ap.add_argument("--dt", type=float, default=0.05)
    args = ap.parse_args()

    da, db = (int(v) for v in args.dims.split(","))
    dims = ModeDim(da, db)
    values = [float(v) for v in args.nbar_h.split(",") if v.strip()]
    dists = {}
    n_show = 8
    print(f"{'nbar_h':>8s} {'g2_initial':>11s} {'g2_steady':>10s} "
          f"{'c_nq':>10s} {'c_np':>10s} {'n_b':>8s}")
    for nh in values:
        params = EngineParams(nbar_h=nh)
        t_end = args.cycles * params.cycle_period
        rho0 = lb.initial_state(params, dims)
        series = lb.propagate(rho0, params, dims, t_end=t_end, dt=args.dt,
                              sample_every=250)
        th = thermo_from_series(series, params)
        rho_b = partial_trace(series.meta["rho_final"], dims, keep="LF")
        dists[nh] = occupation_distribution(rho_b)
        print(f"{nh:8.3f} {th.data['g2'][0]:11.4f} {th.data['g2'][-1]:10.4f} "
              f"{th.data['c_nq'][-1]:10.2e} {th.data['c_np'][-1]:10.2e} "
              f"{th.data['n_b'][-1]:8.4f}")

    print(f"\nP(n) over the first {n_show} levels:")
    for nh in values:
        head = " ".join(f"{p:8.4f}" for p in dists[nh][:n_show])
        print(f"  nbar_h={nh:<6g} {head}")

    os.makedirs(args.out, exist_ok=True)
    lines = ["n," + ",".join(f"nbar_h_{nh:g}" for nh in values)]
    for n in range(db):
        lines.append(",".join([str(n)] + [repr(float(dists[nh][n]))
                                          for nh in values]))
    path = os.path.join(args.out, "occupation_distributions.csv")
    atomic_write_text(path, "\n".join(lines) + "\n")
    print(f"\nwrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
