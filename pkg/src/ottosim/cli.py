"""Command-line surface: run scenarios, sweep parameters, report steady
states and cycle summaries, and exercise the oracle battery.

Exit codes: 0 success; 1 run or check failure (including convergence
failures recorded in a manifest); 2 configuration or usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from . import lindblad as lb
from . import moments as mo
from .config import (
    ScenarioConfig,
    apply_override,
    config_to_dict,
    default_config,
    load_config,
    validate_config,
)
from .errors import ConfigError, OttosimError
from .fock import ModeDim
from .orchestrate import run_scenario, run_sweep
from .validate import battery_passed, run_battery


def _add_common(parser: argparse.ArgumentParser, with_out: bool = True):
    parser.add_argument("--config", metavar="PATH",
                        help="TOML scenario file (defaults built in)")
    if with_out:
        parser.add_argument("--out", metavar="DIR", required=True,
                            help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, metavar="U64",
                        help="override the ensemble RNG seed")
    parser.add_argument("--tiers", metavar="LIST",
                        help="comma-separated subset of solver tiers")
    parser.add_argument("--dims", metavar="A,B",
                        help="Fock-space truncation, e.g. 6,50")
    parser.add_argument("--dt", type=float, metavar="FLOAT",
                        help="override the deterministic integrator step")
    parser.add_argument("--t-end", type=float, metavar="FLOAT",
                        help="override the propagation horizon")


def _load_with_overrides(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        cfg = apply_override(cfg, "seed", args.seed)
    if getattr(args, "tiers", None):
        tiers = [t.strip() for t in args.tiers.split(",") if t.strip()]
        cfg = apply_override(cfg, "tiers", tiers)
    if getattr(args, "dims", None):
        parts = args.dims.split(",")
        if len(parts) != 2:
            raise ConfigError("expected two integers 'a,b'", field="dims")
        try:
            da, db = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError("expected two integers 'a,b'",
                              field="dims") from None
        cfg = apply_override(cfg, "dims.a", da)
        cfg = apply_override(cfg, "dims.b", db)
    if getattr(args, "dt", None) is not None:
        cfg = apply_override(cfg, "integration.dt", args.dt)
    if getattr(args, "t_end", None) is not None:
        cfg = apply_override(cfg, "integration.t_end", args.t_end)
    validate_config(cfg)
    return cfg


def _parse_sweep_value(cfg: ScenarioConfig, path: str, token: str):
    """Convert a CLI token to the type the swept field currently holds."""
    node = config_to_dict(cfg)
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError("no such config field", field=path)
        node = node[part]
    if isinstance(node, bool):
        if token.lower() in ("true", "1", "yes"):
            return True
        if token.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {token!r}",
                          field=path)
    if isinstance(node, int):
        return int(token)
    if isinstance(node, float):
        return float(token)
    return token


def _cmd_run(args) -> int:
    cfg = _load_with_overrides(args)
    manifest = run_scenario(cfg, args.out)
    for tier, info in manifest["tiers"].items():
        status = "error: " + info["error"] if "error" in info else "ok"
        print(f"  {tier:18s} {status}")
    trunc = manifest["convergence"].get("truncation")
    if trunc:
        print(f"  truncation check   drift {trunc['nb_drift']:.3e} "
              f"({'ok' if trunc['passed'] else 'FAILED'})")
    print(f"status: {manifest['status']}  "
          f"(outputs in {os.path.abspath(args.out)})")
    return 0 if manifest["status"] == "ok" else 1


def _cmd_sweep(args) -> int:
    cfg = _load_with_overrides(args)
    tokens = [v.strip() for v in args.values.split(",") if v.strip()]
    values = [_parse_sweep_value(cfg, args.param, tok) for tok in tokens]
    doc = run_sweep(cfg, args.param, values, args.out)
    for row in doc["rows"]:
        bits = [f"{args.param}={row['value']}"]
        if "error" in row:
            bits.append("error: " + row["error"])
        else:
            for tier, val in sorted(row.get("p_max", {}).items()):
                bits.append(f"P_max[{tier}]={val:.3e}")
            for key in ("rel_qc", "rel_qsc"):
                if key in row:
                    bits.append(f"{key}={row[key]:+.3f}")
        print("  " + "  ".join(bits))
    print(f"status: {doc['status']}  "
          f"(outputs in {os.path.abspath(args.out)})")
    return 0 if doc["status"] == "ok" else 1


def _cmd_steady(args) -> int:
    cfg = _load_with_overrides(args)
    params = cfg.engine.constant_drive(True)
    if args.model:
        params = params.with_model(args.model)
    dims = cfg.dims
    rho, info = lb.steady_state_constant_drive(params, dims,
                                               method=args.method)
    obs = lb.observables(rho, dims)
    ref = mo.steady_state_analytic(params, s=1.0)
    print(f"constant-drive steady state  model={params.model}  "
          f"dims={dims.dim_a}x{dims.dim_b}  method={info['method']}")
    if "agreement" in info:
        print(f"  nullspace/march agreement: {info['agreement']:.3e}")
    print(f"  {'moment':8s} {'simulated':>14s} {'closed form':>14s} "
          f"{'rel diff':>10s}")
    worst = 0.0
    for key in ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b"):
        sim = obs[key]
        exact = getattr(ref, key)
        rel = abs(sim - exact) / max(abs(exact), 1e-6)
        worst = max(worst, rel)
        print(f"  {key:8s} {sim:14.8f} {exact:14.8f} {rel:10.2e}")
    print(f"  max relative difference: {worst:.2e}")
    return 0


def _cmd_validate(args) -> int:
    results = run_battery(fast=not args.full)
    for r in results:
        print(r.line())
    ok = battery_passed(results)
    n_fail = sum(1 for r in results if not r.ok)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 0 if ok else 1


def _cmd_report(args) -> int:
    path = os.path.join(args.dir, "summary.json")
    if not os.path.exists(path):
        print(f"no summary.json in {args.dir}", file=sys.stderr)
        return 2
    with open(path) as fh:
        doc = json.load(fh)
    known = doc.get("tiers", {})
    if args.tier and args.tier not in known:
        print(f"tier {args.tier!r} not in this run; available: "
              f"{', '.join(sorted(known))}", file=sys.stderr)
        return 2
    tiers = [args.tier] if args.tier else sorted(known)
    print(f"run {doc.get('config_hash', '?')[:12]}")
    for tier in tiers:
        cyc = doc.get("tiers", {}).get(tier)
        if cyc is None:
            print(f"\n{tier}: no cycle summary (constant drive or too "
                  f"short a horizon)")
            continue
        phys = (doc.get("physical") or {}).get(tier) or {}
        print(f"\n{tier}:")
        print(f"  period {cyc['period']:.4f}  strobe defect "
              f"{cyc['strobe_defect']:.2e}")
        print(f"  W = {cyc['W']:.4e}  Q_in = {cyc['Q_in']:.4e}  "
              f"q_in_flow = {cyc['q_in_flow']:.4e}")
        print(f"  eta = {cyc['eta']:.4f}  eta_otto = {cyc['eta_otto']:.4f}")
        print(f"  P_avg = {cyc['P_avg']:.4e}  P_max = {cyc['P_max']:.4e}")
        print(f"  omega_eff in [{cyc['omega_L']:.4f}, {cyc['omega_H']:.4f}]"
              f"  occupancy in [{cyc['n_L']:.4f}, {cyc['n_H']:.4f}]")
        print(f"  orbit fit R = {cyc['R_fit']:.4f} centred at "
              f"({cyc['center_fit'][0]:.4f}, {cyc['center_fit'][1]:.4f})")
        if phys:
            print(f"  physical: cycle {phys['cycle_time_ns']:.3f} ns, "
                  f"W {phys['W_joule']:.3e} J, "
                  f"P_avg {phys['P_avg_watt']:.3e} W, "
                  f"P_max {phys['P_max_watt']:.3e} W")
    ana = doc.get("analytic") or {}
    steady = ana.get("constant_drive_steady")
    wf = ana.get("waveform")
    wfm = ana.get("waveform_measured")
    if wf and wfm:
        print("\nsteady waveform vs closed form:")
        print(f"  mean q {wfm['mean_q']:.5f} vs {wf['q0']:.5f}, "
              f"first harmonic {wfm['amp_q']:.5f} vs {wf['Q']:.5f}")
    elif steady:
        print("\nconstant-drive closed forms available "
              "(see summary.json: analytic.constant_drive_steady)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ottosim",
        description="Two-resonator heat-engine simulator: density-matrix, "
                    "closed-moment, and stochastic-ensemble tiers with "
                    "cycle thermodynamics.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    _add_common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, metavar="PATH",
                         help="dotted config path, e.g. engine.nbar_h")
    p_sweep.add_argument("--values", required=True, metavar="LIST",
                         help="comma-separated values, e.g. 0.125,0.325")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_steady = sub.add_parser(
        "steady", help="constant-drive steady state vs closed forms")
    _add_common(p_steady, with_out=False)
    p_steady.add_argument("--model", choices=("local", "global"),
                          help="override the dissipator placement")
    p_steady.add_argument("--method", default="nullspace",
                          choices=("nullspace", "propagate", "both"))
    p_steady.set_defaults(fn=_cmd_steady)

    p_val = sub.add_parser("validate", help="run the oracle battery")
    p_val.add_argument("--full", action="store_true",
                       help="include the slow cross-checks")
    p_val.set_defaults(fn=_cmd_validate)

    p_rep = sub.add_parser(
        "report", help="print the cycle summary of an existing run")
    p_rep.add_argument("--dir", required=True, metavar="DIR",
                       help="run directory containing summary.json")
    p_rep.add_argument("--tier", metavar="TIER",
                       help="restrict the report to one tier")
    p_rep.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OttosimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
