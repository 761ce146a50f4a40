"""Scenario execution: tier runs, serialized outputs, run manifests.

A scenario (one ScenarioConfig) runs its requested tiers, writes one
time-series CSV per tier in the fixed column order, digests the final
cycle into a summary JSON with analytic cross-checks and physical-unit
conversions, runs the Fock-truncation convergence check (repeat the
master-equation tier at dim_b+10 over a shortened horizon and require
< 0.5% drift in <n_b>), and emits a manifest tying outputs to the
config hash. Identical configs (same hash) give byte-identical CSVs:
deterministic integrators plus a counter-based RNG leave nothing to
scheduling, and runs execute sequentially for exactly that reason.

All files are written atomically (temp file + rename).
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import (ScenarioConfig, apply_override, atomic_write_text,
                     config_hash, config_to_dict, validate_config)
from .errors import ConvergenceError, DomainError, OttosimError
from .fock import ModeDim, partial_trace
from .langevin import run_ensemble
from .lindblad import initial_state, propagate
from .moments import (initial_moments, integrate_moments,
                      limit_cycle_geometry, q_waveform_parameters,
                      steady_state_analytic)
from .params import EngineParams
from .series import SE_COLUMNS, TimeSeries
from .thermo import (CycleSummary, g2_zero, occupation_distribution,
                     segment_cycle, thermo_from_series,
                     truncation_tail_mass, waveform_mean_amplitude)

CSV_COLUMNS = ("t", "n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b",
               "omega_eff", "U_a", "S_a", "T_eff", "P", "J_b", "Sigma",
               "g2")
CSV_CLASSICAL_COLUMNS = CSV_COLUMNS + SE_COLUMNS

# physical scale: nu_a = omega_a/2pi = 10 GHz
NU_A_HZ = 10.0e9
OMEGA_A_RAD_S = 2.0 * math.pi * NU_A_HZ
HBAR_J_S = 1.054571817e-34
KB_J_K = 1.380649e-23

TRUNCATION_DRIFT_TOL = 5e-3
TRUNCATION_EXTRA_B = 10


def csv_columns_for(tier: str) -> tuple:
    return CSV_CLASSICAL_COLUMNS if tier == "classical" else CSV_COLUMNS


def series_to_csv_text(series: TimeSeries, tier: str) -> str:
    """Render a thermo-augmented series in the contract column order."""
    cols = csv_columns_for(tier)
    for c in cols[1:]:
        if c not in series.data:
            raise DomainError(f"series lacks contract column {c!r}")
    arrays = [series.t] + [series[c] for c in cols[1:]]
    lines = [",".join(cols)]
    for i in range(series.t.shape[0]):
        lines.append(",".join(repr(float(a[i])) for a in arrays))
    return "\n".join(lines) + "\n"


def validate_csv_text(text: str, tier: str):
    """Schema gate run on every output before a run reports success."""
    lines = text.splitlines()
    if not lines:
        raise DomainError("empty CSV")
    header = tuple(lines[0].split(","))
    expect = csv_columns_for(tier)
    if header != expect:
        raise DomainError(
            f"CSV columns {header} do not match the contract {expect}")
    width = len(expect)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != width:
            raise DomainError(f"CSV line {i} has {len(parts)} fields, "
                              f"expected {width}")
        for p in parts:
            float(p)


def read_timeseries_csv(path: str, tier: str) -> TimeSeries:
    """Load a written tier CSV back into a TimeSeries."""
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    if rows.shape[1] != len(header):
        raise DomainError(f"{path}: width {rows.shape[1]} != header "
                          f"{len(header)}")
    data = {name: rows[:, j] for j, name in enumerate(header) if name != "t"}
    return TimeSeries(t=rows[:, 0], data=data, meta={"tier": tier,
                                                     "source": path})


def tier_filename(tier: str) -> str:
    return f"timeseries_{tier}.csv"


def _run_tier(tier: str, cfg: ScenarioConfig) -> tuple:
    """(thermo series, per-tier diagnostics) for one tier."""
    eng = cfg.engine
    it = cfg.integration
    extra = {}
    if tier == "quantum-lindblad":
        rho0 = initial_state(eng, cfg.dims)
        raw = propagate(rho0, eng, cfg.dims, it.t_end, dt=it.dt,
                        sample_every=it.sample_every)
        extra["trace_defect_max"] = float(np.max(np.abs(raw["trace_defect"])))
        extra["herm_defect_max"] = float(np.max(raw["herm_defect"]))
        rho_final = raw.meta["rho_final"]
        pops_b = occupation_distribution(
            partial_trace(rho_final, cfg.dims, keep="LF"))
        extra["tail_mass_b"] = truncation_tail_mass(pops_b)
        extra["g2_final"] = g2_zero(pops_b)
    elif tier in ("quantum-moments", "semiclassical"):
        kind = "quantum" if tier == "quantum-moments" else "semiclassical"
        raw = integrate_moments(initial_moments(eng), eng, it.t_end,
                                dt=it.dt, sample_every=it.sample_every,
                                tier=kind)
    elif tier == "classical":
        en = cfg.ensemble
        raw = run_ensemble(eng, it.t_end, en.dt, en.n_traj, cfg.seed,
                           sample_every=en.sample_every)
        extra["se_final"] = {c: float(raw[c][-1]) for c in SE_COLUMNS}
    else:
        raise DomainError(f"unknown tier {tier!r}")
    return thermo_from_series(raw, eng), extra


def _cycle_digest(series: TimeSeries, cfg: ScenarioConfig):
    """CycleSummary for the final period, or (None, reason)."""
    sched = cfg.engine.schedule
    if sched.period <= 0:
        return None, "constant drive: no cycle"
    if cfg.integration.t_end < 2.0 * sched.period:
        return None, "horizon shorter than two periods"
    try:
        return segment_cycle(series, cfg.engine), None
    except ConvergenceError as exc:
        return None, str(exc)


def _truncation_check(cfg: ScenarioConfig) -> dict:
    """Short-horizon rerun at dim_b + extra; reports the <n_b> drift."""
    eng = cfg.engine
    period = eng.schedule.period
    horizon = 2.0 * period if period > 0 else 200.0
    horizon = min(cfg.integration.t_end, horizon)
    out = {"dim_b": cfg.dims.dim_b,
           "dim_b_check": cfg.dims.dim_b + TRUNCATION_EXTRA_B,
           "horizon": horizon}
    it = cfg.integration
    series = []
    for db in (cfg.dims.dim_b, cfg.dims.dim_b + TRUNCATION_EXTRA_B):
        dims = ModeDim(cfg.dims.dim_a, db)
        rho0 = initial_state(eng, dims)
        series.append(propagate(rho0, eng, dims, horizon, dt=it.dt,
                                sample_every=it.sample_every))
    base, wide = series
    scale = max(float(np.max(np.abs(wide["n_b"]))), 1e-12)
    drift = float(np.max(np.abs(base["n_b"] - wide["n_b"]))) / scale
    out["nb_drift"] = drift
    out["passed"] = bool(drift < TRUNCATION_DRIFT_TOL)
    return out


def physical_units(summary: CycleSummary) -> dict:
    """Cycle numbers restated at the nu_a = 10 GHz operating point."""
    e_quantum = HBAR_J_S * OMEGA_A_RAD_S
    return {
        "nu_a_GHz": NU_A_HZ / 1e9,
        "cycle_time_ns": summary.period / OMEGA_A_RAD_S * 1e9,
        "W_joule": summary.W * e_quantum,
        "Q_in_joule": summary.Q_in * e_quantum,
        "P_avg_watt": summary.P_avg * e_quantum * OMEGA_A_RAD_S,
        "P_max_watt": summary.P_max * e_quantum * OMEGA_A_RAD_S,
    }


def _analytic_comparisons(cfg: ScenarioConfig, series_by_tier: dict) -> dict:
    """Closed-form cross-checks evaluated on the available tiers."""
    eng = cfg.engine
    out = {}
    ss = steady_state_analytic(eng, s=1.0)
    out["constant_drive_steady"] = {
        "n_a": ss.n_a, "q": ss.q, "p": ss.p, "var_na": ss.var_na,
        "c_nq": ss.c_nq, "c_np": ss.c_np, "n_b": ss.n_b}
    sched = eng.schedule
    if sched.period > 0 and sched.duty == 0.5 and sched.phase == 0.0:
        try:
            q0, amp, phi = q_waveform_parameters(eng)
            radius, qb0, pb0 = limit_cycle_geometry(eng)
            out["waveform"] = {"q0": q0, "Q": amp, "phi": phi,
                               "R": radius, "q_b0": qb0, "p_b0": pb0}
        except OttosimError:
            pass
        ref = None
        for tier in ("quantum-moments", "quantum-lindblad", "semiclassical",
                     "classical"):
            if tier in series_by_tier:
                ref = series_by_tier[tier]
                break
        if ref is not None and "waveform" in out \
                and float(ref.t[-1]) - float(ref.t[0]) >= sched.period:
            mean_q, amp_q = waveform_mean_amplitude(ref, sched.period, "q")
            out["waveform_measured"] = {"mean_q": mean_q, "amp_q": amp_q}
    return out


def run_scenario(cfg: ScenarioConfig, out_dir: str) -> dict:
    """Execute a validated scenario; write outputs; return the manifest.

    The manifest (also written to manifest.json) records the config and
    its hash, tool versions, per-tier diagnostics, cycle summaries,
    convergence checks, the output file list, and overall status:
    "ok", "convergence-failed", or "error".
    """
    validate_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc)
    manifest = {
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "versions": _tool_versions(),
        "created_utc": started.isoformat(timespec="seconds"),
        "tiers": {},
        "convergence": {},
        "outputs": [],
        "errors": [],
        "status": "ok",
    }
    series_by_tier = {}
    for tier in cfg.tiers:
        info = {}
        try:
            series, extra = _run_tier(tier, cfg)
            series_by_tier[tier] = series
            info.update(extra)
            info["samples"] = len(series)
            info["final"] = {c: float(series[c][-1])
                             for c in ("n_a", "q", "p", "n_b")}
            summary, reason = _cycle_digest(series, cfg)
            if summary is not None:
                info["cycle"] = summary.as_dict()
                info["cycle_physical"] = physical_units(summary)
                info["strobe_defect"] = summary.strobe_defect
            else:
                info["cycle"] = None
                info["cycle_skipped"] = reason
            if "timeseries" in cfg.outputs:
                text = series_to_csv_text(series, tier)
                validate_csv_text(text, tier)
                name = tier_filename(tier)
                atomic_write_text(os.path.join(out_dir, name), text)
                info["csv"] = name
                manifest["outputs"].append(name)
        except OttosimError as exc:
            info["error"] = f"{type(exc).__name__}: {exc}"
            manifest["errors"].append(f"{tier}: {info['error']}")
            manifest["status"] = "error"
        manifest["tiers"][tier] = info

    if "quantum-lindblad" in cfg.tiers \
            and "error" not in manifest["tiers"]["quantum-lindblad"]:
        trunc = _truncation_check(cfg)
        manifest["convergence"]["truncation"] = trunc
        if not trunc["passed"]:
            manifest["status"] = "convergence-failed"
            manifest["errors"].append(
                f"truncation: <n_b> drift {trunc['nb_drift']:.3e} at "
                f"dim_b+{TRUNCATION_EXTRA_B} exceeds {TRUNCATION_DRIFT_TOL}")

    if "summary" in cfg.outputs and series_by_tier:
        summary_doc = {
            "config_hash": manifest["config_hash"],
            "analytic": _analytic_comparisons(cfg, series_by_tier),
            "tiers": {t: manifest["tiers"][t].get("cycle")
                      for t in series_by_tier},
            "physical": {t: manifest["tiers"][t].get("cycle_physical")
                         for t in series_by_tier},
        }
        atomic_write_text(os.path.join(out_dir, "summary.json"),
                          json.dumps(summary_doc, indent=2, sort_keys=True,
                                     default=float) + "\n")
        manifest["outputs"].append("summary.json")

    finished = _dt.datetime.now(_dt.timezone.utc)
    manifest["elapsed_s"] = (finished - started).total_seconds()
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True,
                                 default=float) + "\n")
    return manifest


def run_sweep(cfg: ScenarioConfig, param_path: str, values,
              out_dir: str) -> dict:
    """One scenario per value of a dotted config field, plus aggregation.

    Each point runs in its own subdirectory. Failures are recorded per
    point and do not abort the sweep. The aggregated table carries the
    per-tier maximum dissipative power and the relative differences of
    the classical and semiclassical tiers against the quantum reference
    (quantum-moments preferred, else quantum-lindblad).
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    statuses = []
    for i, value in enumerate(values):
        tag = f"point_{i:02d}"
        row = {"index": i, "param": param_path, "value": value}
        try:
            sub = apply_override(cfg, param_path, value)
            sub_dir = os.path.join(out_dir, tag)
            man = run_scenario(sub, sub_dir)
            statuses.append(man["status"])
            row["status"] = man["status"]
            p_max = {}
            for tier, info in man["tiers"].items():
                cyc = info.get("cycle")
                if cyc is not None:
                    p_max[tier] = cyc["P_max"]
            row["p_max"] = p_max
            ref = p_max.get("quantum-moments", p_max.get("quantum-lindblad"))
            if ref:
                if "classical" in p_max:
                    row["rel_qc"] = (ref - p_max["classical"]) / ref
                if "semiclassical" in p_max:
                    row["rel_qsc"] = (ref - p_max["semiclassical"]) / ref
        except OttosimError as exc:
            row["status"] = "error"
            row["error"] = f"{type(exc).__name__}: {exc}"
            statuses.append("error")
        rows.append(row)

    tiers = sorted({t for r in rows for t in r.get("p_max", {})})
    header = ["value"] + [f"P_max_{t}" for t in tiers] \
        + ["rel_qc", "rel_qsc", "status"]
    lines = [",".join(header)]
    for r in rows:
        cells = [repr(float(r["value"]))]
        for t in tiers:
            v = r.get("p_max", {}).get(t)
            cells.append("" if v is None else repr(float(v)))
        for k in ("rel_qc", "rel_qsc"):
            v = r.get(k)
            cells.append("" if v is None else repr(float(v)))
        cells.append(r["status"])
        lines.append(",".join(cells))
    atomic_write_text(os.path.join(out_dir, "sweep_summary.csv"),
                      "\n".join(lines) + "\n")

    doc = {
        "param": param_path,
        "values": [float(v) if isinstance(v, (int, float)) else v
                   for v in values],
        "base_config_hash": config_hash(cfg),
        "rows": rows,
        "status": "ok" if all(s == "ok" for s in statuses) else "partial",
    }
    atomic_write_text(os.path.join(out_dir, "sweep_manifest.json"),
                      json.dumps(doc, indent=2, sort_keys=True,
                                 default=float) + "\n")
    return doc


def _tool_versions() -> dict:
    import platform

    import numba
    import scipy
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }
