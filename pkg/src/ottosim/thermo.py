"""Thermodynamic post-processing of engine time series.

Converts raw moments from any tier (master equation, moment ODEs,
classical ensemble) into effective-frequency cycle quantities: internal
energy, entropy, effective temperature, dissipative power, cold-bath
heat current, signal-meter correlation, photon statistics, per-cycle
work/heat/efficiency with branch labels, limit-cycle circle fits, and
maximum-power sweeps across hot occupancies.

Conventions. The HF frequency seen by the working substance is
omega_eff = omega_a - g q. Work per cycle is the signed shoelace area of
the closed (omega_eff, U_a/omega_eff) loop over the final drive period,
counterclockwise positive, which makes engine operation positive. Heat
intake sums positive energy increments while the hot bath is gated on; a
hot-dissipator energy-flow integral is reported alongside as a
cross-check. Energies are in units of omega_a = 1, powers in omega_a^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, DensityMatrixError, DomainError, StatisticsError
from .langevin import run_ensemble
from .moments import initial_moments, integrate_moments
from .params import DriveSchedule, EngineParams
from .series import TimeSeries

THERMO_COLUMNS = ("omega_eff", "U_a", "S_a", "T_eff", "P", "J_b", "Sigma", "g2")
QUANTUM_TIERS = ("quantum-moments", "quantum-lindblad")
MEAN_FIELD_TIERS = ("semiclassical", "classical")

# Hot-occupancy ceiling keeping omega_eff positive with margin over the
# whole cycle (the piston swing grows linearly with nbar_h).
NBAR_H_MAX = 3.25

SWEEP_NBAR_H = (0.125, 0.325, 0.525, 0.725)

_STROBE_COLUMNS = ("n_a", "q", "p", "n_b")
_SE_FOR = {"n_a": "se_n_a", "q": "se_q", "p": "se_p", "n_b": "se_n_b"}


def entropy_of_occupation(n):
    """Bosonic entropy (1+n)ln(1+n) - n ln n; 0 at n=0, NaN for n<0."""
    n = np.asarray(n, dtype=float)
    out = np.full(n.shape, np.nan)
    pos = n > 0
    npos = n[pos]
    out[pos] = (1.0 + npos) * np.log1p(npos) - npos * np.log(npos)
    out[n == 0] = 0.0
    return out if out.ndim else float(out)


def tier_naq(series: TimeSeries) -> np.ndarray:
    """Tier-appropriate <n_a q> series: full second moment for quantum
    tiers, factorized n_a*q for semiclassical and classical tiers."""
    tier = series.meta.get("tier")
    if tier in QUANTUM_TIERS:
        if "naq" in series.data:
            return series["naq"]
        return series["c_nq"] + series["n_a"] * series["q"]
    if tier in MEAN_FIELD_TIERS:
        return series["n_a"] * series["q"]
    raise DomainError(f"series has unknown tier {tier!r}")


def _g2_column(series: TimeSeries) -> np.ndarray:
    tier = series.meta.get("tier")
    if tier == "quantum-lindblad":
        n_b = series["n_b"]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n_b > 1e-9,
                            series["nb2_fact"] / np.where(n_b > 1e-9,
                                                          n_b * n_b, 1.0),
                            np.nan)
    if tier == "classical" and "g2" in series.data:
        return series["g2"]
    # moment tiers carry no fourth-order LF statistics
    return np.full(series.t.shape, np.nan)


def thermo_from_series(series: TimeSeries, params: EngineParams,
                       tier: str | None = None) -> TimeSeries:
    """New series with the thermodynamic columns appended.

    Adds omega_eff, U_a, S_a, T_eff, P, J_b, Sigma, g2 on top of the
    existing columns. Samples with n_a <= 0 get NaN entropy/temperature
    and are counted in meta["thermo_flags"] rather than raising.
    """
    if tier is not None and tier != series.meta.get("tier"):
        series = TimeSeries(t=series.t, data=series.data, aux=series.aux,
                            meta={**series.meta, "tier": tier})
    for col in ("n_a", "q", "p", "n_b"):
        if col not in series.data:
            raise DomainError(f"series lacks required column {col!r}")
    n_a = series["n_a"]
    q = series["q"]
    n_b = series["n_b"]
    naq = tier_naq(series)
    omega_eff = params.omega_a - params.g * q
    u_a = params.omega_a * n_a - params.g * naq
    s_a = entropy_of_occupation(n_a)
    t_eff = np.full(n_a.shape, np.nan)
    pos = n_a > 0
    t_eff[pos] = omega_eff[pos] / np.log1p(1.0 / n_a[pos])
    p_diss = params.omega_b * params.kappa_b * (n_b - params.nbar_b)
    j_b = p_diss + params.g * (0.5 * params.kappa_b) * naq
    sigma = -series["c_np"]
    data = dict(series.data)
    data.update({
        "omega_eff": omega_eff,
        "U_a": u_a,
        "S_a": s_a,
        "T_eff": t_eff,
        "P": p_diss,
        "J_b": j_b,
        "Sigma": sigma,
        "g2": _g2_column(series),
    })
    meta = dict(series.meta)
    meta["thermo_flags"] = int(np.count_nonzero(~pos))
    return TimeSeries(t=series.t, data=data, aux=series.aux, meta=meta)


def _populations(rho_b) -> np.ndarray:
    rho_b = np.asarray(rho_b)
    if rho_b.ndim == 2:
        if rho_b.shape[0] != rho_b.shape[1]:
            raise DensityMatrixError(f"matrix not square: {rho_b.shape}")
        diag = np.diagonal(rho_b)
        if np.max(np.abs(np.imag(diag))) > 1e-10:
            raise DensityMatrixError("diagonal has imaginary parts")
        return np.real(diag).astype(float)
    if rho_b.ndim == 1:
        return np.real(rho_b).astype(float)
    raise DensityMatrixError(f"expected matrix or vector, got shape {rho_b.shape}")


def occupation_distribution(rho_b) -> np.ndarray:
    """Number-basis probability vector P(n) of a reduced state.

    Accepts a density matrix or an already-extracted population vector;
    enforces nonnegativity (to -1e-10) and unit sum (to 1e-8).
    """
    pops = _populations(rho_b)
    if np.min(pops) < -1e-10:
        raise DensityMatrixError(f"negative population {np.min(pops):.3e}")
    total = float(np.sum(pops))
    if abs(total - 1.0) > 1e-8:
        raise DensityMatrixError(f"populations sum to {total!r}, not 1")
    return np.maximum(pops, 0.0)


def truncation_tail_mass(pops: np.ndarray, levels: int = 5) -> float:
    """Probability mass in the top `levels` Fock states (adequacy gauge)."""
    return float(np.sum(pops[-levels:]))


def g2_zero(rho_b) -> float:
    """Zero-delay second-order coherence <n(n-1)>/<n>^2 of a reduced state."""
    pops = _populations(rho_b)
    n = np.arange(pops.shape[0], dtype=float)
    mean_n = float(np.sum(n * pops))
    if mean_n <= 1e-9:
        raise StatisticsError("occupation too small for a defined g2")
    fact2 = float(np.sum(n * (n - 1.0) * pops))
    return fact2 / (mean_n * mean_n)


def fit_circle(x: np.ndarray, y: np.ndarray) -> tuple:
    """Algebraic least-squares circle fit; returns (x0, y0, R)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < 3:
        raise StatisticsError("circle fit needs at least 3 points")
    a = np.column_stack([x, y, np.ones_like(x)])
    b = -(x * x + y * y)
    (d, e, f), *_ = np.linalg.lstsq(a, b, rcond=None)
    x0 = -0.5 * d
    y0 = -0.5 * e
    r2 = x0 * x0 + y0 * y0 - f
    if r2 <= 0:
        raise StatisticsError("degenerate circle fit")
    return float(x0), float(y0), float(math.sqrt(r2))


@dataclass(frozen=True)
class CycleSummary:
    """Per-cycle thermodynamic digest over the final drive period."""
    period: float
    W: float
    Q_in: float
    eta: float
    eta_otto: float
    P_avg: float
    P_max: float
    n_H: float
    n_L: float
    omega_H: float
    omega_L: float
    R_fit: float
    center_fit: tuple
    w_rect: float
    q_in_flow: float
    strobe_defect: float
    t_start: float
    t_end: float
    branches: dict = field(repr=False)

    def branch_intervals(self, name: str, times: np.ndarray) -> list:
        """Contiguous (t0, t1) intervals where branch `name` is active."""
        mask = np.asarray(self.branches[name], dtype=bool)
        out = []
        i = 0
        while i < mask.shape[0]:
            if mask[i]:
                j = i
                while j + 1 < mask.shape[0] and mask[j + 1]:
                    j += 1
                out.append((float(times[i]), float(times[j])))
                i = j + 1
            else:
                i += 1
        return out

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "period", "W", "Q_in", "eta", "eta_otto", "P_avg", "P_max",
            "n_H", "n_L", "omega_H", "omega_L", "R_fit", "w_rect",
            "q_in_flow", "strobe_defect", "t_start", "t_end")}
        d["center_fit"] = list(self.center_fit)
        return d


def _window_columns(series: TimeSeries, t0: float, columns) -> tuple:
    """Samples on [t0, t_end] with an interpolated point at exactly t0."""
    t = series.t
    i0 = int(np.searchsorted(t, t0 - 1e-12))
    tw = t[i0:]
    cols = {c: series[c][i0:] for c in columns}
    if tw[0] > t0 + 1e-12:
        tw = np.concatenate([[t0], tw])
        for c in columns:
            first = np.interp(t0, t, series[c])
            cols[c] = np.concatenate([[first], cols[c]])
    return tw, cols


def shoelace_area(x: np.ndarray, y: np.ndarray) -> float:
    """Signed polygon area, counterclockwise positive; closes the loop."""
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def waveform_mean_amplitude(series: TimeSeries, period: float,
                            column: str = "q",
                            harmonic: int = 1) -> tuple:
    """(mean, harmonic amplitude) of a column over the final full period.

    The window is aligned to exactly one period ending at the last
    sample (interpolating the start point), so the constant and the
    chosen Fourier harmonic are measured without leakage.
    """
    t1 = float(series.t[-1])
    t0 = t1 - period
    if t0 < float(series.t[0]) - 1e-9:
        raise DomainError("series shorter than one period")
    tw, cols = _window_columns(series, t0, [column])
    x = cols[column]
    mean = float(np.trapezoid(x, tw)) / period
    w = 2.0 * math.pi * harmonic / period
    phase = np.exp(-1j * w * (tw - t0))
    amp = 2.0 * np.trapezoid(x * phase, tw) / period
    return mean, float(np.abs(amp))


def segment_cycle(series: TimeSeries, params: EngineParams,
                  schedule: DriveSchedule | None = None,
                  strobe_tol: float = 1e-3) -> CycleSummary:
    """Thermodynamic digest of the last full drive period.

    Verifies stroboscopic closure (values one period apart must agree to
    strobe_tol relative, loosened by 4 standard errors for ensemble
    series), then computes loop work, heat intake, efficiencies,
    extremal coordinates, the limit-cycle circle fit, and branch labels.

    Branch labels: samples with the gate on and |d omega_eff/dt| in the
    lowest quintile are the heating isochore (gate off: cooling
    isochore); of the remainder, samples with |dS_a/dt| in its lowest
    quintile are the adiabats, split by the sign of d omega_eff/dt; the
    rest are transitional and get no standard label.
    """
    sched = schedule if schedule is not None else series.meta.get("schedule")
    if sched is None or sched.period <= 0:
        raise DomainError("cycle analysis needs a periodic drive schedule")
    period = sched.period
    t1 = float(series.t[-1])
    t0c = t1 - period
    if t0c < float(series.t[0]) - 1e-9:
        raise DomainError("series shorter than one drive period")
    if "omega_eff" not in series.data:
        series = thermo_from_series(series, params)

    # stroboscopic closure check, column by column
    defects = []
    for col in _STROBE_COLUMNS:
        x = series[col]
        xw = x[series.t >= t0c - 1e-12]
        scale = max(float(np.max(np.abs(xw))), 1e-12)
        d = abs(float(x[-1]) - float(np.interp(t0c, series.t, x))) / scale
        tol = strobe_tol
        se_col = _SE_FOR[col]
        if se_col in series.data:
            tol += 4.0 * float(series[se_col][-1]) / scale
        if d > tol:
            raise ConvergenceError(
                f"stroboscopic defect {d:.2e} in {col!r} exceeds {tol:.2e}; "
                f"cycle not converged")
        defects.append(d)
    strobe = float(np.max(defects))

    need = ["n_a", "q", "p", "n_b", "omega_eff", "U_a", "S_a", "P"]
    tw, cols = _window_columns(series, t0c, need)
    omega = cols["omega_eff"]
    u_a = cols["U_a"]
    n_loop = u_a / omega

    w = shoelace_area(omega, n_loop)

    # heat intake: positive energy increments while the gate is on
    mid = 0.5 * (tw[:-1] + tw[1:])
    gate_mid = np.array([sched.gate(tm) for tm in mid])
    du = np.diff(u_a)
    q_in = float(np.sum(du[(gate_mid > 0) & (du > 0)]))

    # cross-check: energy flow through the gated hot channel
    naq_full = tier_naq(series)
    naq = np.interp(tw, series.t, naq_full)
    flow = params.omega_a * (params.nbar_h - cols["n_a"]) \
        - params.g * (params.nbar_h * cols["q"] - naq)
    seg = 0.5 * (flow[:-1] + flow[1:]) * np.diff(tw)
    q_in_flow = float(params.kappa_h * np.sum(seg * gate_mid))

    n_h = float(np.max(cols["n_a"]))
    n_l = float(np.min(cols["n_a"]))
    om_h = float(np.max(omega))
    om_l = float(np.min(omega))
    w_rect = (n_h - n_l) * (om_h - om_l)
    eta = w / q_in if q_in > 0 else math.nan
    eta_otto = 1.0 - om_l / om_h if om_h > 0 else math.nan

    try:
        x0, y0, r_fit = fit_circle(cols["q"] / math.sqrt(2.0),
                                   cols["p"] / math.sqrt(2.0))
    except StatisticsError:
        # point-like orbit (e.g. decoupled engine): zero radius at the mean
        x0 = float(np.mean(cols["q"])) / math.sqrt(2.0)
        y0 = float(np.mean(cols["p"])) / math.sqrt(2.0)
        r_fit = 0.0

    # branch labels
    dom = np.gradient(omega, tw)
    ds = np.gradient(cols["S_a"], tw)
    gate_s = np.array([sched.gate(tm) for tm in tw])
    thr_w = float(np.percentile(np.abs(dom), 20.0))
    stationary = np.abs(dom) <= thr_w
    heat_iso = stationary & (gate_s > 0)
    cool_iso = stationary & (gate_s == 0)
    rest = ~stationary
    adiabat = np.zeros_like(rest)
    # entropy-stationarity quintile taken per gate side so both adiabats
    # are populated (the two strokes have very different |dS/dt| floors)
    for side in (gate_s > 0, gate_s == 0):
        cand = rest & side
        if np.any(cand) and np.all(np.isfinite(ds[cand])):
            thr_s = float(np.percentile(np.abs(ds[cand]), 20.0))
            adiabat |= cand & (np.abs(ds) <= thr_s)
    expand = adiabat & (gate_s > 0)
    compress = adiabat & (gate_s == 0)
    transition = rest & ~adiabat
    branches = {
        "heating_isochore": heat_iso,
        "cooling_isochore": cool_iso,
        "expansion_adiabat": expand,
        "compression_adiabat": compress,
        "transition": transition,
        "times": tw,
    }

    return CycleSummary(
        period=period, W=w, Q_in=q_in, eta=eta, eta_otto=eta_otto,
        P_avg=w / period, P_max=float(np.max(cols["P"])),
        n_H=n_h, n_L=n_l, omega_H=om_h, omega_L=om_l,
        R_fit=r_fit, center_fit=(x0, y0), w_rect=w_rect,
        q_in_flow=q_in_flow, strobe_defect=strobe,
        t_start=t0c, t_end=t1, branches=branches)


def max_power_sweep(nbar_h_values, params: EngineParams, seed: int,
                    n_traj: int = 10000, steady_cycles: int = 20,
                    dt_moments: float = 0.02, dt_classical: float = 0.005,
                    strobe_tol: float = 1e-3) -> list:
    """Maximum dissipative power per tier across hot occupancies.

    For each nbar_h runs the quantum and semiclassical moment tiers and
    a classical ensemble to the periodic steady state, digests the last
    cycle, and tabulates P_max with the relative quantum-classical and
    quantum-semiclassical differences. The same seed is reused at every
    point (common random numbers) so trends across nbar_h are smooth.
    Returns a list of row dicts.
    """
    rows = []
    for nh in nbar_h_values:
        if not 0.0 <= nh < NBAR_H_MAX:
            raise DomainError(
                f"nbar_h = {nh} outside the engine regime [0, {NBAR_H_MAX})")
    for nh in nbar_h_values:
        p_h = replace(params, nbar_h=float(nh))
        t_end = steady_cycles * p_h.cycle_period
        summaries = {}
        for tier in ("quantum", "semiclassical"):
            ts = integrate_moments(initial_moments(p_h), p_h, t_end,
                                   dt=dt_moments, sample_every=125,
                                   tier=tier)
            summaries[tier] = segment_cycle(
                thermo_from_series(ts, p_h), p_h, strobe_tol=strobe_tol)
        ens = run_ensemble(p_h, t_end, dt_classical, n_traj, seed,
                           sample_every=500)
        ens_th = thermo_from_series(ens, p_h)
        summaries["classical"] = segment_cycle(ens_th, p_h,
                                               strobe_tol=strobe_tol)
        # pointwise standard error of P at its classical maximum
        tc = ens_th.t
        mask = tc >= summaries["classical"].t_start - 1e-12
        p_col = ens_th["P"][mask]
        se_nb = ens_th["se_n_b"][mask]
        k = int(np.argmax(p_col))
        se_p = params.omega_b * params.kappa_b * float(se_nb[k])
        p_q = summaries["quantum"].P_max
        p_c = summaries["classical"].P_max
        p_sc = summaries["semiclassical"].P_max
        rows.append({
            "nbar_h": float(nh),
            "P_max_quantum": p_q,
            "P_max_classical": p_c,
            "P_max_semiclassical": p_sc,
            "se_P_classical": se_p,
            "rel_qc": (p_q - p_c) / p_q,
            "rel_qsc": (p_q - p_sc) / p_q,
            "summaries": summaries,
        })
    return rows
