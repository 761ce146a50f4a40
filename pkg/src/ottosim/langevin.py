"""Classical tier: stochastic quadrature trajectories of both modes.

Each mode is a complex amplitude alpha = (X + iY)/sqrt(2) driven by white
thermal noise; the HF mode sees the gated hot bath plus the static cold
bath, the LF mode its own cold bath, and the coupling enters as a
number-conditioned force. Euler-Maruyama with simultaneous update from
the pre-step state; per-step noise std sqrt(kappa nbar dt) per quadrature
component. Hot-lane draws are consumed even while the gate is off so the
noise stream (and thus any single trajectory) is independent of gating.
The explicit update inflates mode energies by a relative O(omega^2 dt /
kappa_tot) per mode, so choose dt well below kappa_tot / omega^2 when
unbiased occupations matter (for the HF mode at defaults: dt << 0.2).

Reported classical observables: n = <|alpha|^2>, q = sqrt2 <X_b>,
p = sqrt2 <Y_b>, covariance estimators matching the quantum definitions
(c_nq = cov(n_a, sqrt2 X_b), c_np = cov(n_a, sqrt2 Y_b)), the classical
second-order coherence <n_b^2>/<n_b>^2, and standard errors of the four
first moments. All randomness is a pure function of
(seed, trajectory, step, lane) (see kernels: "splitmix64-invnorm-v1"),
so runs are exactly reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels as K
from .errors import DomainError, PropagationError, StatisticsError
from .integrate import plan_segments, plan_samples, steps_in
from .params import DriveSchedule, EngineParams
from .series import TimeSeries

RNG_ID = "splitmix64-invnorm-v1"


def _noise_rates(params: EngineParams):
    """(damping kappa_a_static, hot var rate, static a var rate, b var rate,
    b half-damping) entering the step tables."""
    ka = params.kappa_a
    va = params.kappa_a * params.nbar_a
    vb = params.kappa_b * params.nbar_b
    kb = params.kappa_b
    if params.include_background:
        ka += params.kappa_0a
        va += params.kappa_0a * params.nbar_0a
        vb += params.kappa_0b * params.nbar_0b
        kb += params.kappa_0b
    vh = params.kappa_h * params.nbar_h
    return ka, vh, va, vb, 0.5 * kb


def _step_tables(params: EngineParams, segments):
    nsteps = sum(seg.nsteps for seg in segments)
    dt = np.empty(nsteps)
    kpa = np.empty(nsteps)
    stdh = np.empty(nsteps)
    stda = np.empty(nsteps)
    stdb = np.empty(nsteps)
    ka, vh, va, vb, _ = _noise_rates(params)
    i = 0
    for seg in segments:
        j = i + seg.nsteps
        dt[i:j] = seg.dt
        kpa[i:j] = 0.5 * (ka + params.kappa_h * seg.gate)
        stdh[i:j] = math.sqrt(vh * seg.gate * seg.dt)
        stda[i:j] = math.sqrt(va * seg.dt)
        stdb[i:j] = math.sqrt(vb * seg.dt)
        i = j
    return dt, kpa, stdh, stda, stdb


def _sample_step_indices(segments, sample_every):
    marks = [0]
    base = 0
    for seg in segments:
        for n in steps_in(seg, sample_every):
            base += n
            marks.append(base)
    return np.asarray(marks, dtype=np.int64)


def langevin_step(state, params: EngineParams, s: float, dt: float, noise):
    """Reference single Euler-Maruyama step (mirrors the compiled kernel).

    state = (X_a, Y_a, X_b, Y_b); noise = six unit normals in lane order
    (hot_x, hot_y, static_x, static_y, b_x, b_y). Returns the new state.
    """
    xa, ya, xb, yb = (float(v) for v in state)
    n1, n2, n3, n4, n5, n6 = (float(v) for v in noise)
    ka, vh, va, vb, kb_half = _noise_rates(params)
    kpa = 0.5 * (ka + params.kappa_h * s)
    sh = math.sqrt(vh * s * dt)
    sa = math.sqrt(va * dt)
    sb = math.sqrt(vb * dt)
    gs2 = params.g * math.sqrt(2.0)
    gh = params.g / math.sqrt(2.0)
    w = params.omega_a - gs2 * xb
    dxa = (w * ya - kpa * xa) * dt + sh * n1 + sa * n3
    dya = (-w * xa - kpa * ya) * dt + sh * n2 + sa * n4
    dxb = (params.omega_b * yb - kb_half * xb) * dt + sb * n5
    dyb = (-params.omega_b * xb - kb_half * yb
           + gh * (xa * xa + ya * ya)) * dt + sb * n6
    return np.array([xa + dxa, ya + dya, xb + dxb, yb + dyb])


def single_trajectory(params: EngineParams, t_end: float, dt: float,
                      seed: int, traj: int = 0,
                      schedule: DriveSchedule | None = None,
                      t0: float = 0.0) -> tuple:
    """(times, states) for one trajectory; states has shape (n+1, 4)."""
    sched = params.schedule if schedule is None else schedule
    segments = plan_segments(sched, t0, t_end, dt)
    tab = _step_tables(params, segments)
    nsteps = tab[0].shape[0]
    out = np.empty((nsteps + 1, 4))
    _, _, _, _, kb_half = _noise_rates(params)
    K.langevin_single(np.uint64(seed), traj, math.sqrt(params.nbar_init),
                      *tab, params.omega_a, params.omega_b, params.g,
                      kb_half, out)
    times = np.concatenate([[t0], t0 + np.cumsum(tab[0])])
    return times, out


def ensemble_statistics(acc: np.ndarray, n_traj: int) -> dict:
    """Derived classical columns from the raw accumulator sums."""
    if n_traj < 2:
        raise StatisticsError("ensemble statistics need n_traj >= 2")
    m = acc / float(n_traj)
    s2 = math.sqrt(2.0)
    xb = m[:, K.ACC_XB]
    yb = m[:, K.ACC_YB]
    n_a = m[:, K.ACC_NA]
    n_b = m[:, K.ACC_NB]
    var_na = m[:, K.ACC_NA2] - n_a * n_a
    var_nb = m[:, K.ACC_NB2] - n_b * n_b
    var_xb = m[:, K.ACC_XB2] - xb * xb
    var_yb = m[:, K.ACC_YB2] - yb * yb
    rt = math.sqrt(n_traj)
    with np.errstate(invalid="ignore", divide="ignore"):
        g2 = np.where(n_b > 1e-9, m[:, K.ACC_NB2] / np.where(
            n_b > 1e-9, n_b * n_b, 1.0), np.nan)
    return {
        "n_a": n_a,
        "q": s2 * xb,
        "p": s2 * yb,
        "var_na": var_na,
        "c_nq": s2 * (m[:, K.ACC_NAXB] - n_a * xb),
        "c_np": s2 * (m[:, K.ACC_NAYB] - n_a * yb),
        "n_b": n_b,
        "cov_nanb": m[:, K.ACC_NANB] - n_a * n_b,
        "cov_qp": 2.0 * (m[:, K.ACC_XBYB] - xb * yb),
        "g2": g2,
        "se_n_a": np.sqrt(np.maximum(var_na, 0.0)) / rt,
        "se_q": s2 * np.sqrt(np.maximum(var_xb, 0.0)) / rt,
        "se_p": s2 * np.sqrt(np.maximum(var_yb, 0.0)) / rt,
        "se_n_b": np.sqrt(np.maximum(var_nb, 0.0)) / rt,
    }


def run_ensemble(params: EngineParams, t_end: float, dt: float,
                 n_traj: int, seed: int, sample_every: int = 500,
                 schedule: DriveSchedule | None = None,
                 t0: float = 0.0) -> TimeSeries:
    """Ensemble means, covariances, and standard errors on the shared
    sampling grid (every sample_every steps plus gate edges)."""
    if n_traj < 2:
        raise DomainError(f"n_traj must be >= 2, got {n_traj}")
    if not isinstance(sample_every, (int, np.integer)) or sample_every < 1:
        raise DomainError(f"sample_every must be a positive integer, "
                          f"got {sample_every!r}")
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    sched = params.schedule if schedule is None else schedule
    segments = plan_segments(sched, t0, t_end, dt)
    plan = plan_samples(segments, sample_every)
    tab = _step_tables(params, segments)
    marks = _sample_step_indices(segments, sample_every)
    if marks.shape[0] != plan.times.shape[0]:
        raise PropagationError("sample plan inconsistent with step tables")
    acc = np.zeros((marks.shape[0], K.ACC_LEN))
    _, _, _, _, kb_half = _noise_rates(params)
    K.langevin_ensemble(np.uint64(seed), n_traj, 0,
                        math.sqrt(params.nbar_init), *tab, marks,
                        params.omega_a, params.omega_b, params.g, kb_half,
                        acc)
    if not np.all(np.isfinite(acc)):
        raise PropagationError("ensemble accumulation produced non-finite "
                               "sums (unstable dt?)")
    data = ensemble_statistics(acc, n_traj)
    meta = {
        "tier": "classical",
        "model": params.model,
        "dt": dt,
        "dt_effective": [seg.dt for seg in segments],
        "sample_every": sample_every,
        "t0": t0,
        "t_end": t_end,
        "params": params,
        "schedule": sched,
        "n_traj": n_traj,
        "seed": int(seed),
        "rng": RNG_ID,
    }
    return TimeSeries(t=plan.times, data=data, meta=meta)


def classical_correlation(series: TimeSeries) -> np.ndarray:
    """Signal-meter correlation estimator -cov(n_a, p) of an ensemble run."""
    if "c_np" not in series.data:
        raise StatisticsError("series lacks the classical covariance columns")
    return -series["c_np"]
