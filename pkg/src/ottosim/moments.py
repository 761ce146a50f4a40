"""Closed moment dynamics of the engine and its analytic steady forms.

Seven coupled observables (HF occupancy, LF quadrature means, HF number
variance, number-quadrature covariances, LF occupancy) form an exactly
closed ODE system for this Hamiltonian: the nonlinearity is n_a-conditioned
displacement, so no higher cumulants feed back. The "semiclassical" tier is
the same system with both covariances pinned to zero, which is precisely
the factorized (mean-field) approximation.

Quadrature conventions: q = <b + b'>, p = i<b' - b>, so q = 2 Re<b> and
p = 2 Im<b>; the phase-plane coordinates used for limit-cycle geometry are
(q, p)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .errors import DomainError, PropagationError, RegimeError
from .integrate import plan_segments, plan_samples, steps_in
from .params import DriveSchedule, EngineParams
from .series import MOMENT_COLUMNS, TimeSeries

TIERS = ("quantum", "semiclassical")

_NONNEG_TOL = -1e-9


@dataclass(frozen=True)
class MomentVector:
    """One sample of the closed moment system."""

    t: float
    n_a: float
    q: float
    p: float
    var_na: float
    c_nq: float
    c_np: float
    n_b: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.to_array())):
            raise DomainError("non-finite moment vector")
        if self.n_a < _NONNEG_TOL:
            raise DomainError(f"n_a = {self.n_a} < 0")
        if self.n_b < _NONNEG_TOL:
            raise DomainError(f"n_b = {self.n_b} < 0")
        if self.var_na < _NONNEG_TOL:
            raise DomainError(f"var_na = {self.var_na} < 0")

    def to_array(self) -> np.ndarray:
        return np.array([self.n_a, self.q, self.p, self.var_na,
                         self.c_nq, self.c_np, self.n_b])

    @classmethod
    def from_array(cls, t: float, y) -> "MomentVector":
        return cls(t, *(float(v) for v in y))


@dataclass(frozen=True)
class DerivedRates:
    """Aggregate rates entering the moment system at a fixed gate value.

    A: total HF quantum injection rate, B: net HF decay rate, C: decay
    rate of the number-quadrature covariances; omega_sq_q and
    omega_sq_corr are the squared resonance denominators of the
    quadrature and covariance blocks.
    """

    A: float
    B: float
    C: float
    omega_sq_q: float
    omega_sq_corr: float


def derived_rates(params: EngineParams, s: float = 1.0) -> DerivedRates:
    r = params.bath_rates(s)
    return DerivedRates(
        A=r.A, B=r.B, C=r.C,
        omega_sq_q=params.omega_b ** 2 + 0.25 * r.kb_tot ** 2,
        omega_sq_corr=params.omega_b ** 2 + r.C ** 2,
    )


def _coef(params: EngineParams, s: float) -> np.ndarray:
    r = params.bath_rates(s)
    return np.array([r.A, r.B, r.C, r.kb_tot, r.kb_src, params.omega_b,
                     params.g, params.alpha, params.kappa_b])


def initial_moments(params: EngineParams, t: float = 0.0) -> MomentVector:
    """Both modes thermal at the cold occupancy, no displacement."""
    n0 = params.nbar_init
    return MomentVector(t=t, n_a=n0, q=0.0, p=0.0, var_na=n0 * (1.0 + n0),
                        c_nq=0.0, c_np=0.0, n_b=n0)


def moment_rhs(state, params: EngineParams, t: float = 0.0,
               tier: str = "quantum") -> np.ndarray:
    """Time derivative of the seven moments at time t."""
    if tier not in TIERS:
        raise DomainError(f"unknown tier {tier!r}; expected one of {TIERS}")
    y = state.to_array() if isinstance(state, MomentVector) else \
        np.asarray(state, dtype=float)
    if y.shape != (K.M_LEN,):
        raise DomainError(f"moment state must have length {K.M_LEN}")
    c = _coef(params, params.schedule.gate(t))
    dy = np.empty(K.M_LEN)
    K.moment_rhs_core(y, dy, c[0], c[1], c[2], c[3], c[4], c[5], c[6],
                      c[7], c[8], tier == "quantum")
    return dy


def dt_limit_moments(params: EngineParams) -> float:
    return 0.1 / max(1.0, params.rate_B(1.0))


def integrate_moments(init: MomentVector, params: EngineParams, t_end: float,
                      dt: float = 0.02, sample_every: int = 25,
                      schedule: DriveSchedule | None = None,
                      tier: str = "quantum") -> TimeSeries:
    """Fixed-step RK4 integration over [init.t, t_end], sampled like the
    master-equation propagator (every sample_every steps plus every gate
    edge), so matched grids line up sample-for-sample."""
    if tier not in TIERS:
        raise DomainError(f"unknown tier {tier!r}; expected one of {TIERS}")
    if not isinstance(sample_every, (int, np.integer)) or sample_every < 1:
        raise DomainError(f"sample_every must be a positive integer, "
                          f"got {sample_every!r}")
    lim = dt_limit_moments(params)
    if dt > lim * (1 + 1e-12):
        raise DomainError(f"dt = {dt} exceeds stability limit {lim:.4g}")
    sched = params.schedule if schedule is None else schedule
    quantum = tier == "quantum"
    y = init.to_array()
    if not quantum:
        y[4] = 0.0
        y[5] = 0.0
    segments = plan_segments(sched, init.t, t_end, dt)
    plan = plan_samples(segments, sample_every)
    times = plan.times
    rows = np.empty((times.shape[0], K.M_LEN))
    rows[0] = y
    bufs = [np.empty(K.M_LEN) for _ in range(5)]
    i = 1
    for seg in segments:
        coef = _coef(params, seg.gate)
        for nsteps in steps_in(seg, sample_every):
            K.rk4_moments(y, nsteps, seg.dt, coef, quantum, *bufs)
            if not np.all(np.isfinite(y)):
                raise PropagationError("moment integration diverged",
                                       t=times[i])
            rows[i] = y
            i += 1
    data = {name: rows[:, j] for j, name in enumerate(MOMENT_COLUMNS)}
    meta = {
        "tier": "quantum-moments" if quantum else "semiclassical",
        "model": params.model,
        "dt": dt,
        "dt_effective": [seg.dt for seg in segments],
        "sample_every": sample_every,
        "t0": init.t,
        "t_end": t_end,
        "params": params,
        "schedule": sched,
    }
    return TimeSeries(t=times, data=data, meta=meta)


# --------------------------------------------------------------------------
# analytic forms


def analytic_na_piecewise(t, params: EngineParams) -> np.ndarray:
    """Periodic-steady HF occupancy under the square-wave gate.

    Heating stroke relaxes from the cold value toward A_on/B_on at rate
    B_on; cooling stroke relaxes back at rate B_off. Scalar or array t;
    t < 0 raises DomainError.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("analytic occupancy is defined for t >= 0")
    period = params.schedule.period
    if period <= 0:
        raise DomainError("piecewise form needs a pulsed schedule")
    half = period * params.schedule.duty
    b_on = params.rate_B(1.0)
    b_off = params.rate_B(0.0)
    n_hi = params.rate_A(1.0) / b_on
    n_lo = params.rate_A(0.0) / b_off
    tau = np.mod(t_arr, period)
    heat = n_hi - (n_hi - n_lo) * np.exp(-b_on * tau)
    cool = n_lo + (n_hi - n_lo) * np.exp(-b_off * (tau - half))
    out = np.where(tau < half, heat, cool)
    return out if out.ndim else float(out)


def _check_resonant_schedule(params: EngineParams):
    sched = params.schedule
    if sched.period <= 0 or abs(sched.duty - 0.5) > 1e-9 or sched.phase != 0.0:
        raise RegimeError("closed waveform forms assume the resonant "
                          "50%-duty square-wave gate")
    if abs(sched.period * params.omega_b / (2.0 * math.pi) - 1.0) > 1e-6:
        raise RegimeError("closed waveform forms assume drive period "
                          "2*pi/omega_b (resonant forcing)")


def q_waveform_parameters(params: EngineParams):
    """(q0, Q, phi) of the steady LF response q(t) ~ q0 + Q sin(w_b t + phi).

    q0 is the response to the cycle-mean drive; Q is the resonantly
    amplified first harmonic of the square wave; phi is the phase lag of
    a drive switched on at t = 0.
    """
    _check_resonant_schedule(params)
    wb = params.omega_b
    g = params.g
    kb = params.kappa_b
    n_hi = params.rate_A(1.0) / params.rate_B(1.0)
    n_lo = params.rate_A(0.0) / params.rate_B(0.0)
    w2 = wb * wb + 0.25 * kb * kb
    q0 = (2.0 * wb * g / w2) * 0.5 * (n_hi + n_lo)
    amp = (4.0 / math.pi) * (2.0 * wb * g) * 0.5 * (n_hi - n_lo) \
        / math.sqrt(kb * kb * (wb * wb + kb * kb / 16.0))
    phi = -math.atan2(kb * wb, wb * wb - w2)
    return q0, amp, phi


def analytic_q_steady(t, params: EngineParams):
    """Steady LF mean-quadrature waveform q0 + Q sin(omega_b t + phi)."""
    q0, amp, phi = q_waveform_parameters(params)
    t_arr = np.asarray(t, dtype=float)
    out = q0 + amp * np.sin(params.omega_b * t_arr + phi)
    return out if out.ndim else float(out)


def limit_cycle_geometry(params: EngineParams):
    """(R, q_b0, p_b0): radius and center of the steady orbit in the
    (q, p)/sqrt(2) phase plane."""
    q0, amp, _ = q_waveform_parameters(params)
    s2 = math.sqrt(2.0)
    return amp / s2, q0 / s2, 0.0


def steady_state_analytic(params: EngineParams, s: float = 1.0) -> MomentVector:
    """Exact constant-gate fixed point of the moment system.

    The quadrature and covariance blocks are 2x2 linear systems solved
    exactly (equivalent to their closed forms); n_b follows from its
    stationarity condition.
    """
    r = params.bath_rates(s)
    if r.B <= 0 or r.kb_tot <= 0:
        raise DomainError("steady state needs positive net decay rates")
    wb = params.omega_b
    g = params.g
    alpha = params.alpha
    kb = params.kappa_b
    n_a = r.A / r.B
    var = r.A * (r.A + r.B) / (r.B * r.B)
    qp = np.linalg.solve(
        np.array([[0.5 * r.kb_tot, -wb], [wb, 0.5 * r.kb_tot]]),
        np.array([alpha * kb * n_a, 2.0 * g * n_a]))
    cc = np.linalg.solve(
        np.array([[r.C, -wb], [wb, r.C]]),
        np.array([alpha * kb * var, 2.0 * g * var]))
    q, p = float(qp[0]), float(qp[1])
    c_nq, c_np = float(cc[0]), float(cc[1])
    n_b = (r.kb_src + g * (c_np + n_a * p)
           + 0.5 * alpha * kb * (c_nq + n_a * q)) / r.kb_tot
    return MomentVector(t=0.0, n_a=n_a, q=q, p=p, var_na=var,
                        c_nq=c_nq, c_np=c_np, n_b=n_b)


def correlation_adiabatic(params: EngineParams, var_na: float,
                          t: float) -> tuple:
    """Adiabatic-elimination estimate of (c_nq, c_np) during heating.

    Valid when the covariance decay C is fast against omega_b; requires
    C/omega_b > 5 (RegimeError otherwise). c_np slaves instantaneously to
    the variance; c_nq builds up on the 1/C timescale.
    """
    c_rate = params.rate_C(1.0)
    if c_rate <= 5.0 * params.omega_b:
        raise RegimeError(
            f"adiabatic correlation estimate needs C/omega_b > 5, got "
            f"{c_rate / params.omega_b:.2f}")
    if t < 0:
        raise DomainError("adiabatic estimate defined for t >= 0")
    g = params.g
    ka = params.kappa_a
    c_np = (g / ka) * var_na
    c_nq = (g * params.omega_b / (2.0 * ka * ka)) * var_na \
        * (1.0 - math.exp(-c_rate * t))
    return c_nq, c_np
