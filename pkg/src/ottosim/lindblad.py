"""Master-equation tier: fixed-step propagation of the full density matrix.

The generator conserves the HF coherence offset k = ma - na, so the
propagator only touches the sectors populated by the initial state; a
thermal start reduces the work to the k = 0 block. The drive gate is
piecewise constant and the integrator restarts on every edge, so each
constant-gate piece is integrated with plain RK4 at a snapped uniform
step (see integrate.plan_segments).
"""

from __future__ import annotations

import numpy as np

from . import kernels as K
from .errors import ConvergenceError, DomainError, PropagationError, RegimeError
from .fock import (
    HERMITICITY_TOL,
    TRACE_TOL,
    ModeDim,
    check_density_matrix,
    expectation,
    min_eigenvalue,
    thermal_product,
)
from .integrate import plan_segments, plan_samples, steps_in
from .params import DriveSchedule, EngineParams
from .series import LINDBLAD_EXTRA, MOMENT_COLUMNS, TimeSeries
from .superop import build_hamiltonian, steady_nullspace

__all__ = [
    "build_hamiltonian",
    "initial_state",
    "apply_liouvillian",
    "dt_limit",
    "propagate",
    "steady_state_constant_drive",
]


def dt_limit(params: EngineParams) -> float:
    """Largest admissible step: 0.1 over the fastest rate in the model."""
    kap = params.kappa_a + params.kappa_h
    if params.include_background:
        kap += params.kappa_0a
    return 0.1 / max(params.omega_a, kap)


def initial_state(params: EngineParams, dims: ModeDim,
                  nbar: float | None = None) -> np.ndarray:
    """Thermal product state at the cold occupancy (both modes)."""
    n0 = params.nbar_init if nbar is None else nbar
    return thermal_product(dims, n0, n0)


def _tables(dims: ModeDim):
    sq = K.sqrt_table(max(dims.dim_a, dims.dim_b))
    return sq, K.ff_table(dims.dim_a), K.ff_table(dims.dim_b)


def apply_liouvillian(rho: np.ndarray, params: EngineParams, dims: ModeDim,
                      t: float = 0.0, gate: float | None = None) -> np.ndarray:
    """Right-hand side L[rho] at time t (or at an explicit gate value)."""
    s = params.schedule.gate(t) if gate is None else gate
    n = dims.dim
    if rho.shape != (n, n):
        raise DomainError(f"rho shape {rho.shape} does not match dims {n}")
    rho4 = np.ascontiguousarray(rho, dtype=complex).reshape(
        dims.dim_a, dims.dim_b, dims.dim_a, dims.dim_b)
    out = np.zeros_like(rho4)
    sq, fa, fb = _tables(dims)
    K.lindblad_rhs(rho4, out, K.all_pairs(dims.dim_a), sq, fa, fb,
                   K.coeff_vector(params, s))
    return out.reshape(n, n)


def observables(rho: np.ndarray, dims: ModeDim) -> dict:
    """Moment dictionary of a density matrix (same fields as a sample)."""
    n = dims.dim
    if rho.shape != (n, n):
        raise DomainError(f"rho shape {rho.shape} does not match dims {n}")
    rho4 = np.ascontiguousarray(rho, dtype=complex).reshape(
        dims.dim_a, dims.dim_b, dims.dim_a, dims.dim_b)
    sq, _, _ = _tables(dims)
    row = np.empty(K.OBS_LEN)
    K.extract_obs(rho4, sq, row)
    return {
        "n_a": row[K.OBS_NA], "q": row[K.OBS_Q], "p": row[K.OBS_P],
        "var_na": row[K.OBS_VAR], "c_nq": row[K.OBS_CNQ],
        "c_np": row[K.OBS_CNP], "n_b": row[K.OBS_NB],
        "naq": row[K.OBS_NAQ], "nap": row[K.OBS_NAP],
        "nb2_fact": row[K.OBS_G2NUM],
        "trace_defect": abs(complex(row[K.OBS_TR_RE] - 1.0,
                                    row[K.OBS_TR_IM])),
        "herm_defect": K.hermiticity_defect4(rho4),
    }


def _check_sample(row, t, dims):
    if not np.all(np.isfinite(row)):
        raise PropagationError("non-finite density matrix", t=t)
    tr_def = abs(complex(row[K.OBS_TR_RE] - 1.0, row[K.OBS_TR_IM]))
    if tr_def > TRACE_TOL:
        raise PropagationError(f"trace defect {tr_def:.3e}", t=t)


def propagate(rho0: np.ndarray, params: EngineParams, dims: ModeDim,
              t_end: float, dt: float = 0.02, sample_every: int = 25,
              schedule: DriveSchedule | None = None, observables=None,
              check_positivity: bool = False, t0: float = 0.0) -> TimeSeries:
    """Propagate rho0 over [t0, t_end], sampling every `sample_every` steps.

    Emits the seven moment columns plus the full second moments <n_a q>,
    <n_a p>, the factorial moment <b'b'bb>, per-sample trace/hermiticity
    defects, and Fock populations of both modes (aux arrays). Extra
    operators can be passed as `observables`: a list of matrices or
    (name, matrix) pairs evaluated at every sample.

    Raises PropagationError (with the failure time) if the trace or
    hermiticity defect leaves tolerance or the state goes non-finite, and
    RegimeError if g|<q>| reaches omega_a, where the effective-frequency
    picture breaks down.
    """
    if not isinstance(sample_every, (int, np.integer)) or sample_every < 1:
        raise DomainError(f"sample_every must be a positive integer, "
                          f"got {sample_every!r}")
    lim = dt_limit(params)
    if dt > lim * (1 + 1e-12):
        raise DomainError(f"dt = {dt} exceeds stability limit {lim:.4g}")
    sched = params.schedule if schedule is None else schedule
    check_density_matrix(rho0, check_positivity=True, where="rho0")
    da, db = dims.dim_a, dims.dim_b
    n = dims.dim
    if rho0.shape != (n, n):
        raise DomainError(f"rho0 shape {rho0.shape} does not match dims {n}")
    rho4 = np.array(rho0, dtype=complex).reshape(da, db, da, db)
    pairs = K.active_pairs(rho4)
    sq, fa, fb = _tables(dims)
    bufs = [np.zeros_like(rho4) for _ in range(5)]

    segments = plan_segments(sched, t0, t_end, dt)
    plan = plan_samples(segments, sample_every)
    times = plan.times
    n_samp = times.shape[0]

    named_obs = []
    if observables:
        for i, ob in enumerate(observables):
            if isinstance(ob, tuple):
                named_obs.append(ob)
            else:
                named_obs.append((f"obs_{i}", ob))
    rows = np.empty((n_samp, K.OBS_LEN))
    herm = np.empty(n_samp)
    pops_a = np.empty((n_samp, da))
    pops_b = np.empty((n_samp, db))
    extra = np.empty((n_samp, len(named_obs)), dtype=complex)
    rho2 = rho4.reshape(n, n)

    def take_sample(i, t):
        K.extract_obs(rho4, sq, rows[i])
        _check_sample(rows[i], t, dims)
        herm[i] = K.hermiticity_defect4(rho4)
        if herm[i] > HERMITICITY_TOL:
            raise PropagationError(f"hermiticity defect {herm[i]:.3e}", t=t)
        if params.g * abs(rows[i, K.OBS_Q]) >= params.omega_a:
            raise RegimeError(
                f"g|<q>| = {params.g * abs(rows[i, K.OBS_Q]):.3g} reached "
                f"omega_a at t = {t:.6g}; effective-frequency expansion "
                f"invalid")
        K.mode_populations(rho4, pops_a[i], pops_b[i])
        for j, (_, op) in enumerate(named_obs):
            extra[i, j] = expectation(op, rho2)

    take_sample(0, times[0])
    i = 1
    for seg in segments:
        cv = K.coeff_vector(params, seg.gate)
        for nsteps in steps_in(seg, sample_every):
            K.rk4_lindblad(rho4, nsteps, seg.dt, pairs, sq, fa, fb, cv, *bufs)
            take_sample(i, times[i])
            i += 1

    if check_positivity:
        lam = min_eigenvalue(rho2)
        if lam < -1e-8:
            raise PropagationError(f"negative eigenvalue {lam:.3e}",
                                   t=times[-1])

    data = {name: rows[:, k] for k, name in enumerate(
        MOMENT_COLUMNS[:4])}
    data["c_nq"] = rows[:, K.OBS_CNQ]
    data["c_np"] = rows[:, K.OBS_CNP]
    data["n_b"] = rows[:, K.OBS_NB]
    data["naq"] = rows[:, K.OBS_NAQ]
    data["nap"] = rows[:, K.OBS_NAP]
    data["nb2_fact"] = rows[:, K.OBS_G2NUM]
    data["trace_defect"] = np.abs(
        rows[:, K.OBS_TR_RE] - 1.0 + 1j * rows[:, K.OBS_TR_IM])
    data["herm_defect"] = herm
    for j, (name, _) in enumerate(named_obs):
        col = extra[:, j]
        data[name] = col.real if np.max(np.abs(col.imag)) < 1e-10 else col
    meta = {
        "tier": "quantum-lindblad",
        "model": params.model,
        "dims": (da, db),
        "dt": dt,
        "dt_effective": [seg.dt for seg in segments],
        "sample_every": sample_every,
        "t0": t0,
        "t_end": t_end,
        "params": params,
        "schedule": sched,
        "rho_final": rho2.copy(),
    }
    return TimeSeries(t=times, data=data,
                      aux={"pops_a": pops_a, "pops_b": pops_b}, meta=meta)


def steady_state_constant_drive(params: EngineParams, dims: ModeDim,
                                gate: float = 1.0, method: str = "nullspace",
                                dt: float = 0.1, tol: float = 1e-9,
                                t_max: float = 30000.0,
                                rho0: np.ndarray | None = None):
    """Steady state under a constant gate; returns (rho, info).

    method "nullspace" solves the generator's kernel directly,
    "propagate" marches until the entrywise 1-norm of d(rho)/dt drops
    below tol (ConvergenceError if t_max is reached first), and "both"
    runs the two and reports their elementwise disagreement in
    info["agreement"].
    """
    if method not in ("nullspace", "propagate", "both"):
        raise DomainError(f"unknown steady-state method {method!r}")
    info = {"method": method, "gate": gate}
    rho_n = rho_p = None
    if method in ("nullspace", "both"):
        rho_n = steady_nullspace(params, dims, s=gate)
    if method in ("propagate", "both"):
        rho = initial_state(params, dims) if rho0 is None else np.array(rho0)
        da, db = dims.dim_a, dims.dim_b
        rho4 = rho.astype(complex).reshape(da, db, da, db)
        pairs = K.active_pairs(rho4)
        sq, fa, fb = _tables(dims)
        cv = K.coeff_vector(params, gate)
        bufs = [np.zeros_like(rho4) for _ in range(5)]
        ddt = min(dt, dt_limit(params))
        chunk = max(1, int(round(100.0 / ddt)))
        out = np.zeros_like(rho4)
        t = 0.0
        resid = np.inf
        while t < t_max and resid >= tol:
            K.rk4_lindblad(rho4, chunk, ddt, pairs, sq, fa, fb, cv, *bufs)
            t += chunk * ddt
            K.lindblad_rhs(rho4, out, pairs, sq, fa, fb, cv)
            resid = float(np.sum(np.abs(out)))
            if not np.isfinite(resid):
                raise PropagationError("non-finite state in steady-state "
                                       "march", t=t)
        if resid >= tol:
            raise ConvergenceError(
                f"steady-state march residual {resid:.3e} > {tol:.1e} "
                f"at horizon t = {t_max}")
        info["residual"] = resid
        info["t_converged"] = t
        rho_p = rho4.reshape(dims.dim, dims.dim)
    if method == "both":
        info["agreement"] = float(np.max(np.abs(rho_n - rho_p)))
    rho = rho_n if rho_n is not None else rho_p
    return rho, info
