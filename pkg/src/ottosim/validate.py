"""In-process oracle battery: cross-checks every solver tier against
independent constructions (dense generator algebra, closed-form steady
states, analytic waveforms, reference stepping) so a single command can
confirm the install is healthy.

Each check returns a CheckResult; run_battery collects them. The checks
are small and deterministic, sized to finish in well under a minute in
fast mode.
"""
from __future__ import annotations

import dataclasses
import math
import time

import numpy as np

from . import kernels as K
from . import langevin as lv
from . import lindblad as lb
from . import moments as mo
from . import superop as so
from .fock import (
    ModeDim,
    expectation,
    lift_a,
    lift_b,
    momentum,
    number,
    position,
    thermal_density,
    thermal_product,
)
from .params import EngineParams
from .thermo import entropy_of_occupation, fit_circle, g2_zero, shoelace_area


@dataclasses.dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    elapsed_s: float

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        return f"[{tag}] {self.name:38s} {self.detail} ({self.elapsed_s:.2f}s)"


def _random_density(dims: ModeDim, seed: int, buffer: int = 0) -> np.ndarray:
    """Random full-rank density matrix; with buffer > 0 the support is
    confined to levels at least `buffer` below the box edge in each mode,
    so truncated operator algebra stays exact under one generator
    application."""
    rng = np.random.default_rng(seed)
    das, dbs = dims.dim_a - buffer, dims.dim_b - buffer
    sub = rng.normal(size=(das * dbs, das * dbs)) \
        + 1j * rng.normal(size=(das * dbs, das * dbs))
    sub = sub @ sub.conj().T
    sub /= np.trace(sub).real
    if buffer == 0:
        return sub
    idx = np.array([na * dims.dim_b + nb
                    for na in range(das) for nb in range(dbs)])
    rho = np.zeros((dims.dim, dims.dim), dtype=complex)
    rho[np.ix_(idx, idx)] = sub
    return rho


def check_rng_determinism() -> CheckResult:
    t0 = time.perf_counter()
    u = np.uint64
    x1 = K.counter_normal(u(7), u(3), u(11), u(2))
    x2 = K.counter_normal(u(7), u(3), u(11), u(2))
    y = K.counter_normal(u(7), u(3), u(11), u(3))
    z = K.counter_normal(u(8), u(3), u(11), u(2))
    ok = x1 == x2 and x1 != y and x1 != z and np.isfinite(x1)
    detail = f"repeat identical: {x1 == x2}, lane/seed distinct: {x1 != y and x1 != z}"
    return CheckResult("rng-determinism", ok, detail, time.perf_counter() - t0)


def check_rng_normal_moments(n: int = 200_000) -> CheckResult:
    t0 = time.perf_counter()
    u = np.uint64
    draws = np.empty(n)
    for i in range(n):
        draws[i] = K.counter_normal(u(12345), u(i % 977), u(i), u(i % 6))
    mean = float(np.mean(draws))
    var = float(np.var(draws))
    skew = float(np.mean(draws ** 3))
    tol_m = 5.0 / math.sqrt(n)
    tol_v = 5.0 * math.sqrt(2.0 / n)
    ok = abs(mean) < tol_m and abs(var - 1.0) < tol_v and abs(skew) < 3.0 * tol_v
    detail = f"mean {mean:+.4f} (tol {tol_m:.4f}), var-1 {var - 1.0:+.4f} (tol {tol_v:.4f})"
    return CheckResult("rng-normal-moments", ok, detail, time.perf_counter() - t0)


def check_generator_stencil_vs_kron() -> CheckResult:
    """apply_liouvillian (pure stencil) against the sparse Kronecker
    generator, both gate values, both models."""
    t0 = time.perf_counter()
    dims = ModeDim(3, 4)
    worst = 0.0
    for k, model in enumerate(("local", "global")):
        params = EngineParams(model=model).constant_drive(True)
        rho = _random_density(dims, 100 + k)
        for s in (0.0, 1.0):
            drho = lb.apply_liouvillian(rho, params, dims, gate=s)
            lvm = so.liouvillian_matrix(params, dims, s)
            ref = (lvm @ rho.reshape(-1)).reshape(rho.shape)
            worst = max(worst, float(np.max(np.abs(drho - ref))))
    ok = worst < 1e-12
    return CheckResult("generator-stencil-vs-kron", ok,
                       f"max |stencil - kron| = {worst:.2e} (tol 1e-12)",
                       time.perf_counter() - t0)


def check_thermal_fixed_point() -> CheckResult:
    """With the coupling off, the product thermal state at the gated bath
    mixture is exactly stationary."""
    t0 = time.perf_counter()
    dims = ModeDim(8, 8)
    params = dataclasses.replace(EngineParams(), g=0.0).constant_drive(True)
    n_mix = params.rate_A(1.0) / params.rate_B(1.0)
    rho = thermal_product(dims, n_mix, params.nbar_b)
    drho = lb.apply_liouvillian(rho, params, dims, gate=1.0)
    resid = float(np.sum(np.abs(drho)))
    ok = resid < 1e-12
    return CheckResult("thermal-fixed-point", ok,
                       f"|L rho_th|_1 = {resid:.2e} (tol 1e-12)",
                       time.perf_counter() - t0)


def check_moment_closure_identity() -> CheckResult:
    """The moment ODE right-hand side against tr(O L[rho]) on a random
    (non-Gaussian) state: the closure is exact because the HF occupancy
    is conserved by the coupling, so every tracked derivative must match
    at the operator level, including the LF energy-flow terms."""
    t0 = time.perf_counter()
    dims = ModeDim(5, 6)
    na_op = lift_a(number(dims.dim_a), dims).toarray()
    na2_op = na_op @ na_op
    q_op = lift_b(position(dims.dim_b), dims).toarray()
    p_op = lift_b(momentum(dims.dim_b), dims).toarray()
    nb_op = lift_b(number(dims.dim_b), dims).toarray()
    naq_op = na_op @ q_op
    nap_op = na_op @ p_op
    worst = 0.0
    for k, model in enumerate(("local", "global")):
        rho = _random_density(dims, 300 + k, buffer=2)
        for s in (0.0, 1.0):
            params = EngineParams(model=model).constant_drive(s == 1.0)
            drho = lb.apply_liouvillian(rho, params, dims, gate=s)

            def d(op):
                return float(np.trace(op @ drho).real)

            def e(op):
                return float(np.trace(op @ rho).real)

            n_a, q, p, n_b = e(na_op), e(q_op), e(p_op), e(nb_op)
            var = e(na2_op) - n_a ** 2
            cnq = e(naq_op) - n_a * q
            cnp = e(nap_op) - n_a * p
            y = np.array([n_a, q, p, var, cnq, cnp, n_b])
            dy = mo.moment_rhs(y, params, t=0.0)
            # convert central-moment derivatives back to raw ones
            raw = np.array([
                dy[0],
                dy[1],
                dy[2],
                dy[3] + 2.0 * n_a * dy[0],
                dy[4] + dy[0] * q + n_a * dy[1],
                dy[5] + dy[0] * p + n_a * dy[2],
                dy[6],
            ])
            direct = np.array([
                d(na_op), d(q_op), d(p_op), d(na2_op),
                d(naq_op), d(nap_op), d(nb_op),
            ])
            worst = max(worst, float(np.max(np.abs(raw - direct))))
    ok = worst < 1e-10
    return CheckResult("moment-closure-identity", ok,
                       f"max |ODE - tr(O L rho)| = {worst:.2e} (tol 1e-10)",
                       time.perf_counter() - t0)


def check_rk4_vs_expm() -> CheckResult:
    """Main fixed-step integrator against a dense matrix exponential over
    one heating half-stroke at toy dimensions."""
    t0 = time.perf_counter()
    dims = ModeDim(3, 4)
    params = EngineParams()
    half = 0.5 * params.schedule.period
    rho0 = lb.initial_state(params, dims)
    series = lb.propagate(rho0, params, dims, t_end=half, dt=0.01,
                          sample_every=100_000)
    rho_num = series.meta["rho_final"]
    rho_ref = so.expm_propagate(rho0, params, dims, half, s=1.0)
    diff = float(np.max(np.abs(rho_num - rho_ref)))
    ok = diff < 1e-8
    return CheckResult("rk4-vs-expm-halfstroke", ok,
                       f"max elementwise diff = {diff:.2e} (tol 1e-8)",
                       time.perf_counter() - t0)


def check_steady_closed_forms() -> CheckResult:
    """Nullspace steady state against the exact constant-gate moment
    fixed point (local), plus the dressed-frame null LF momentum."""
    t0 = time.perf_counter()
    dims = ModeDim(6, 30)
    params = EngineParams().constant_drive(True)
    rho, _ = lb.steady_state_constant_drive(params, dims, method="nullspace")
    obs = lb.observables(rho, dims)
    ref = mo.steady_state_analytic(params, s=1.0)
    rel = max(
        abs(obs[k] - getattr(ref, k)) / max(abs(getattr(ref, k)), 1e-12)
        for k in ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b"))
    pg = EngineParams(model="global").constant_drive(True)
    rho_g, _ = lb.steady_state_constant_drive(pg, dims, method="nullspace")
    p_ss = lb.observables(rho_g, dims)["p"]
    ok = rel < 1e-3 and abs(p_ss) < 1e-8
    return CheckResult(
        "steady-closed-forms", ok,
        f"local max rel = {rel:.2e} (tol 1e-3), global p_ss = {p_ss:.1e} "
        f"(tol 1e-8)", time.perf_counter() - t0)


def check_piecewise_na() -> CheckResult:
    """Internal consistency of the periodic-steady HF occupancy form:
    end-of-stroke values sit on the relaxation targets."""
    t0 = time.perf_counter()
    params = EngineParams()
    period = params.schedule.period
    half = 0.5 * period
    n_hi = params.rate_A(1.0) / params.rate_B(1.0)
    n_lo = params.rate_A(0.0) / params.rate_B(0.0)
    eps = 1e-9
    heat_end = mo.analytic_na_piecewise(half - eps, params)
    cool_end = mo.analytic_na_piecewise(period - eps, params)
    start = mo.analytic_na_piecewise(0.0, params)
    d1 = abs(heat_end - n_hi) / n_hi
    d2 = abs(cool_end - n_lo) / n_lo
    d3 = abs(start - n_lo) / n_lo
    ok = d1 < 1e-4 and d2 < 1e-2 and d3 < 1e-12
    return CheckResult(
        "piecewise-occupancy-junctions", ok,
        f"plateau gap {d1:.1e}, return gap {d2:.1e}, start gap {d3:.1e}",
        time.perf_counter() - t0)


def check_moments_vs_lindblad(fast: bool = True) -> CheckResult:
    """Closed moment integration against the density-matrix run on a
    matched grid over the first gate stroke(s)."""
    t0 = time.perf_counter()
    dims = ModeDim(5, 16) if fast else ModeDim(6, 30)
    params = EngineParams()
    t_end = (0.5 if fast else 1.0) * params.schedule.period
    dt = 0.02
    rho0 = lb.initial_state(params, dims)
    sl = lb.propagate(rho0, params, dims, t_end=t_end, dt=dt, sample_every=25)
    sm = mo.integrate_moments(mo.initial_moments(params), params, t_end,
                              dt=dt, sample_every=25)
    if sl.t.shape != sm.t.shape or np.max(np.abs(sl.t - sm.t)) > 1e-12:
        return CheckResult("moments-vs-lindblad", False,
                           "sample grids do not line up",
                           time.perf_counter() - t0)
    worst = 0.0
    for col in ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b"):
        a, b = sl.data[col], sm.data[col]
        scale = max(float(np.max(np.abs(a))), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    ok = worst < 5e-3
    return CheckResult("moments-vs-lindblad", ok,
                       f"max scaled defect = {worst:.2e} (tol 5e-3)",
                       time.perf_counter() - t0)


def check_loop_geometry() -> CheckResult:
    """Signed shoelace area and circle fitting on exact synthetic data."""
    t0 = time.perf_counter()
    th = np.linspace(0.0, 2.0 * np.pi, 400, endpoint=False)
    x = 1.0 + 2.0 * np.cos(th)
    y = -3.0 + 2.0 * np.sin(th)
    area = shoelace_area(x, y)
    area_cw = shoelace_area(x[::-1], y[::-1])
    # inscribed-polygon area, exact for the vertex count
    poly = 0.5 * 400 * 2.0 ** 2 * math.sin(2.0 * math.pi / 400)
    x0, y0, r = fit_circle(x, y)
    ex = np.cos(th) * 3.0
    ey = np.sin(th) * 0.5
    epoly = 0.5 * 400 * 3.0 * 0.5 * math.sin(2.0 * math.pi / 400)
    earea = shoelace_area(ex, ey)
    ok = (abs(area - poly) < 1e-10 and abs(area_cw + poly) < 1e-10
          and abs(x0 - 1.0) < 1e-9 and abs(y0 + 3.0) < 1e-9
          and abs(r - 2.0) < 1e-9 and abs(earea - epoly) < 1e-10)
    return CheckResult(
        "loop-geometry-synthetic", ok,
        f"circle area {area:.6f} vs {poly:.6f}, fit R {r:.6f}, "
        f"ellipse area {earea:.6f} vs {epoly:.6f}",
        time.perf_counter() - t0)


def check_statistics_oracles() -> CheckResult:
    """Entropy and photon-statistics helpers on states with known values."""
    t0 = time.perf_counter()
    s1 = entropy_of_occupation(1.0)
    ref1 = 2.0 * math.log(2.0)
    dim = 60
    rho_th = thermal_density(dim, 0.2)
    g2_th = g2_zero(rho_th)
    beta = 1.0
    amps = np.empty(dim)
    amps[0] = math.exp(-0.5 * beta ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * beta / math.sqrt(n)
    rho_coh = np.outer(amps, amps)
    g2_coh = g2_zero(rho_coh)
    rho_fock = np.zeros((dim, dim))
    rho_fock[1, 1] = 1.0
    g2_fock = g2_zero(rho_fock)
    ok = (abs(s1 - ref1) < 1e-12 and entropy_of_occupation(0.0) == 0.0
          and abs(g2_th - 2.0) < 1e-10 and abs(g2_coh - 1.0) < 1e-10
          and abs(g2_fock) < 1e-12)
    return CheckResult(
        "statistics-oracles", ok,
        f"S(1) err {abs(s1 - ref1):.1e}, g2 thermal {g2_th:.6f}, "
        f"coherent {g2_coh:.6f}, Fock(1) {g2_fock:.1e}",
        time.perf_counter() - t0)


def check_langevin_reference_step(n_steps: int = 200) -> CheckResult:
    """Compiled trajectory kernel against the plain-Python reference
    stepper, same counter RNG stream: must agree bit for bit."""
    t0 = time.perf_counter()
    params = EngineParams()
    dt = 0.01
    seed = 424242
    t_end = n_steps * dt
    times, states = lv.single_trajectory(params, t_end, dt, seed)
    u = np.uint64
    std0 = math.sqrt(params.nbar_init)
    state = np.array([
        std0 * K.counter_normal(u(seed), u(0), u(0), u(0)),
        std0 * K.counter_normal(u(seed), u(0), u(0), u(1)),
        std0 * K.counter_normal(u(seed), u(0), u(0), u(2)),
        std0 * K.counter_normal(u(seed), u(0), u(0), u(3)),
    ])
    worst = float(np.max(np.abs(state - states[0])))
    for k in range(n_steps):
        t = k * dt
        s = params.schedule.gate(t + 0.5 * dt)
        noise = np.array([
            K.counter_normal(u(seed), u(0), u(k + 1), u(lane))
            for lane in range(6)])
        state = lv.langevin_step(state, params, s, dt, noise)
        worst = max(worst, float(np.max(np.abs(state - states[k + 1]))))
    ok = worst == 0.0
    return CheckResult("langevin-reference-step", ok,
                       f"max |kernel - reference| = {worst:.1e} (tol exact)",
                       time.perf_counter() - t0)


def check_langevin_determinism() -> CheckResult:
    t0 = time.perf_counter()
    params = EngineParams()
    a = lv.run_ensemble(params, 5.0, 0.01, n_traj=64, seed=9, sample_every=100)
    b = lv.run_ensemble(params, 5.0, 0.01, n_traj=64, seed=9, sample_every=100)
    c = lv.run_ensemble(params, 5.0, 0.01, n_traj=64, seed=10, sample_every=100)
    same = all(np.array_equal(a.data[k], b.data[k]) for k in a.data)
    diff = any(not np.array_equal(a.data[k], c.data[k]) for k in a.data)
    ok = same and diff
    return CheckResult("langevin-determinism", ok,
                       f"same seed identical: {same}, new seed differs: {diff}",
                       time.perf_counter() - t0)


def check_steady_march_agreement() -> CheckResult:
    """Nullspace and long-march steady states agree elementwise (slow)."""
    t0 = time.perf_counter()
    dims = ModeDim(6, 25)
    params = EngineParams().constant_drive(True)
    _, info = lb.steady_state_constant_drive(params, dims, method="both",
                                             dt=0.05, tol=1e-10)
    agree = info["agreement"]
    ok = agree < 1e-6
    return CheckResult("steady-march-agreement", ok,
                       f"max elementwise gap = {agree:.2e} (tol 1e-6)",
                       time.perf_counter() - t0)


def run_battery(fast: bool = True) -> list[CheckResult]:
    """Run the oracle battery; fast=False adds the slower cross-checks."""
    checks = [
        check_rng_determinism,
        check_rng_normal_moments,
        check_generator_stencil_vs_kron,
        check_thermal_fixed_point,
        check_moment_closure_identity,
        check_rk4_vs_expm,
        check_steady_closed_forms,
        check_piecewise_na,
        lambda: check_moments_vs_lindblad(fast=fast),
        check_loop_geometry,
        check_statistics_oracles,
        check_langevin_reference_step,
        check_langevin_determinism,
    ]
    if not fast:
        checks.append(check_steady_march_agreement)
    results = []
    for fn in checks:
        try:
            results.append(fn())
        except Exception as exc:  # battery must report, not crash
            name = getattr(fn, "__name__", "check").replace("check_", "")
            results.append(CheckResult(name.replace("_", "-"), False,
                                       f"raised {type(exc).__name__}: {exc}",
                                       0.0))
    return results


def battery_passed(results: list[CheckResult]) -> bool:
    return all(r.ok for r in results)
