"""End-to-end acceptance gate for the engine simulator.

Thirteen numbered criteria, one test (hence one pass/fail line under
pytest -v) per criterion, each at its stated tolerance. Heavy runs are
shared through module-scoped fixtures; the stochastic criteria use
frozen seeds so the gate is deterministic.
"""
import math
import time

import numpy as np
import pytest

from ottosim.fock import ModeDim, partial_trace
from ottosim.langevin import run_ensemble
from ottosim.lindblad import (initial_state, observables, propagate,
                              steady_state_constant_drive)
from ottosim.moments import (analytic_na_piecewise, integrate_moments,
                             initial_moments, limit_cycle_geometry,
                             q_waveform_parameters, steady_state_analytic)
from ottosim.params import EngineParams
from ottosim.superop import expm_propagate, steady_nullspace
from ottosim.thermo import (SWEEP_NBAR_H, max_power_sweep,
                            occupation_distribution, segment_cycle,
                            thermo_from_series, waveform_mean_amplitude)

SEED_POWER = 12345
SEED_ENSEMBLE = 20260818


def _report(tag, detail):
    print(f"[PASS] {tag}: {detail}")


# ---------------------------------------------------------------------------
# shared runs


@pytest.fixture(scope="module")
def baseline():
    """Eight drive periods of the density-matrix tier at defaults."""
    params = EngineParams()
    dims = ModeDim(6, 50)
    rho0 = initial_state(params, dims)
    tic = time.perf_counter()
    series = propagate(rho0, params, dims, 8.0 * params.cycle_period,
                       dt=0.02, sample_every=25)
    elapsed = time.perf_counter() - tic
    return params, dims, series, elapsed


@pytest.fixture(scope="module")
def moments_matched(baseline):
    """Moment tier on the exact sampling grid of the baseline run."""
    params, _, series, _ = baseline
    ref = integrate_moments(initial_moments(params), params,
                            8.0 * params.cycle_period, dt=0.02,
                            sample_every=25)
    assert np.array_equal(ref.t, series.t)
    return ref


@pytest.fixture(scope="module")
def cycle40():
    """Forty periods of the moment tier, thermo columns, cycle digest."""
    params = EngineParams()
    raw = integrate_moments(initial_moments(params), params,
                            40.0 * params.cycle_period, dt=0.02,
                            sample_every=25)
    th = thermo_from_series(raw, params)
    return params, th, segment_cycle(th, params)


@pytest.fixture(scope="module")
def power_rows():
    params = EngineParams()
    tic = time.perf_counter()
    rows = max_power_sweep(SWEEP_NBAR_H, params, seed=SEED_POWER,
                           n_traj=10000, steady_cycles=20,
                           dt_classical=0.005)
    return rows, time.perf_counter() - tic


# ---------------------------------------------------------------------------
# criteria


def test_ac01_hot_plateau_occupancy(baseline):
    params, _, series, elapsed = baseline
    period = params.cycle_period
    vals = []
    for k in range(8):
        tk = (k + 0.5) * period
        idx = np.flatnonzero(np.isclose(series.t, tk, rtol=0.0, atol=1e-9))
        assert idx.size == 1, f"heating edge t={tk} not sampled"
        vals.append(float(series["n_a"][idx[0]]))
    vals = np.array(vals)
    assert np.max(np.abs(vals - 0.0675)) <= 1e-3, vals
    assert elapsed < 60.0, f"baseline run took {elapsed:.1f} s"
    _report("AC1", f"plateau n_a in [{vals.min():.5f}, {vals.max():.5f}] "
                   f"vs 0.0675 +- 1e-3; runtime {elapsed:.1f} s < 60 s")


def test_ac02_occupancy_matches_rate_law(baseline):
    params, _, series, _ = baseline
    mask = series.t >= params.cycle_period - 1e-9
    ana = analytic_na_piecewise(series.t[mask], params)
    rel = np.max(np.abs(series["n_a"][mask] - ana) / np.abs(ana))
    assert rel < 0.02, rel
    _report("AC2", f"max relative occupancy error after first period "
                   f"{rel:.2e} < 2e-2")


def test_ac03_moment_tier_tracks_density_matrix(baseline, moments_matched):
    params, _, series, _ = baseline
    ref = moments_matched
    naq_m = ref["c_nq"] + ref["n_a"] * ref["q"]
    pairs = [(series[c], ref[c]) for c in
             ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b")]
    pairs.append((series["naq"], naq_m))
    names = ["n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b", "naq"]
    worst = 0.0
    for name, (a, b) in zip(names, pairs):
        scaled = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
        assert scaled < 5e-3, f"{name}: scaled defect {scaled:.2e}"
        worst = max(worst, scaled)
    _report("AC3", f"eight observables agree; worst scaled defect "
                   f"{worst:.2e} < 5e-3")


def test_ac04_constant_drive_steady_state():
    params = EngineParams().constant_drive(True)
    dims = ModeDim(6, 25)
    rho_m, info = steady_state_constant_drive(params, dims,
                                              method="propagate", dt=0.1,
                                              tol=1e-10)
    rho_n = steady_nullspace(params, dims, s=1.0)
    agreement = float(np.max(np.abs(rho_m - rho_n)))
    assert agreement < 1e-6, agreement
    obs = observables(rho_m, dims)
    ss = steady_state_analytic(params, s=1.0)
    assert abs(ss.var_na - 0.0721) < 5e-4
    assert abs(ss.q - 0.1347) < 5e-5
    assert abs(ss.c_np - 0.0176) < 5e-5
    assert abs(ss.n_b - 0.191) < 5e-4
    worst = 0.0
    for key in ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b"):
        rel = abs(obs[key] - getattr(ss, key)) / abs(getattr(ss, key))
        assert rel < 1e-3, f"{key}: rel {rel:.2e}"
        worst = max(worst, rel)
    glob = params.with_model("global")
    rho_g = steady_nullspace(glob, dims, s=1.0)
    p_g = observables(rho_g, dims)["p"]
    assert abs(p_g) < 1e-8, p_g
    _report("AC4", f"marched steady state within {worst:.2e} of closed "
                   f"forms (march residual {info['residual']:.1e}, "
                   f"kernel agreement {agreement:.1e}); dressed-variant "
                   f"|p_ss| = {abs(p_g):.1e} < 1e-8")


def test_ac05_piston_waveform(cycle40):
    params, th, _ = cycle40
    mean, amp = waveform_mean_amplitude(th, params.cycle_period, "q")
    mean_ref = 0.5 * (params.nbar_h + 3.0 * params.nbar_a)
    amp_ref = 20.0 * (params.nbar_h - params.nbar_a) / math.pi
    rel_mean = abs(mean - mean_ref) / mean_ref
    rel_amp = abs(amp - amp_ref) / amp_ref
    assert rel_mean < 0.05, (mean, mean_ref)
    assert rel_amp < 0.05, (amp, amp_ref)
    _report("AC5", f"q mean {mean:.5f} vs {mean_ref:.5f} ({rel_mean:.1%}), "
                   f"first harmonic {amp:.5f} vs {amp_ref:.5f} "
                   f"({rel_amp:.1%}); both < 5%")


def test_ac06_limit_cycle_orbit(cycle40):
    params, _, cyc = cycle40
    assert cyc.t_start > 3000.0  # digest window sits in the late regime
    assert cyc.strobe_defect < 1e-3, cyc.strobe_defect
    r_ref, qb0_ref, _ = limit_cycle_geometry(params)
    rel_r = abs(cyc.R_fit - r_ref) / r_ref
    rel_c = abs(cyc.center_fit[0] - qb0_ref) / qb0_ref
    assert abs(r_ref - 0.518) < 2e-3
    assert abs(qb0_ref - 0.0547) < 2e-4
    assert rel_r < 0.15, (cyc.R_fit, r_ref)
    assert rel_c < 0.15, (cyc.center_fit, qb0_ref)
    _report("AC6", f"strobe defect {cyc.strobe_defect:.2e} < 1e-3; orbit "
                   f"R {cyc.R_fit:.4f} vs {r_ref:.4f} ({rel_r:.1%}), "
                   f"center {cyc.center_fit[0]:.4f} vs {qb0_ref:.4f} "
                   f"({rel_c:.1%}); both < 15%")


def test_ac07_cycle_thermodynamics(cycle40):
    _, _, cyc = cycle40
    assert abs(cyc.W - 3.5e-3) <= 0.3 * 3.5e-3, cyc.W
    assert abs(cyc.Q_in - 0.06) <= 0.3 * 0.06, cyc.Q_in
    assert abs(cyc.omega_L - 0.96) <= 0.01, cyc.omega_L
    assert abs(cyc.omega_H - 1.03) <= 0.01, cyc.omega_H
    rel = abs(cyc.eta - cyc.eta_otto) / cyc.eta_otto
    assert rel < 0.40, (cyc.eta, cyc.eta_otto)
    _report("AC7", f"W = {cyc.W:.3e} (3.5e-3 +- 30%), Q_in = "
                   f"{cyc.Q_in:.3e} (0.06 +- 30%), omega_eff in "
                   f"[{cyc.omega_L:.4f}, {cyc.omega_H:.4f}], eta "
                   f"{cyc.eta:.4f} vs Otto {cyc.eta_otto:.4f} ({rel:.1%})")


@pytest.fixture(scope="module")
def hot_sweep_series():
    """Density-matrix tier across hot occupancies (13x50, 20 periods)."""
    runs = {}
    for nh in SWEEP_NBAR_H:
        params = EngineParams(nbar_h=nh)
        dims = ModeDim(13, 50)
        series = propagate(initial_state(params, dims), params, dims,
                           20.0 * params.cycle_period, dt=0.05,
                           sample_every=50)
        runs[nh] = (params, dims, thermo_from_series(series, params))
    return runs


def test_ac08_photon_statistics_trend(hot_sweep_series):
    finals = []
    for nh in SWEEP_NBAR_H:
        _, _, th = hot_sweep_series[nh]
        g2_0 = float(th["g2"][0])
        assert abs(g2_0 - 2.0) <= 0.02, (nh, g2_0)
        finals.append(float(th["g2"][-1]))
    finals = np.array(finals)
    assert np.all(np.diff(finals) < 0), finals
    assert np.all(finals > 1.0), finals
    _report("AC8", f"g2(0) = 2.00 +- 0.02 at every drive strength; "
                   f"steady g2 {np.round(finals, 3).tolist()} strictly "
                   f"decreasing and > 1")


def test_ac09_work_mode_distribution(hot_sweep_series):
    _, dims, th_low = hot_sweep_series[0.125]
    pops_low = occupation_distribution(partial_trace(
        th_low.meta["rho_final"], dims, keep="LF"))
    head = pops_low[:15]  # below the numerical-noise floor further out
    assert int(np.argmax(pops_low)) == 0
    assert np.all(np.diff(head) < 0), head
    _, dims_h, th_high = hot_sweep_series[0.725]
    pops_high = occupation_distribution(partial_trace(
        th_high.meta["rho_final"], dims_h, keep="LF"))
    mode = int(np.argmax(pops_high))
    assert mode >= 1, pops_high[:6]
    _report("AC9", f"weak drive: P(n) monotone decreasing (mode at 0); "
                   f"strong drive: mode at n = {mode} >= 1")


def test_ac10_power_hierarchy(power_rows):
    rows, elapsed = power_rows
    assert elapsed < 1800.0, f"sweep took {elapsed:.0f} s"
    first = rows[0]
    se = first["se_P_classical"]
    gap_qc = first["P_max_quantum"] - first["P_max_classical"]
    gap_csc = first["P_max_classical"] - first["P_max_semiclassical"]
    assert gap_qc > 3.0 * se, (gap_qc, se)
    assert gap_csc > 3.0 * se, (gap_csc, se)
    rel_qc = [r["rel_qc"] for r in rows]
    rel_qsc = [r["rel_qsc"] for r in rows]
    assert np.all(np.diff(rel_qc) < 0), rel_qc
    assert np.all(np.diff(rel_qsc) < 0), rel_qsc
    _report("AC10", f"P_q > P_c > P_sc at weak drive ({gap_qc / se:.1f} and "
                    f"{gap_csc / se:.1f} standard errors); quantum excess "
                    f"{[f'{r:.3f}' for r in rel_qc]} and "
                    f"{[f'{r:.3f}' for r in rel_qsc]} decreasing; "
                    f"{elapsed:.0f} s")


def test_ac11_correlation_work_channel(cycle40):
    params, th, cyc = cycle40
    window = th.t >= cyc.t_start - 1e-12
    assert float(np.max(th["Sigma"][window])) <= 1e-12
    est = params.g / params.kappa_a
    ss = steady_state_analytic(params.constant_drive(True), s=1.0)
    exact = ss.c_np / ss.var_na
    rel_exact = abs(est - exact) / exact
    assert rel_exact < 0.03, (est, exact)
    t_edge = cyc.t_end - 0.5 * params.cycle_period
    idx = int(np.argmin(np.abs(th.t - t_edge)))
    r_sim = float(th["c_np"][idx] / th["var_na"][idx])
    rel_sim = abs(est - r_sim) / r_sim
    assert rel_sim < 0.05, (est, r_sim)
    ratio = float(np.trapezoid(np.abs(th["c_np"][window]), th.t[window])
                  / np.trapezoid(np.abs(th["c_nq"][window]), th.t[window]))
    assert 4.0 < ratio < 25.0, ratio
    _report("AC11", f"Sigma <= 0 on the steady window; adiabatic ratio "
                    f"g/kappa_a = {est:.4f} vs exact {exact:.4f} "
                    f"({rel_exact:.1%} < 3%) and simulated {r_sim:.4f} "
                    f"({rel_sim:.1%} < 5%); |c_np|/|c_nq| = {ratio:.1f}")


def test_ac12_propagator_vs_dense_exponential():
    params = EngineParams()
    dims = ModeDim(3, 4)
    rho0 = initial_state(params, dims)
    half = 0.5 * params.cycle_period
    series = propagate(rho0, params, dims, half, dt=0.01, sample_every=1000)
    rho_rk4 = series.meta["rho_final"]
    rho_exp = expm_propagate(rho0, params, dims, half, s=1.0)
    defect = float(np.max(np.abs(rho_rk4 - rho_exp)))
    assert defect < 1e-8, defect
    _report("AC12", f"half-stroke propagation vs dense exponential: "
                    f"max elementwise defect {defect:.2e} < 1e-8")


def test_ac13_ensemble_tracks_first_moments():
    params = EngineParams()
    t_end = params.cycle_period
    # dt chosen so the explicit-update energy bias (~omega^2 dt / kappa)
    # stays a small fraction of one ensemble standard error
    ens = run_ensemble(params, t_end, 0.0005, 10000, SEED_ENSEMBLE,
                       sample_every=1000)
    ref = integrate_moments(initial_moments(params), params, t_end,
                            dt=0.0005, sample_every=1000)
    assert np.array_equal(ens.t, ref.t)
    worst = 0.0
    for col, se_col in (("n_a", "se_n_a"), ("q", "se_q"), ("p", "se_p")):
        diff = np.abs(ens[col] - ref[col])
        bands = 3.0 * ens[se_col]
        assert np.all(diff <= bands), \
            f"{col}: {np.max(diff / np.maximum(bands, 1e-300)):.2f}x band"
        worst = max(worst, float(np.max(diff / bands)))
    _report("AC13", f"ensemble means inside 3 standard errors of the "
                    f"moment tier at all {len(ens.t)} samples (worst "
                    f"{worst:.2f}x band)")
