"""Closed moment system: frozen fixed-point oracles, analytic waveforms,
and property-based consistency across parameter space."""
import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ottosim import moments as mo
from ottosim.errors import DomainError, RegimeError
from ottosim.params import DriveSchedule, EngineParams

# Constant-drive fixed point at the default operating point (local
# dissipators, gate on), evaluated from the closed forms by hand:
#   A = 0.2*0.01 + 0.2*0.125 = 0.027,  B = 0.4,  C = 0.4025
#   n_a = A/B = 0.0675            var = thermal = n(1+n) = 0.07205625
#   q   = 8 g n wb/(4wb^2+kb^2)  = 0.00135/0.010025  = 0.134663341...
#   p   = (kb/2wb) q             = 0.05 * q          = 0.006733167...
#   c_np = 2 g var C/(C^2+wb^2)  = 0.176301...e-1
#   c_nq = (wb/C) c_np           = 0.219008...e-2
#   n_b = nbar_b + (g/kb)(c_np + n_a p) = 0.190845...
ORACLE_LOCAL = {
    "n_a": 0.0675,
    "var_na": 0.07205625,
    "q": 0.13466334164588528,
    "p": 0.006733167082294264,
    "c_np": 0.01763011473728202,
    "c_nq": 0.002190076364879754,
    "n_b": 0.19084603515336881,
}


def test_frozen_local_fixed_point():
    params = EngineParams().constant_drive(True)
    ss = mo.steady_state_analytic(params, s=1.0)
    for key, ref in ORACLE_LOCAL.items():
        assert abs(getattr(ss, key) - ref) / abs(ref) < 1e-9, key


def test_global_fixed_point_geometry():
    params = EngineParams(model="global").constant_drive(True)
    ss = mo.steady_state_analytic(params, s=1.0)
    # dressed-frame displacement: q = 2 alpha <n_a>, p = 0 exactly
    assert abs(ss.p) < 1e-14
    assert abs(ss.q - 2.0 * params.alpha * ss.n_a) < 1e-14
    assert abs(ss.n_a - 0.0675) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    wb=st.floats(0.01, 0.5),
    g=st.floats(0.0, 0.2),
    ka=st.floats(0.01, 1.0),
    kh=st.floats(0.0, 1.0),
    kb=st.floats(1e-4, 0.1),
    nh=st.floats(0.0, 3.0),
    nc=st.floats(0.0, 1.0),
    model=st.sampled_from(["local", "global"]),
    s=st.sampled_from([0.0, 1.0]),
)
def test_analytic_fixed_point_zeroes_rhs(wb, g, ka, kh, kb, nh, nc, model, s):
    params = EngineParams(omega_b=wb, g=g, kappa_a=ka, kappa_h=kh,
                          kappa_b=kb, nbar_h=nh, nbar_a=nc, nbar_b=nc,
                          model=model).constant_drive(s == 1.0)
    ss = mo.steady_state_analytic(params, s=s)
    dy = mo.moment_rhs(ss.to_array(), params, t=0.0)
    scale = max(1.0, float(np.max(np.abs(ss.to_array()))))
    assert np.max(np.abs(dy)) / scale < 1e-10


def test_piecewise_occupancy_junctions():
    params = EngineParams()
    period = params.schedule.period
    half = 0.5 * period
    n_hi, n_lo = 0.0675, 0.01
    assert abs(mo.analytic_na_piecewise(0.0, params) - n_lo) < 1e-14
    assert abs(mo.analytic_na_piecewise(half - 1e-9, params) - n_hi) < 1e-5
    assert abs(mo.analytic_na_piecewise(period - 1e-9, params) - n_lo) \
        < 1e-3 * n_lo + 1e-5
    # periodicity
    ts = np.array([3.0, 40.0, 100.0])
    a = mo.analytic_na_piecewise(ts, params)
    b = mo.analytic_na_piecewise(ts + 7 * period, params)
    assert np.max(np.abs(a - b)) < 1e-12
    with pytest.raises(DomainError):
        mo.analytic_na_piecewise(-1.0, params)


def test_integration_reaches_fixed_point():
    # LF transients decay at kb/2 = 0.0025: t = 7000 leaves < 1e-7
    params = EngineParams().constant_drive(True)
    series = mo.integrate_moments(mo.initial_moments(params), params,
                                  t_end=7000.0, dt=0.05, sample_every=1000)
    ss = mo.steady_state_analytic(params, s=1.0)
    for key, ref in ORACLE_LOCAL.items():
        assert abs(series.data[key][-1] - ref) / abs(ref) < 1e-6, key
    assert abs(series.data["n_b"][-1] - ss.n_b) / ss.n_b < 1e-6


def test_semiclassical_tier_factorizes():
    params = EngineParams()
    t_end = params.schedule.period
    q_run = mo.integrate_moments(mo.initial_moments(params), params, t_end,
                                 dt=0.02, sample_every=100, tier="quantum")
    s_run = mo.integrate_moments(mo.initial_moments(params), params, t_end,
                                 dt=0.02, sample_every=100,
                                 tier="semiclassical")
    assert s_run.meta["tier"] == "semiclassical"
    assert np.all(s_run.data["c_nq"] == 0.0)
    assert np.all(s_run.data["c_np"] == 0.0)
    # first moments and occupancy variance are correlation-blind
    for col in ("n_a", "q", "p", "var_na"):
        assert np.max(np.abs(q_run.data[col] - s_run.data[col])) < 1e-12, col
    # the LF occupancy is not: its drive includes the correlation flux
    assert np.max(np.abs(q_run.data["n_b"] - s_run.data["n_b"])) > 1e-4


def test_waveform_parameters_frozen():
    params = EngineParams()
    q0, amp, phi = mo.q_waveform_parameters(params)
    assert abs(q0 - 0.0773067331670823) < 1e-9
    assert abs(amp - 0.7318840601792758) < 1e-9
    assert -math.pi <= phi <= math.pi
    r, qb0, pb0 = mo.limit_cycle_geometry(params)
    assert abs(r - amp / math.sqrt(2.0)) < 1e-12
    assert abs(qb0 - q0 / math.sqrt(2.0)) < 1e-12
    assert pb0 == 0.0


def test_waveform_requires_resonant_square_wave():
    params = EngineParams()
    off_duty = params.with_drive(DriveSchedule(
        period=params.schedule.period, duty=0.3))
    with pytest.raises(RegimeError):
        mo.q_waveform_parameters(off_duty)
    detuned = params.with_drive(DriveSchedule(
        period=1.3 * params.schedule.period, duty=0.5))
    with pytest.raises(RegimeError):
        mo.q_waveform_parameters(detuned)


def test_adiabatic_correlation_estimate():
    params = EngineParams()
    var = ORACLE_LOCAL["var_na"]
    c_nq, c_np = mo.correlation_adiabatic(params, var, t=1e9)
    # instantaneous slaving: c_np ~ (g/ka) var
    assert abs(c_np - (params.g / params.kappa_a) * var) < 1e-12
    ratio_est = c_np / var
    ratio_exact = ORACLE_LOCAL["c_np"] / ORACLE_LOCAL["var_na"]
    assert abs(ratio_est - ratio_exact) / ratio_exact < 0.03
    slow = dataclasses.replace(params, kappa_a=0.02, kappa_h=0.02)
    with pytest.raises(RegimeError):
        mo.correlation_adiabatic(slow, var, t=1.0)
    with pytest.raises(DomainError):
        mo.correlation_adiabatic(params, var, t=-1.0)


def test_initial_moments():
    params = EngineParams()
    m = mo.initial_moments(params)
    assert m.n_a == params.nbar_init
    assert m.n_b == params.nbar_init
    assert m.q == m.p == m.c_nq == m.c_np == 0.0
    assert abs(m.var_na - params.nbar_init * (1 + params.nbar_init)) < 1e-15


def test_moment_vector_validation():
    with pytest.raises(DomainError):
        mo.MomentVector(0.0, -0.1, 0, 0, 0.1, 0, 0, 0.1)
    with pytest.raises(DomainError):
        mo.MomentVector(0.0, 0.1, 0, 0, -0.1, 0, 0, 0.1)
    with pytest.raises(DomainError):
        mo.MomentVector(0.0, math.nan, 0, 0, 0.1, 0, 0, 0.1)


def test_tier_and_grid_validation():
    params = EngineParams()
    with pytest.raises(DomainError):
        mo.moment_rhs(np.zeros(7), params, tier="bogus")
    with pytest.raises(DomainError):
        mo.moment_rhs(np.zeros(5), params)
    with pytest.raises(DomainError):
        mo.integrate_moments(mo.initial_moments(params), params, 10.0,
                             sample_every=0)
