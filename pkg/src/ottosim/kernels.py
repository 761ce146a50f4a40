"""Compiled inner loops: Lindblad stencil, RK4 drivers, moment ODEs, and
the stochastic trajectory ensemble.

The density matrix lives as a complex (da, db, da, db) array indexed
(ma, mb, na, nb) = <ma mb| rho |na nb>. Every generator term couples
(ma, na) only along the diagonal shifts (ma+1, na+1) / (ma-1, na-1), so
the HF coherence offset k = ma - na is conserved; propagation visits only
an explicit list of (ma, na) pairs (the active sectors), which for thermal
initial states is the k = 0 block.

Truncation convention: a a' on a d-level space is diag(1, .., d-1, 0)
(the top level has no upward channel), encoded in the f-tables so the
stencil matches exact sparse-matrix algebra entrywise.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# --------------------------------------------------------------------------
# coefficient-vector layout for the Lindblad stencil
CV_WA, CV_WB, CV_G, CV_ALPHA = 0, 1, 2, 3
CV_UP_A, CV_DOWN_A = 4, 5
CV_UP_BD, CV_DOWN_BD = 6, 7      # dressed LF channel (alpha applies)
CV_UP_B0, CV_DOWN_B0 = 8, 9     # bare background LF channel
CV_DEPH = 10                     # alpha^2 kappa_d
CV_LEN = 11

# observable-row layout produced by extract_obs
OBS_NA, OBS_Q, OBS_P, OBS_VAR = 0, 1, 2, 3
OBS_CNQ, OBS_CNP, OBS_NB = 4, 5, 6
OBS_NAQ, OBS_NAP, OBS_G2NUM = 7, 8, 9
OBS_TR_RE, OBS_TR_IM = 10, 11
OBS_LEN = 12


def sqrt_table(dim: int) -> np.ndarray:
    return np.sqrt(np.arange(dim + 1, dtype=np.float64))


def ff_table(dim: int) -> np.ndarray:
    """Diagonal of a a' on the truncated space: m+1 below the top, 0 at it."""
    f = np.arange(1, dim + 1, dtype=np.float64)
    f[-1] = 0.0
    return f


def coeff_vector(params, s: float) -> np.ndarray:
    """Stencil coefficients at gate value s."""
    r = params.bath_rates(s)
    cv = np.empty(CV_LEN)
    cv[CV_WA] = params.omega_a
    cv[CV_WB] = params.omega_b
    cv[CV_G] = params.g
    cv[CV_ALPHA] = params.alpha
    cv[CV_UP_A] = r.up_a
    cv[CV_DOWN_A] = r.down_a
    cv[CV_UP_BD] = r.up_b
    cv[CV_DOWN_BD] = r.down_b
    cv[CV_UP_B0] = r.up_b0
    cv[CV_DOWN_B0] = r.down_b0
    cv[CV_DEPH] = r.deph
    return cv


def all_pairs(da: int) -> np.ndarray:
    out = [(ma, na) for ma in range(da) for na in range(da)]
    return np.asarray(out, dtype=np.int64)


def sector_pairs(da: int, ks) -> np.ndarray:
    out = [(ma, na) for ma in range(da) for na in range(da) if (ma - na) in ks]
    if not out:
        raise ValueError("no active (ma, na) pairs")
    return np.asarray(out, dtype=np.int64)


def active_pairs(rho4: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Pairs spanning every HF coherence sector populated in rho4.

    Sectors are invariant under the generator, so the returned set is
    closed under propagation.
    """
    da = rho4.shape[0]
    ks = set()
    for ma in range(da):
        for na in range(da):
            if np.any(np.abs(rho4[ma, :, na, :]) > tol):
                ks.add(ma - na)
    if not ks:
        ks = {0}
    return sector_pairs(da, ks)


@njit(cache=True)
def lindblad_rhs(rho, out, pairs, sq, fa, fb, cv):
    """out = L[rho] on the listed (ma, na) pairs; other blocks untouched."""
    da = rho.shape[0]
    db = rho.shape[1]
    wa = cv[0]; wb = cv[1]; g = cv[2]; alpha = cv[3]
    kUa = cv[4]; kDa = cv[5]
    kUbd = cv[6]; kDbd = cv[7]
    kUb0 = cv[8]; kDb0 = cv[9]
    deph = cv[10]
    kUb = kUbd + kUb0
    kDb = kDbd + kDb0
    a2tot = alpha * alpha * (kUbd + kDbd) + deph
    half_kd = 0.5 * (kUbd + kDbd)
    for ip in range(pairs.shape[0]):
        ma = pairs[ip, 0]
        na = pairs[ip, 1]
        dk = ma - na
        r = rho[ma, :, na, :]
        o = out[ma, :, na, :]
        base_re = (-0.5 * kDa * (ma + na) - 0.5 * kUa * (fa[ma] + fa[na])
                   - 0.5 * a2tot * dk * dk)
        im_a = -wa * dk
        has_dn = ma + 1 < da and na + 1 < da
        gdn = kDa * sq[ma + 1] * sq[na + 1] if has_dn else 0.0
        rdn = rho[ma + 1, :, na + 1, :] if has_dn else r
        has_up = ma >= 1 and na >= 1
        gup = kUa * sq[ma] * sq[na] if has_up else 0.0
        rup = rho[ma - 1, :, na - 1, :] if has_up else r
        gma = g * ma
        gna = g * na
        c1 = complex(alpha * (half_kd * ma - kDbd * na), gma)
        c2 = complex(alpha * (half_kd * ma - kUbd * na), gma)
        c3 = complex(alpha * (half_kd * na - kDbd * ma), -gna)
        c4 = complex(alpha * (half_kd * na - kUbd * ma), -gna)
        for mb in range(db):
            fbm = fb[mb]
            for nb in range(db):
                v = complex(base_re - 0.5 * kDb * (mb + nb)
                            - 0.5 * kUb * (fbm + fb[nb]),
                            im_a - wb * (mb - nb)) * r[mb, nb]
                if mb + 1 < db:
                    v += (sq[mb + 1] * c1) * r[mb + 1, nb]
                if mb >= 1:
                    v += (sq[mb] * c2) * r[mb - 1, nb]
                if nb + 1 < db:
                    v += (sq[nb + 1] * c3) * r[mb, nb + 1]
                if nb >= 1:
                    v += (sq[nb] * c4) * r[mb, nb - 1]
                if mb + 1 < db and nb + 1 < db:
                    v += (kDb * sq[mb + 1] * sq[nb + 1]) * r[mb + 1, nb + 1]
                if mb >= 1 and nb >= 1:
                    v += (kUb * sq[mb] * sq[nb]) * r[mb - 1, nb - 1]
                v += gdn * rdn[mb, nb] + gup * rup[mb, nb]
                o[mb, nb] = v


@njit(cache=True)
def _axpy(dst, x, k, h, pairs):
    for ip in range(pairs.shape[0]):
        ma = pairs[ip, 0]
        na = pairs[ip, 1]
        d = dst[ma, :, na, :]
        xx = x[ma, :, na, :]
        kk = k[ma, :, na, :]
        for mb in range(d.shape[0]):
            for nb in range(d.shape[1]):
                d[mb, nb] = xx[mb, nb] + h * kk[mb, nb]


@njit(cache=True)
def rk4_lindblad(rho, nsteps, dt, pairs, sq, fa, fb, cv, k1, k2, k3, k4, tmp):
    """Advance rho by nsteps classical RK4 steps of the fixed generator."""
    for _ in range(nsteps):
        lindblad_rhs(rho, k1, pairs, sq, fa, fb, cv)
        _axpy(tmp, rho, k1, 0.5 * dt, pairs)
        lindblad_rhs(tmp, k2, pairs, sq, fa, fb, cv)
        _axpy(tmp, rho, k2, 0.5 * dt, pairs)
        lindblad_rhs(tmp, k3, pairs, sq, fa, fb, cv)
        _axpy(tmp, rho, k3, dt, pairs)
        lindblad_rhs(tmp, k4, pairs, sq, fa, fb, cv)
        h = dt / 6.0
        for ip in range(pairs.shape[0]):
            ma = pairs[ip, 0]
            na = pairs[ip, 1]
            rr = rho[ma, :, na, :]
            a1 = k1[ma, :, na, :]
            a2 = k2[ma, :, na, :]
            a3 = k3[ma, :, na, :]
            a4 = k4[ma, :, na, :]
            for mb in range(rr.shape[0]):
                for nb in range(rr.shape[1]):
                    rr[mb, nb] += h * (a1[mb, nb] + 2.0 * (a2[mb, nb] + a3[mb, nb])
                                       + a4[mb, nb])


@njit(cache=True)
def extract_obs(rho, sq, out):
    """Moment row from rho (layout per OBS_* constants)."""
    da = rho.shape[0]
    db = rho.shape[1]
    n_a = 0.0
    na2 = 0.0
    n_b = 0.0
    g2num = 0.0
    tr_re = 0.0
    tr_im = 0.0
    for ma in range(da):
        for mb in range(db):
            d = rho[ma, mb, ma, mb]
            pr = d.real
            tr_re += pr
            tr_im += d.imag
            n_a += ma * pr
            na2 += ma * ma * pr
            n_b += mb * pr
            g2num += mb * (mb - 1) * pr
    bsum = 0.0 + 0.0j
    nab = 0.0 + 0.0j
    for ma in range(da):
        for mb in range(1, db):
            z = sq[mb] * rho[ma, mb, ma, mb - 1]
            bsum += z
            nab += ma * z
    q = 2.0 * bsum.real
    p = 2.0 * bsum.imag
    naq = 2.0 * nab.real
    nap = 2.0 * nab.imag
    out[OBS_NA] = n_a
    out[OBS_Q] = q
    out[OBS_P] = p
    out[OBS_VAR] = na2 - n_a * n_a
    out[OBS_CNQ] = naq - n_a * q
    out[OBS_CNP] = nap - n_a * p
    out[OBS_NB] = n_b
    out[OBS_NAQ] = naq
    out[OBS_NAP] = nap
    out[OBS_G2NUM] = g2num
    out[OBS_TR_RE] = tr_re
    out[OBS_TR_IM] = tr_im


@njit(cache=True)
def mode_populations(rho, pa, pb):
    pa[:] = 0.0
    pb[:] = 0.0
    for ma in range(rho.shape[0]):
        for mb in range(rho.shape[1]):
            pr = rho[ma, mb, ma, mb].real
            pa[ma] += pr
            pb[mb] += pr


@njit(cache=True)
def hermiticity_defect4(rho):
    da = rho.shape[0]
    db = rho.shape[1]
    worst = 0.0
    for ma in range(da):
        for mb in range(db):
            for na in range(da):
                for nb in range(db):
                    d = abs(rho[ma, mb, na, nb] - np.conj(rho[na, nb, ma, mb]))
                    if d > worst:
                        worst = d
    return worst


@njit(cache=True)
def max_abs4(rho):
    flat = rho.ravel()
    worst = 0.0
    for i in range(flat.size):
        d = abs(flat[i])
        if d > worst:
            worst = d
    return worst


# --------------------------------------------------------------------------
# closed moment system (7 state variables: n_a, q, p, var_na, c_nq, c_np, n_b)

M_LEN = 7


@njit(cache=True)
def moment_rhs_core(y, dy, A, B, C, kb_tot, kb_src, wb, g, alpha, kb_d, quantum):
    n_a = y[0]; q = y[1]; p = y[2]; var = y[3]
    cnq = y[4]; cnp = y[5]; n_b = y[6]
    dy[0] = A - B * n_a
    dy[1] = wb * p - 0.5 * kb_tot * q + alpha * kb_d * n_a
    dy[2] = -wb * q - 0.5 * kb_tot * p + 2.0 * g * n_a
    dy[3] = A + (2.0 * A + B) * n_a - 2.0 * B * var
    if quantum:
        dy[4] = -C * cnq + wb * cnp + alpha * kb_d * var
        dy[5] = -C * cnp - wb * cnq + 2.0 * g * var
        corr_p = cnp
        corr_q = cnq
    else:
        dy[4] = 0.0
        dy[5] = 0.0
        corr_p = 0.0
        corr_q = 0.0
    dy[6] = (-kb_tot * n_b + kb_src + g * (corr_p + n_a * p)
             + 0.5 * alpha * kb_d * (corr_q + n_a * q))


@njit(cache=True)
def rk4_moments(y, nsteps, dt, coef, quantum, k1, k2, k3, k4, tmp):
    """coef = (A, B, C, kb_tot, kb_src, wb, g, alpha, kb_d)."""
    A = coef[0]; B = coef[1]; C = coef[2]
    kbt = coef[3]; kbs = coef[4]; wb = coef[5]
    g = coef[6]; al = coef[7]; kbd = coef[8]
    for _ in range(nsteps):
        moment_rhs_core(y, k1, A, B, C, kbt, kbs, wb, g, al, kbd, quantum)
        for i in range(M_LEN):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        moment_rhs_core(tmp, k2, A, B, C, kbt, kbs, wb, g, al, kbd, quantum)
        for i in range(M_LEN):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        moment_rhs_core(tmp, k3, A, B, C, kbt, kbs, wb, g, al, kbd, quantum)
        for i in range(M_LEN):
            tmp[i] = y[i] + dt * k3[i]
        moment_rhs_core(tmp, k4, A, B, C, kbt, kbs, wb, g, al, kbd, quantum)
        h = dt / 6.0
        for i in range(M_LEN):
            y[i] += h * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


# --------------------------------------------------------------------------
# counter-based RNG: keyed splitmix64 finalizer cascade + inverse-normal map
# ("splitmix64-invnorm-v1"). Each normal is a pure function of
# (seed, trajectory, step, lane), so ensembles are reproducible and
# order-independent by construction.

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MX1 = np.uint64(0xBF58476D1CE4E5B9)
_MX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = float(2.0 ** -53)

# Acklam rational approximation to the inverse normal CDF (|rel| < 1.2e-9).
_IA = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
       1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_IB = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
       6.680131188771972e+01, -1.328068155288572e+01)
_IC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
       -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ID = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
       3.754408661907416e+00)


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MX1
    z = (z ^ (z >> _S27)) * _MX2
    return z ^ (z >> _S31)


@njit(cache=True)
def inv_norm_cdf(u):
    if u < 0.02425:
        t = math.sqrt(-2.0 * math.log(u))
        return ((((((_IC[0] * t + _IC[1]) * t + _IC[2]) * t + _IC[3]) * t
                  + _IC[4]) * t + _IC[5])
                / ((((_ID[0] * t + _ID[1]) * t + _ID[2]) * t + _ID[3]) * t + 1.0))
    if u > 0.97575:
        t = math.sqrt(-2.0 * math.log(1.0 - u))
        return -((((((_IC[0] * t + _IC[1]) * t + _IC[2]) * t + _IC[3]) * t
                   + _IC[4]) * t + _IC[5])
                 / ((((_ID[0] * t + _ID[1]) * t + _ID[2]) * t + _ID[3]) * t + 1.0))
    s = u - 0.5
    r = s * s
    return ((((((_IA[0] * r + _IA[1]) * r + _IA[2]) * r + _IA[3]) * r
              + _IA[4]) * r + _IA[5]) * s
            / (((((_IB[0] * r + _IB[1]) * r + _IB[2]) * r + _IB[3]) * r
                + _IB[4]) * r + 1.0))


@njit(cache=True)
def counter_uniform(seed, traj, step, lane):
    z = seed
    z = _mix64(z + _GOLD * traj)
    z = _mix64(z + _GOLD * step)
    z = _mix64(z + _GOLD * lane)
    return (float(z >> _S11) + 0.5) * _INV53


@njit(cache=True)
def counter_normal(seed, traj, step, lane):
    return inv_norm_cdf(counter_uniform(seed, traj, step, lane))


# accumulator columns of the trajectory ensemble
ACC_XA, ACC_YA, ACC_XB, ACC_YB = 0, 1, 2, 3
ACC_NA, ACC_NB, ACC_NA2, ACC_NB2 = 4, 5, 6, 7
ACC_NAXB, ACC_NAYB = 8, 9
ACC_XB2, ACC_YB2 = 10, 11
ACC_NANB, ACC_XBYB = 12, 13
ACC_LEN = 14


@njit(cache=True)
def langevin_ensemble(seed_u, n_traj, traj0,
                      std_init, step_dt, step_kpa, step_stdh, step_stda,
                      step_stdb, sample_steps,
                      wa, wb, g, kb_half, acc):
    """Roll n_traj trajectories through the full step table, accumulating
    raw sums of the ACC_* products at the listed sample steps.

    Quadrature convention: alpha_x = (X_x + i Y_x)/sqrt2, n_x = |alpha_x|^2,
    q = sqrt2 <X_b>, p = sqrt2 <Y_b>. Euler-Maruyama with per-step noise
    std tables (hot lane a, static lane a, lane b; two components each).
    """
    nsteps = step_dt.shape[0]
    gs2 = g * math.sqrt(2.0)
    gh = g / math.sqrt(2.0)
    seed = np.uint64(seed_u)
    for jt in range(n_traj):
        traj = np.uint64(traj0 + jt)
        xa = std_init * counter_normal(seed, traj, np.uint64(0), np.uint64(0))
        ya = std_init * counter_normal(seed, traj, np.uint64(0), np.uint64(1))
        xb = std_init * counter_normal(seed, traj, np.uint64(0), np.uint64(2))
        yb = std_init * counter_normal(seed, traj, np.uint64(0), np.uint64(3))
        ptr = 0
        for k in range(nsteps):
            if ptr < sample_steps.shape[0] and sample_steps[ptr] == k:
                na = 0.5 * (xa * xa + ya * ya)
                nb = 0.5 * (xb * xb + yb * yb)
                acc[ptr, ACC_XA] += xa
                acc[ptr, ACC_YA] += ya
                acc[ptr, ACC_XB] += xb
                acc[ptr, ACC_YB] += yb
                acc[ptr, ACC_NA] += na
                acc[ptr, ACC_NB] += nb
                acc[ptr, ACC_NA2] += na * na
                acc[ptr, ACC_NB2] += nb * nb
                acc[ptr, ACC_NAXB] += na * xb
                acc[ptr, ACC_NAYB] += na * yb
                acc[ptr, ACC_XB2] += xb * xb
                acc[ptr, ACC_YB2] += yb * yb
                acc[ptr, ACC_NANB] += na * nb
                acc[ptr, ACC_XBYB] += xb * yb
                ptr += 1
            dt = step_dt[k]
            kpa = step_kpa[k]
            sh = step_stdh[k]
            sa = step_stda[k]
            sb = step_stdb[k]
            kstep = np.uint64(k + 1)
            w = wa - gs2 * xb
            dxa = (w * ya - kpa * xa) * dt \
                + sh * counter_normal(seed, traj, kstep, np.uint64(0)) \
                + sa * counter_normal(seed, traj, kstep, np.uint64(2))
            dya = (-w * xa - kpa * ya) * dt \
                + sh * counter_normal(seed, traj, kstep, np.uint64(1)) \
                + sa * counter_normal(seed, traj, kstep, np.uint64(3))
            dxb = (wb * yb - kb_half * xb) * dt \
                + sb * counter_normal(seed, traj, kstep, np.uint64(4))
            dyb = (-wb * xb - kb_half * yb + gh * (xa * xa + ya * ya)) * dt \
                + sb * counter_normal(seed, traj, kstep, np.uint64(5))
            xa += dxa
            ya += dya
            xb += dxb
            yb += dyb
        if ptr < sample_steps.shape[0] and sample_steps[ptr] == nsteps:
            na = 0.5 * (xa * xa + ya * ya)
            nb = 0.5 * (xb * xb + yb * yb)
            acc[ptr, ACC_XA] += xa
            acc[ptr, ACC_YA] += ya
            acc[ptr, ACC_XB] += xb
            acc[ptr, ACC_YB] += yb
            acc[ptr, ACC_NA] += na
            acc[ptr, ACC_NB] += nb
            acc[ptr, ACC_NA2] += na * na
            acc[ptr, ACC_NB2] += nb * nb
            acc[ptr, ACC_NAXB] += na * xb
            acc[ptr, ACC_NAYB] += na * yb
            acc[ptr, ACC_XB2] += xb * xb
            acc[ptr, ACC_YB2] += yb * yb
            acc[ptr, ACC_NANB] += na * nb
            acc[ptr, ACC_XBYB] += xb * yb


@njit(cache=True)
def langevin_single(seed_u, traj, std_init, step_dt, step_kpa, step_stdh,
                    step_stda, step_stdb, wa, wb, g, kb_half, out):
    """One trajectory, full (nsteps+1, 4) quadrature record (for tests)."""
    nsteps = step_dt.shape[0]
    gs2 = g * math.sqrt(2.0)
    gh = g / math.sqrt(2.0)
    seed = np.uint64(seed_u)
    tr = np.uint64(traj)
    xa = std_init * counter_normal(seed, tr, np.uint64(0), np.uint64(0))
    ya = std_init * counter_normal(seed, tr, np.uint64(0), np.uint64(1))
    xb = std_init * counter_normal(seed, tr, np.uint64(0), np.uint64(2))
    yb = std_init * counter_normal(seed, tr, np.uint64(0), np.uint64(3))
    out[0, 0] = xa; out[0, 1] = ya; out[0, 2] = xb; out[0, 3] = yb
    for k in range(nsteps):
        dt = step_dt[k]
        kpa = step_kpa[k]
        sh = step_stdh[k]
        sa = step_stda[k]
        sb = step_stdb[k]
        kstep = np.uint64(k + 1)
        w = wa - gs2 * xb
        dxa = (w * ya - kpa * xa) * dt \
            + sh * counter_normal(seed, tr, kstep, np.uint64(0)) \
            + sa * counter_normal(seed, tr, kstep, np.uint64(2))
        dya = (-w * xa - kpa * ya) * dt \
            + sh * counter_normal(seed, tr, kstep, np.uint64(1)) \
            + sa * counter_normal(seed, tr, kstep, np.uint64(3))
        dxb = (wb * yb - kb_half * xb) * dt \
            + sb * counter_normal(seed, tr, kstep, np.uint64(4))
        dyb = (-wb * xb - kb_half * yb + gh * (xa * xa + ya * ya)) * dt \
            + sb * counter_normal(seed, tr, kstep, np.uint64(5))
        xa += dxa
        ya += dya
        xb += dxb
        yb += dyb
        out[k + 1, 0] = xa; out[k + 1, 1] = ya
        out[k + 1, 2] = xb; out[k + 1, 3] = yb
