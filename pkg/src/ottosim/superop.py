"""Vectorized Liouvillian built from sparse Kronecker products.

Row-major vectorization: vec(rho)[i*N + j] = rho[i, j], so
vec(A rho B) = kron(A, B.T) vec(rho). This module is the independent
cross-check of the compiled stencil (same generator assembled from plain
matrix algebra), the dense matrix-exponential oracle, and the direct
steady-state solver.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import expm

from .errors import ConvergenceError
from .fock import ModeDim, destroy, identity, lift_a, lift_b, number, position


def build_hamiltonian(params, dims: ModeDim):
    """H = omega_a n_a + omega_b n_b - g n_a (b + b'), sparse CSR."""
    na = lift_a(number(dims.dim_a), dims)
    nb = lift_b(number(dims.dim_b), dims)
    qb = lift_b(position(dims.dim_b), dims)
    h = params.omega_a * na + params.omega_b * nb - params.g * (na @ qb)
    return h.tocsr()


def collapse_channels(params, dims: ModeDim, s: float):
    """(rate, operator) pairs of the dissipator at gate value s.

    Zero-rate channels are dropped. The LF channel uses the displaced
    operator b - alpha n_a in the dressed model (alpha = 0 recovers the
    local one); background channels stay undressed.
    """
    r = params.bath_rates(s)
    a = lift_a(destroy(dims.dim_a), dims)
    ad = a.conj().T.tocsr()
    b = lift_b(destroy(dims.dim_b), dims)
    bd = b.conj().T.tocsr()
    na_op = lift_a(number(dims.dim_a), dims)
    alpha = params.alpha
    bdr = (b - alpha * na_op).tocsr()
    bdr_d = (bd - alpha * na_op).tocsr()
    chans = [
        (r.down_a, a),
        (r.up_a, ad),
        (r.down_b, bdr),
        (r.up_b, bdr_d),
        (r.down_b0, b),
        (r.up_b0, bd),
        (r.deph, na_op),
    ]
    return [(rate, op) for rate, op in chans if rate > 0.0]


def liouvillian_matrix(params, dims: ModeDim, s: float):
    """Full N^2 x N^2 sparse generator at gate value s (CSR, complex)."""
    n = dims.dim
    eye = identity(n)
    h = build_hamiltonian(params, dims)
    lv = -1j * (sp.kron(h, eye, format="csr")
                - sp.kron(eye, h.T, format="csr"))
    for rate, c in collapse_channels(params, dims, s):
        cdc = (c.conj().T @ c).tocsr()
        lv = lv + rate * (sp.kron(c, c.conj(), format="csr")
                          - 0.5 * sp.kron(cdc, eye, format="csr")
                          - 0.5 * sp.kron(eye, cdc.T, format="csr"))
    return lv.tocsr()


def expm_propagate(rho0: np.ndarray, params, dims: ModeDim, t: float,
                   s: float) -> np.ndarray:
    """Dense matrix-exponential evolution (oracle; small dims only)."""
    n = dims.dim
    lv = liouvillian_matrix(params, dims, s).toarray()
    vec = np.asarray(rho0, dtype=complex).reshape(n * n)
    return (expm(lv * t) @ vec).reshape(n, n)


def sector_indices(dims: ModeDim, k: int = 0) -> np.ndarray:
    """Vectorized indices of the HF coherence sector ma - na = k."""
    da, db = dims.dim_a, dims.dim_b
    n = dims.dim
    out = []
    for ma in range(da):
        na = ma - k
        if na < 0 or na >= da:
            continue
        for mb in range(db):
            i = ma * db + mb
            for nb in range(db):
                out.append(i * n + (na * db + nb))
    return np.asarray(out, dtype=np.int64)


def steady_nullspace(params, dims: ModeDim, s: float = 1.0) -> np.ndarray:
    """Unique steady state from the generator's nullspace.

    The HF coherence sectors decouple and only ma = na carries trace, so
    the solve is restricted to that sector; one redundant row is replaced
    by the trace-normalization row.
    """
    da, db = dims.dim_a, dims.dim_b
    lv = liouvillian_matrix(params, dims, s)
    idx = sector_indices(dims, 0)
    sub = lv[idx][:, idx].tolil()
    trace_pos = np.array(
        [j for j, _ in enumerate(idx)
         if (j % (db * db)) // db == (j % (db * db)) % db])
    sub[0, :] = 0.0
    for j in trace_pos:
        sub[0, j] = 1.0
    rhs = np.zeros(idx.size, dtype=complex)
    rhs[0] = 1.0
    x = spla.spsolve(sub.tocsc(), rhs)
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("steady-state solve returned non-finite values")
    n = dims.dim
    rho = np.zeros((n * n,), dtype=complex)
    rho[idx] = x
    rho = rho.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return rho
