"""Operators and density matrices on truncated Fock spaces.

Single-mode ladder operators are built as sparse matrices; composite-space
operators use a fixed Kronecker convention with the high-frequency (HF)
factor first and the low-frequency (LF) factor second, so the flat index of
the basis state |m_a, m_b> is m_a * dim_b + m_b.

Quadrature conventions for the LF mode:

    q = b + b'           (displacement)
    p = i (b' - b)       (momentum)

where b' denotes the creation operator. The momentum sign is fixed so that
the Heisenberg equations of motion reproduce the closed moment system used
by the rest of the package (dq/dt = w_b p - ..., dp/dt = -w_b q + 2 g n_a);
the cross-validation test between the master-equation and moment
integrators pins this convention numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DensityMatrixError, DimensionError, DomainError

# Density-matrix invariant tolerances (double precision headroom at the
# dimensions this package uses).
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = -1e-8


@dataclass(frozen=True)
class ModeDim:
    """Truncation dimensions of the two-mode Fock space (HF first)."""

    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 2 or self.dim_b < 2:
            raise DimensionError(
                f"mode dimensions must be >= 2, got ({self.dim_a}, {self.dim_b})"
            )

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b


def destroy(dim: int) -> sp.csr_matrix:
    """Annihilation operator: <n-1|a|n> = sqrt(n) on the superdiagonal."""
    if dim < 2:
        raise DimensionError(f"operator dimension must be >= 2, got {dim}")
    data = np.sqrt(np.arange(1, dim, dtype=float))
    return sp.diags(data, offsets=1, shape=(dim, dim), dtype=complex).tocsr()


def create(dim: int) -> sp.csr_matrix:
    """Creation operator, the adjoint of :func:`destroy`."""
    return destroy(dim).conj().T.tocsr()


def number(dim: int) -> sp.csr_matrix:
    """Number operator diag(0, 1, ..., dim-1)."""
    if dim < 2:
        raise DimensionError(f"operator dimension must be >= 2, got {dim}")
    return sp.diags(np.arange(dim, dtype=float), dtype=complex).tocsr()


def identity(dim: int) -> sp.csr_matrix:
    return sp.identity(dim, dtype=complex, format="csr")


def position(dim: int) -> sp.csr_matrix:
    """q = b + b' for a single mode."""
    b = destroy(dim)
    return (b + b.conj().T).tocsr()


def momentum(dim: int) -> sp.csr_matrix:
    """p = i (b' - b) for a single mode."""
    b = destroy(dim)
    return (1j * (b.conj().T - b)).tocsr()


def tensor(left, right) -> sp.csr_matrix:
    """Kronecker product, HF factor first, LF factor second."""
    return sp.kron(sp.csr_matrix(left), sp.csr_matrix(right), format="csr")


def lift_a(op, dims: ModeDim) -> sp.csr_matrix:
    """Embed a single-mode HF operator into the composite space."""
    return tensor(op, identity(dims.dim_b))


def lift_b(op, dims: ModeDim) -> sp.csr_matrix:
    """Embed a single-mode LF operator into the composite space."""
    return tensor(identity(dims.dim_a), op)


def thermal_density(dim: int, nbar: float) -> np.ndarray:
    """Thermal (geometric) density matrix, renormalized after truncation.

    P(n) proportional to (nbar / (1 + nbar))^n; for nbar = 0 this is the
    vacuum projector.
    """
    if nbar < 0:
        raise DomainError(f"thermal occupancy must be >= 0, got {nbar}")
    if dim < 2:
        raise DimensionError(f"operator dimension must be >= 2, got {dim}")
    if nbar == 0.0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        ratio = nbar / (1.0 + nbar)
        p = ratio ** np.arange(dim, dtype=float)
        p /= p.sum()
    return np.diag(p.astype(complex))


def thermal_product(dims: ModeDim, nbar_a: float, nbar_b: float) -> np.ndarray:
    """Product of thermal states on the composite space."""
    return np.kron(thermal_density(dims.dim_a, nbar_a), thermal_density(dims.dim_b, nbar_b))


def expectation(op, rho: np.ndarray) -> complex:
    """Tr(rho op) for a sparse or dense operator against a dense rho."""
    if op.shape[0] != rho.shape[0] or rho.shape[0] != rho.shape[1]:
        raise DimensionError(
            f"operator shape {op.shape} incompatible with state shape {rho.shape}"
        )
    if sp.issparse(op):
        coo = op.tocoo()
        return complex(np.sum(coo.data * rho[coo.col, coo.row]))
    return complex(np.trace(rho @ op))


def real_expectation(op, rho: np.ndarray, imag_tol: float = 1e-9) -> float:
    """Expectation of a Hermitian observable; asserts the imaginary part is noise."""
    val = expectation(op, rho)
    if abs(val.imag) > imag_tol:
        raise DensityMatrixError(
            f"expectation of Hermitian operator has imaginary part {val.imag:.3e}"
        )
    return val.real


def partial_trace(rho: np.ndarray, dims: ModeDim, keep: str) -> np.ndarray:
    """Reduced density matrix over one mode.

    keep="LF" traces out the HF mode, keep="HF" traces out the LF mode.
    """
    da, db = dims.dim_a, dims.dim_b
    if rho.shape != (da * db, da * db):
        raise DimensionError(
            f"state shape {rho.shape} does not match dims ({da}x{db})"
        )
    r4 = rho.reshape(da, db, da, db)
    if keep == "LF":
        return np.einsum("ambn->mn", r4)
    if keep == "HF":
        return np.einsum("ambm->ab", r4)
    raise DomainError(f"keep must be 'HF' or 'LF', got {keep!r}")


def hermiticity_defect(rho: np.ndarray) -> float:
    return float(np.max(np.abs(rho - rho.conj().T)))


def trace_defect(rho: np.ndarray) -> float:
    return abs(complex(np.trace(rho)) - 1.0)


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])


def check_density_matrix(rho: np.ndarray, check_positivity: bool = False, where: str = ""):
    """Enforce the density-matrix invariants, raising on violation.

    Positivity costs an eigendecomposition and is only checked on demand.
    """
    ctx = f" ({where})" if where else ""
    h = hermiticity_defect(rho)
    if h > HERMITICITY_TOL:
        raise DensityMatrixError(f"hermiticity defect {h:.3e} > {HERMITICITY_TOL}{ctx}")
    t = trace_defect(rho)
    if t > TRACE_TOL:
        raise DensityMatrixError(f"trace defect {t:.3e} > {TRACE_TOL}{ctx}")
    if check_positivity:
        ev = min_eigenvalue(rho)
        if ev < POSITIVITY_TOL:
            raise DensityMatrixError(f"min eigenvalue {ev:.3e} < {POSITIVITY_TOL}{ctx}")


def commutator_defect(dim: int) -> sp.csr_matrix:
    """[a, a'] - I on the truncated space.

    Equals -dim |top><top|: the canonical commutation relation holds
    everywhere except the top Fock level, where truncation removes the
    (dim)-quantum channel.
    """
    a = destroy(dim)
    comm = (a @ a.conj().T - a.conj().T @ a).tocsr()
    return (comm - identity(dim)).tocsr()
