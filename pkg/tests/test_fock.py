"""Operator algebra and state constructors on truncated Fock spaces."""
import numpy as np
import pytest

from ottosim.errors import DensityMatrixError, DimensionError, DomainError
from ottosim.fock import (
    ModeDim,
    check_density_matrix,
    commutator_defect,
    create,
    destroy,
    expectation,
    hermiticity_defect,
    identity,
    lift_a,
    lift_b,
    min_eigenvalue,
    momentum,
    number,
    partial_trace,
    position,
    tensor,
    thermal_density,
    thermal_product,
    trace_defect,
)


def test_ladder_relations():
    dim = 7
    b = destroy(dim).toarray()
    bd = create(dim).toarray()
    n = number(dim).toarray()
    assert np.allclose(bd, b.conj().T)
    assert np.allclose(bd @ b, n)
    # [b, b'] = 1 everywhere except the truncation corner
    comm = b @ bd - bd @ b
    expected = np.eye(dim)
    expected[-1, -1] = -(dim - 1)
    assert np.allclose(comm, expected)
    assert np.allclose(commutator_defect(dim).toarray(), comm - np.eye(dim))


def test_quadrature_conventions():
    dim = 6
    b = destroy(dim).toarray()
    q = position(dim).toarray()
    p = momentum(dim).toarray()
    assert np.allclose(q, b + b.conj().T)
    assert np.allclose(p, 1j * (b.conj().T - b))
    assert hermiticity_defect(q) == 0.0
    assert hermiticity_defect(p) < 1e-15


def test_mode_dim_validation():
    dims = ModeDim(3, 5)
    assert dims.dim == 15
    with pytest.raises(DimensionError):
        ModeDim(0, 5)
    with pytest.raises(DimensionError):
        ModeDim(3, -1)


def test_lift_and_tensor_layout():
    dims = ModeDim(2, 3)
    na = lift_a(number(2), dims).toarray()
    nb = lift_b(number(3), dims).toarray()
    # HF index varies slowest: |na, nb> at flat index na*dim_b + nb
    assert np.allclose(np.diag(na), [0, 0, 0, 1, 1, 1])
    assert np.allclose(np.diag(nb), [0, 1, 2, 0, 1, 2])
    full = tensor(number(2), number(3)).toarray()
    assert np.allclose(full, na @ nb)


def test_thermal_density_moments():
    dim = 40
    nbar = 0.3
    rho = thermal_density(dim, nbar)
    assert abs(np.trace(rho).real - 1.0) < 1e-12
    n_mean = expectation(number(dim), rho).real
    assert abs(n_mean - nbar) < 1e-9
    # geometric distribution: P(n+1)/P(n) = nbar/(1+nbar)
    ratio = rho[1, 1] / rho[0, 0]
    assert abs(ratio - nbar / (1 + nbar)) < 1e-12
    # thermal variance n(n+1)
    n2 = expectation(number(dim) @ number(dim), rho).real
    assert abs((n2 - n_mean ** 2) - nbar * (nbar + 1)) < 1e-8


def test_thermal_density_ground_state():
    rho = thermal_density(5, 0.0)
    assert rho[0, 0] == 1.0
    assert np.sum(np.abs(rho)) == 1.0
    with pytest.raises(DomainError):
        thermal_density(5, -0.1)


def test_partial_trace_product_state():
    dims = ModeDim(4, 6)
    rho = thermal_product(dims, 0.2, 0.5)
    rho_a = partial_trace(rho, dims, keep="HF")
    rho_b = partial_trace(rho, dims, keep="LF")
    assert np.allclose(rho_a, thermal_density(4, 0.2), atol=1e-12)
    assert np.allclose(rho_b, thermal_density(6, 0.5), atol=1e-12)
    with pytest.raises(DomainError):
        partial_trace(rho, dims, keep="nope")


def test_partial_trace_correlated_state():
    # Bell-like correlated state: partial traces are maximally mixed
    dims = ModeDim(2, 2)
    psi = np.zeros(4)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    rho = np.outer(psi, psi)
    rho_a = partial_trace(rho, dims, keep="HF")
    assert np.allclose(rho_a, 0.5 * np.eye(2), atol=1e-12)


def test_density_matrix_checks():
    dims = ModeDim(2, 2)
    rho = thermal_product(dims, 0.1, 0.1)
    check_density_matrix(rho, check_positivity=True)
    assert trace_defect(rho) < 1e-14
    assert min_eigenvalue(rho) > 0
    bad = rho * 1.5
    with pytest.raises(DensityMatrixError):
        check_density_matrix(bad)
    asym = rho.astype(complex).copy()
    asym[0, 1] += 1e-3
    with pytest.raises(DensityMatrixError):
        check_density_matrix(asym)


def test_expectation_identity_is_trace():
    dims = ModeDim(3, 3)
    rho = thermal_product(dims, 0.4, 0.7)
    val = expectation(identity(9), rho)
    assert abs(val - 1.0) < 1e-12
