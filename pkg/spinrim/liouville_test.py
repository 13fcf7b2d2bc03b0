"""Unit tests for the vectorized Lindblad representation."""

import numpy as np
import pytest
import scipy.linalg

from spinrim.liouville import (
    LiouvilleSystem,
    dephasing_superop,
    devectorize,
    hamiltonian_superop,
    hermitian_basis,
    vectorize
)
from spinrim.network import Controller, SpinNetwork, Topology, \
    build_hamiltonian
from spinrim.operators import commutator_norm, excitation_density_matrix, \
    is_hermitian

PAULI_X = np.array([[0., 1.], [1., 0.]])
PAULI_Y = np.array([[0., -1j], [1j, 0.]])
PAULI_Z = np.diag([1., -1.])


def test_qubit_basis_is_scaled_pauli():
    """Tests the N = 2 basis is {I, X, Y, Z} / sqrt(2) in that order."""
    basis = hermitian_basis(2)
    correct = [np.identity(2), PAULI_X, PAULI_Y, PAULI_Z]
    assert len(basis) == 4
    for sigma, pauli in zip(basis.matrices, correct):
        assert np.allclose(sigma, pauli / np.sqrt(2))


@pytest.mark.parametrize("dimension", [2, 3, 4, 6])
def test_basis_orthonormal_and_hermitian(dimension):
    """Tests Tr(sigma_j sigma_k) = delta_jk and Hermiticity."""
    basis = hermitian_basis(dimension)
    assert len(basis) == dimension ** 2
    assert np.allclose(basis.gram(), np.identity(dimension ** 2), atol=1e-12)
    for sigma in basis.matrices:
        assert is_hermitian(sigma)
    assert np.allclose(basis.matrices[0],
                       np.identity(dimension) / np.sqrt(dimension))


def test_qutrit_basis_structure():
    """Tests three symmetric, three antisymmetric and two diagonal elements."""
    matrices = hermitian_basis(3).matrices[1:]
    symmetric = sum(np.allclose(m.imag, 0.) and not np.allclose(np.diag(
        np.diag(m)), m) for m in matrices)
    antisymmetric = sum(not np.allclose(m.imag, 0.) for m in matrices)
    diagonal = sum(np.allclose(np.diag(np.diag(m)), m) for m in matrices)
    assert (symmetric, antisymmetric, diagonal) == (3, 3, 2)
    for m in matrices:
        assert np.isclose(np.trace(m), 0.)


def test_basis_invalid_dimension():
    """Tests the basis needs N >= 2."""
    with pytest.raises(ValueError):
        hermitian_basis(1)


def test_hamiltonian_superop_zero():
    """Tests H = 0 gives A = 0."""
    assert np.array_equal(
        hamiltonian_superop(np.zeros((3, 3)), hermitian_basis(3)),
        np.zeros((9, 9))
    )


def test_hamiltonian_superop_pauli_z():
    """Tests H = Z rotates the (X, Y) components with rate two."""
    superop = hamiltonian_superop(PAULI_Z, hermitian_basis(2))
    correct = np.zeros((4, 4))
    correct[1, 2] = -2.
    correct[2, 1] = 2.
    assert np.allclose(superop, correct, atol=1e-12)


def test_hamiltonian_superop_antisymmetric():
    """Tests A^T = -A for random controllers."""
    rng = np.random.default_rng(11)
    for topology in Topology:
        net = SpinNetwork(5, topology)
        ctrl = Controller(rng.uniform(-10, 10, 5), 1., output_spin=3)
        superop = hamiltonian_superop(build_hamiltonian(net, ctrl),
                                      hermitian_basis(5))
        assert np.allclose(superop.T, -superop, atol=1e-12)


def test_dephasing_superop_pauli_z():
    """Tests V = Z gives S = diag(0, -2, -2, 0)."""
    superop = dephasing_superop(PAULI_Z, hermitian_basis(2))
    assert np.allclose(superop, np.diag([0., -2., -2., 0.]), atol=1e-12)


def test_dephasing_superop_trivial_operators():
    """Tests V = 0 and V = I dephase nothing."""
    basis = hermitian_basis(3)
    assert np.allclose(dephasing_superop(np.zeros((3, 3)), basis), 0.)
    assert np.allclose(dephasing_superop(np.identity(3), basis), 0.,
                       atol=1e-12)


def test_dephasing_superop_properties():
    """Tests S is symmetric, negative semidefinite and trace preserving."""
    rng = np.random.default_rng(3)
    basis = hermitian_basis(4)
    matrix = rng.normal(size=(4, 4))
    operator = matrix + matrix.T
    superop = dephasing_superop(operator, basis)
    assert np.allclose(superop, superop.T)
    assert np.max(np.linalg.eigvalsh(superop)) <= 1e-12 * np.abs(superop).max()
    identity = vectorize(np.identity(4), basis)
    assert np.allclose(superop @ identity, 0., atol=1e-12)


def test_dephasing_superop_non_hermitian():
    """Tests non-Hermitian operators are rejected."""
    with pytest.raises(ValueError):
        dephasing_superop(np.array([[0., 1.], [0., 0.]]), hermitian_basis(2))


def test_dimension_mismatch():
    """Tests operators must match the basis dimension."""
    with pytest.raises(ValueError):
        hamiltonian_superop(np.zeros((3, 3)), hermitian_basis(2))

    with pytest.raises(ValueError):
        vectorize(np.zeros((3, 3)), hermitian_basis(2))

    with pytest.raises(ValueError):
        devectorize(np.zeros(5), hermitian_basis(2))


def test_vectorize_maximally_mixed():
    """Tests I / N maps to (1 / sqrt(N), 0, ..., 0)."""
    for dimension in (2, 5):
        vector = vectorize(np.identity(dimension) / dimension,
                           hermitian_basis(dimension))
        correct = np.zeros(dimension ** 2)
        correct[0] = 1. / np.sqrt(dimension)
        assert np.allclose(vector, correct, atol=1e-14)


def test_vectorize_pure_states_unit_norm():
    """Tests pure states map to unit vectors and mixed states inside."""
    basis = hermitian_basis(4)
    for spin in range(1, 5):
        vector = vectorize(excitation_density_matrix(spin, 4), basis)
        assert np.isclose(np.linalg.norm(vector), 1.)
        assert np.isclose(vector[0], 0.5)
    mixed = vectorize(np.diag([0.5, 0.5, 0., 0.]), basis)
    assert np.linalg.norm(mixed) < 1.


def test_vectorize_round_trip():
    """Tests devectorize inverts vectorize on random Hermitian matrices."""
    rng = np.random.default_rng(5)
    basis = hermitian_basis(5)
    matrix = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = matrix + matrix.conj().T
    assert np.max(np.abs(devectorize(vectorize(rho, basis), basis) - rho)) \
        < 1e-13


def test_commuting_dephasing_operator():
    """Tests [A, S] = 0 when V shares the eigenprojectors of H."""
    rng = np.random.default_rng(9)
    net = SpinNetwork(4)
    ctrl = Controller(rng.uniform(-5, 5, 4), 1., output_spin=4)
    hamiltonian = build_hamiltonian(net, ctrl)
    basis = hermitian_basis(4)
    operator = sum(c * p for c, p in zip(rng.normal(size=4),
                                         hamiltonian.projectors))
    superop = dephasing_superop(operator, basis)
    assert commutator_norm(hamiltonian_superop(hamiltonian, basis),
                           superop) < 1e-10


def test_fidelity_matches_density_matrix_side():
    """Tests c exp(t A) r0 = Tr(rho_out rho(t)) from the unitary evolution."""
    rng = np.random.default_rng(2)
    net = SpinNetwork(5, Topology.RING)
    ctrl = Controller(rng.uniform(-3, 3, 5), 2.3, output_spin=3)
    system = LiouvilleSystem.from_problem(net, ctrl)
    time = 2.3
    vector_side = system.target @ scipy.linalg.expm(time * system.superop) \
        @ system.initial

    unitary = scipy.linalg.expm(-1j * time * system.hamiltonian.matrix)
    rho = unitary @ excitation_density_matrix(1, 5) @ unitary.conj().T
    matrix_side = np.trace(excitation_density_matrix(3, 5) @ rho).real
    assert abs(vector_side - matrix_side) < 1e-10


def test_liouville_system_from_problem():
    """Tests the LTI data of a transfer problem."""
    net = SpinNetwork(3)
    ctrl = Controller(np.zeros(3), 1., output_spin=3)
    system = LiouvilleSystem.from_problem(net, ctrl)
    assert system.dimension == 3
    assert system.superop.shape == (9, 9)
    assert np.isclose(np.linalg.norm(system.initial), 1.)
    assert 0. <= system.target @ system.initial <= 1.
    assert np.allclose(system.identity_vector(),
                       vectorize(np.identity(3), system.basis))
