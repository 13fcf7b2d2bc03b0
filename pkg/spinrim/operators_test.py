"""Unit tests for operators."""

import numpy as np
import pytest

from spinrim.operators import (
    commutator,
    commutator_norm,
    excitation_density_matrix,
    excitation_state,
    is_hermitian,
    is_projector,
    is_symmetric,
    validate_density_matrix
)


def test_is_hermitian():
    """Tests Hermiticity checks on Pauli matrices."""
    pauli_y = np.array([[0., -1j], [1j, 0.]])
    assert is_hermitian(pauli_y)
    assert not is_hermitian(np.array([[0., 1.], [0., 0.]]))
    assert not is_symmetric(pauli_y)
    assert is_symmetric(np.array([[1., 2.], [2., 3.]]))


def test_invalid_matrices():
    """Tests exceptions are raised for invalid matrix arguments."""
    with pytest.raises(TypeError):
        is_hermitian("matrix")

    # Must be square
    with pytest.raises(ValueError):
        is_hermitian(np.ones((2, 3)))


def test_is_projector():
    """Tests projector checks."""
    assert is_projector(np.diag([1., 0., 1.]))
    assert is_projector(np.full((2, 2), 0.5))
    assert not is_projector(np.diag([2., 0.]))


def test_commutator():
    """Tests [X, Y] = 2iZ and the commutator norm."""
    x = np.array([[0., 1.], [1., 0.]])
    y = np.array([[0., -1j], [1j, 0.]])
    z = np.diag([1., -1.])
    assert np.allclose(commutator(x, y), 2j * z)
    assert np.isclose(commutator_norm(x, y), 2 * np.sqrt(2))
    assert commutator_norm(z, np.diag([3., 4.])) == 0.


def test_excitation_state():
    """Tests spins are counted from one."""
    state = excitation_state(spin=1, size=3)
    assert np.array_equal(state, np.array([1., 0., 0.]))
    state = excitation_state(spin=3, size=3)
    assert np.array_equal(state, np.array([0., 0., 1.]))


def test_excitation_state_invalid_args():
    """Tests exceptions for spins outside the network."""
    with pytest.raises(ValueError):
        excitation_state(spin=0, size=3)

    with pytest.raises(ValueError):
        excitation_state(spin=4, size=3)

    with pytest.raises(ValueError):
        excitation_state(spin=1, size=0)


def test_excitation_density_matrix():
    """Tests |n><n| is a valid pure density matrix."""
    for spin in (1, 2, 4):
        rho = excitation_density_matrix(spin, size=4)
        correct = np.zeros((4, 4))
        correct[spin - 1, spin - 1] = 1.
        assert np.allclose(rho, correct)
        assert is_projector(rho)
        validate_density_matrix(rho)


def test_validate_density_matrix():
    """Tests invalid density matrices are rejected."""
    validate_density_matrix(np.identity(3) / 3)

    # Trace two
    with pytest.raises(ValueError):
        validate_density_matrix(np.identity(2))

    # Not positive
    with pytest.raises(ValueError):
        validate_density_matrix(np.diag([1.5, -0.5]))
