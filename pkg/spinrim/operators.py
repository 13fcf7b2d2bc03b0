"""Helper checks and common operators on the single excitation subspace."""

from typing import Optional

import cirq
import numpy as np


def _as_square_matrix(matrix: np.ndarray) -> np.ndarray:
    """Returns the input as a square two-dimensional numpy array."""
    if not isinstance(matrix, (list, tuple, np.ndarray)):
        raise TypeError("Invalid type for matrix.")

    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(
            f"Matrix should be square but has shape {matrix.shape}."
        )
    return matrix


def is_hermitian(matrix: np.ndarray, atol: float = 1e-12) -> bool:
    """Returns True if the matrix is Hermitian, else False."""
    matrix = _as_square_matrix(matrix)
    return np.allclose(matrix.conj().T, matrix, atol=atol, rtol=0.)


def is_symmetric(matrix: np.ndarray, atol: float = 0.) -> bool:
    """Returns True if the (real) matrix equals its transpose within atol."""
    matrix = _as_square_matrix(matrix)
    return np.allclose(matrix.T, matrix, atol=atol, rtol=0.)


def is_projector(matrix: np.ndarray, atol: float = 1e-10) -> bool:
    """Returns True if the matrix is an orthogonal projector, else False.

    An orthogonal projector P satisfies P = P^dag and P @ P = P.
    """
    matrix = _as_square_matrix(matrix)
    if not is_hermitian(matrix, atol=atol):
        return False
    return np.allclose(matrix @ matrix, matrix, atol=atol, rtol=0.)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Returns the commutator [a, b] = a @ b - b @ a."""
    return a @ b - b @ a


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """Returns the Frobenius norm of the commutator [a, b]."""
    return float(np.linalg.norm(commutator(a, b)))


def excitation_state(spin: int, size: int) -> np.ndarray:
    """Returns the state vector with the excitation on the given spin.

    Args:
        spin: Spin carrying the excitation, counted from one.
        size: Number of spins in the network.

    Raises:
        ValueError: If the spin is not in 1, ..., size.
    """
    if size < 1:
        raise ValueError(f"Argument size should be positive but is {size}.")

    if not 1 <= spin <= size:
        raise ValueError(
            f"Requires 1 <= spin <= size but spin = {spin} and size = {size}."
        )
    vector = np.zeros((size,), dtype=np.complex128)
    vector[spin - 1] = 1.
    return vector


def excitation_density_matrix(spin: int, size: int) -> np.ndarray:
    """Returns the pure density matrix |spin><spin| on the subspace.

    Args:
        spin: Spin carrying the excitation, counted from one.
        size: Number of spins in the network.
    """
    return cirq.density_matrix_from_state_vector(
        excitation_state(spin, size), qid_shape=(size,)
    )


def validate_density_matrix(
    rho: np.ndarray, atol: float = 1e-10, size: Optional[int] = None
) -> None:
    """Raises ValueError if rho is not Hermitian, trace one and positive.

    Args:
        rho: Candidate density matrix.
        atol: Absolute tolerance for each check.
        size: Expected dimension. Defaults to the dimension of rho.
    """
    rho = _as_square_matrix(rho)
    size = size or rho.shape[0]
    cirq.validate_density_matrix(
        rho.astype(np.complex128), qid_shape=(size,), atol=atol
    )
