"""Real vectorized (Bloch vector) representation of the Lindblad dynamics.

A density matrix rho on C^N is expanded in a trace-orthonormal Hermitian
basis {sigma_k} as r_k = Tr(rho sigma_k). In this representation the
Hamiltonian commutator and the dephasing dissipator become real N^2 x N^2
matrices A and S and the dynamics is the LTI system dr/dt = (A + S) r.
"""

import functools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import tensornetwork as tn

from spinrim.network import Controller, HamiltonianSS, SpinNetwork, \
    build_hamiltonian
from spinrim.operators import excitation_density_matrix, is_hermitian

logger = logging.getLogger(__name__)

# Largest imaginary part tolerated when a real result is expected
IMAG_TOLERANCE = 1e-12


@dataclass(frozen=True)
class HermitianBasis:
    """Trace-orthonormal Hermitian basis of N x N matrices.

    The first element is I / sqrt(N). The remaining N^2 - 1 elements are
    the normalized generalized Gell-Mann matrices: symmetric off-diagonal,
    then antisymmetric off-diagonal (for each pair j < k), then the
    traceless diagonal matrices.
    """
    dimension: int
    matrices: np.ndarray

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def gram(self) -> np.ndarray:
        """Returns the Gram matrix G_jk = Tr(sigma_j sigma_k)."""
        gram = tn.ncon(
            [self.matrices, self.matrices], [[-1, 1, 2], [-2, 2, 1]]
        )
        return _real(gram)


def _real(matrix: np.ndarray, tolerance: float = IMAG_TOLERANCE) -> np.ndarray:
    """Returns the real part after checking the imaginary part is negligible."""
    matrix = np.asarray(matrix)
    if np.iscomplexobj(matrix):
        scale = max(1., float(np.max(np.abs(matrix.real), initial=0.)))
        worst = float(np.max(np.abs(matrix.imag), initial=0.))
        if worst > tolerance * scale:
            raise ArithmeticError(
                f"Expected a real result but the imaginary part is {worst}."
            )
        matrix = matrix.real
    return np.ascontiguousarray(matrix, dtype=np.float64)


@functools.lru_cache(maxsize=None)
def _gell_mann_matrices(dimension: int) -> np.ndarray:
    matrices = [np.identity(dimension, dtype=np.complex128)
                / np.sqrt(dimension)]

    for j in range(dimension):
        for k in range(j + 1, dimension):
            symmetric = np.zeros((dimension, dimension), dtype=np.complex128)
            symmetric[j, k] = symmetric[k, j] = 1. / np.sqrt(2)
            matrices.append(symmetric)

            antisymmetric = np.zeros(
                (dimension, dimension), dtype=np.complex128
            )
            antisymmetric[j, k] = -1j / np.sqrt(2)
            antisymmetric[k, j] = 1j / np.sqrt(2)
            matrices.append(antisymmetric)

    for ell in range(1, dimension):
        diagonal = np.zeros(dimension, dtype=np.complex128)
        diagonal[:ell] = 1.
        diagonal[ell] = -ell
        matrices.append(np.diag(diagonal) / np.sqrt(ell * (ell + 1)))

    stacked = np.array(matrices)
    stacked.setflags(write=False)
    return stacked


def hermitian_basis(dimension: int) -> HermitianBasis:
    """Returns the identity-first normalized generalized Gell-Mann basis.

    Args:
        dimension: Hilbert space dimension N.

    Raises:
        ValueError: If dimension < 2.
    """
    if dimension < 2:
        raise ValueError(
            f"Basis dimension must be at least two but is {dimension}."
        )
    return HermitianBasis(dimension, _gell_mann_matrices(dimension))


def _check_dimension(matrix: np.ndarray, basis: HermitianBasis) -> None:
    if matrix.shape != (basis.dimension, basis.dimension):
        raise ValueError(
            f"Operator has shape {matrix.shape} but the basis acts on "
            f"dimension {basis.dimension}."
        )


def _trace_products(operator: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Returns T_kl = Tr(operator sigma_k sigma_l)."""
    return tn.ncon(
        [operator.astype(np.complex128), basis.matrices, basis.matrices],
        [[1, 2], [-1, 2, 3], [-2, 3, 1]],
    )


def hamiltonian_superop(
    hamiltonian: HamiltonianSS, basis: HermitianBasis
) -> np.ndarray:
    """Returns A with A_kl = Tr(i H [sigma_k, sigma_l]) (hbar = 1).

    Args:
        hamiltonian: Single excitation subspace Hamiltonian.
        basis: Hermitian basis of the same dimension.

    Raises:
        ValueError: On a dimension mismatch.
    """
    matrix = np.asarray(getattr(hamiltonian, "matrix", hamiltonian))
    _check_dimension(matrix, basis)

    products = _trace_products(matrix, basis)
    superop = _real(1j * (products - products.T))
    return 0.5 * (superop - superop.T)


def dephasing_superop(
    operator: np.ndarray, basis: HermitianBasis
) -> np.ndarray:
    """Returns the dephasing generator for L(rho) = -1/2 [V, [V, rho]].

    S_kl = Tr(V sigma_k V sigma_l) - 1/2 Tr(V^2 (sigma_k sigma_l
    + sigma_l sigma_k)).

    Args:
        operator: Hermitian dephasing operator V.
        basis: Hermitian basis of the same dimension.

    Raises:
        ValueError: If V is not Hermitian or on a dimension mismatch.
    """
    operator = np.asarray(operator)
    _check_dimension(operator, basis)
    if not is_hermitian(operator, atol=1e-12):
        raise ValueError("Dephasing operator must be Hermitian.")

    operator = operator.astype(np.complex128)
    sandwich = tn.ncon(
        [operator, basis.matrices, operator, basis.matrices],
        [[1, 2], [-1, 2, 3], [3, 4], [-2, 4, 1]],
    )
    squared = _trace_products(operator @ operator, basis)
    superop = _real(sandwich - 0.5 * (squared + squared.T))
    return 0.5 * (superop + superop.T)


def vectorize(rho: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Returns the real coherence vector r_k = Tr(rho sigma_k).

    Args:
        rho: Hermitian matrix (a density matrix in practice).
        basis: Hermitian basis of the same dimension.
    """
    rho = np.asarray(rho)
    _check_dimension(rho, basis)
    components = tn.ncon(
        [basis.matrices, rho.astype(np.complex128)], [[-1, 1, 2], [2, 1]]
    )
    return _real(components)


def devectorize(vector: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Returns rho = sum_k r_k sigma_k."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (len(basis),):
        raise ValueError(
            f"Vector has shape {vector.shape} but the basis has {len(basis)} "
            "elements."
        )
    return np.tensordot(vector, basis.matrices, axes=1)


@dataclass(frozen=True)
class LiouvilleSystem:
    """LTI data for one transfer problem.

    Attributes:
        superop: Hamiltonian superoperator A (antisymmetric).
        initial: Vectorized initial state r0 for rho(0) = |IN><IN|.
        target: Vectorized target c for rho_out = |OUT><OUT|, used as a row.
        basis: Hermitian basis the vectors are expressed in.
        hamiltonian: Hamiltonian the superoperator was built from.
    """
    superop: np.ndarray
    initial: np.ndarray
    target: np.ndarray
    basis: HermitianBasis
    hamiltonian: Optional[HamiltonianSS] = None

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    @staticmethod
    def from_problem(
        net: SpinNetwork,
        ctrl: Controller,
        basis: Optional[HermitianBasis] = None,
    ) -> "LiouvilleSystem":
        """Builds A, r0 and c for a controller on a spin network.

        Args:
            net: Spin network.
            ctrl: Controller (biases, readout time, input and output spins).
            basis: Hermitian basis. Defaults to hermitian_basis(N).
        """
        basis = basis or hermitian_basis(net.size)
        hamiltonian = build_hamiltonian(net, ctrl)
        initial = vectorize(
            excitation_density_matrix(ctrl.input_spin, net.size), basis
        )
        target = vectorize(
            excitation_density_matrix(ctrl.output_spin, net.size), basis
        )
        return LiouvilleSystem(
            superop=hamiltonian_superop(hamiltonian, basis),
            initial=initial,
            target=target,
            basis=basis,
            hamiltonian=hamiltonian,
        )

    def identity_vector(self) -> np.ndarray:
        """Returns the coherence vector of the identity matrix."""
        vector = np.zeros(len(self.basis))
        vector[0] = np.sqrt(self.dimension)
        return vector
