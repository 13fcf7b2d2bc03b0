"""Defines spin network topologies, controllers and the single excitation
subspace Hamiltonian.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

# Eigenvalues closer than this (relative to the spectral norm) share a projector
DEGENERACY_TOLERANCE = 1e-10


class Topology(str, enum.Enum):
    CHAIN = "chain"
    RING = "ring"


@dataclass(frozen=True)
class SpinNetwork:
    """Nearest-neighbour XX spin network with uniform couplings.

    Attributes:
        size: Number of spins N.
        topology: Chain or ring.
        coupling: Uniform coupling strength J (dimensionless, hbar = 1).
        kappa: ZZ coupling coefficient. Only kappa = 0 is supported by the
            Hamiltonian builder.
    """
    size: int
    topology: Topology = Topology.CHAIN
    coupling: float = 1.0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(
                f"A spin network needs at least two spins but size = "
                f"{self.size}."
            )
        if not self.coupling > 0.:
            raise ValueError(
                f"Coupling must be positive but is {self.coupling}."
            )
        object.__setattr__(self, "topology", Topology(self.topology))

    def couplings(self) -> np.ndarray:
        """Returns the symmetric N x N matrix of couplings J_mn."""
        upper = np.zeros((self.size, self.size))
        for n in range(self.size - 1):
            upper[n, n + 1] = self.coupling
        if self.topology is Topology.RING and self.size > 2:
            upper[0, self.size - 1] = self.coupling
        return upper + upper.T

    def __str__(self) -> str:
        return f"{self.topology.value}{self.size}"


@dataclass
class Controller:
    """Static bias-field controller for an excitation transfer.

    Spins are counted from one, so input_spin = 1 is the first spin.

    Attributes:
        biases: Energy shifts Delta_n, one per spin.
        readout_time: Readout time T > 0.
        output_spin: Target spin OUT.
        input_spin: Initial spin IN.
        nominal_error: Cached fidelity error e(T) without dephasing.
        metadata: Free-form optimizer bookkeeping (convergence flags, ...).
    """
    biases: np.ndarray
    readout_time: float
    output_spin: int
    input_spin: int = 1
    nominal_error: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.biases.ndim != 1:
            raise ValueError("Biases should be a vector.")
        if self.readout_time < 0.:
            raise ValueError(
                f"Readout time must be non-negative but is "
                f"{self.readout_time}."
            )
        size = self.biases.size
        for name, spin in (("output", self.output_spin),
                           ("input", self.input_spin)):
            if not 1 <= spin <= size:
                raise ValueError(
                    f"The {name} spin must be in 1, ..., {size} but is {spin}."
                )

    @property
    def size(self) -> int:
        """Returns the number of spins the controller acts on."""
        return self.biases.size

    def parameters(self) -> np.ndarray:
        """Returns the optimization vector (Delta_1, ..., Delta_N, T)."""
        return np.append(self.biases, self.readout_time)


@dataclass(frozen=True)
class HamiltonianSS:
    """Single excitation subspace Hamiltonian with its eigenstructure.

    Attributes:
        matrix: Real symmetric N x N matrix.
        eigenvalues: All N eigenvalues in ascending order.
        eigenvectors: Orthonormal eigenvectors as columns.
        levels: One (mean) eigenvalue per degenerate group.
        groups: Column indices of the eigenvectors spanning each group.
    """
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    levels: np.ndarray
    groups: List[np.ndarray]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def projectors(self) -> List[np.ndarray]:
        """Returns the eigenprojectors, one per degenerate group."""
        return [
            self.eigenvectors[:, group] @ self.eigenvectors[:, group].T
            for group in self.groups
        ]

    def reconstruct(self) -> np.ndarray:
        """Returns sum_k lambda_k Pi_k."""
        return sum(
            level * projector
            for level, projector in zip(self.levels, self.projectors)
        )


def group_eigenvalues(
    eigenvalues: np.ndarray, tolerance: float = DEGENERACY_TOLERANCE
) -> List[np.ndarray]:
    """Groups sorted eigenvalues that agree within tolerance * spectral norm.

    Args:
        eigenvalues: Eigenvalues in ascending order.
        tolerance: Relative tolerance.
    """
    scale = max(float(np.max(np.abs(eigenvalues))), 1.)
    groups = [[0]]
    for k in range(1, len(eigenvalues)):
        if eigenvalues[k] - eigenvalues[k - 1] <= tolerance * scale:
            groups[-1].append(k)
        else:
            groups.append([k])
    return [np.array(group, dtype=int) for group in groups]


def build_hamiltonian(
    net: SpinNetwork, ctrl: Controller
) -> HamiltonianSS:
    """Returns the single excitation subspace Hamiltonian for a controller.

    The diagonal holds the biases Delta_n and the off-diagonal entries hold
    the couplings J_mn. The matrix is assembled from its upper triangle so
    it is exactly symmetric.

    Args:
        net: Spin network.
        ctrl: Controller with one bias per spin.

    Raises:
        ValueError: If the dimensions of net and ctrl disagree, or if the
            network has kappa != 0.
    """
    if ctrl.size != net.size:
        raise ValueError(
            f"Controller has {ctrl.size} biases but the network has "
            f"{net.size} spins."
        )
    if net.kappa != 0.:
        raise ValueError(
            "Only XX coupling (kappa = 0) has a single excitation subspace "
            f"Hamiltonian here, but kappa = {net.kappa}."
        )

    upper = np.triu(net.couplings(), k=1)
    matrix = upper + upper.T + np.diag(ctrl.biases)

    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    groups = group_eigenvalues(eigenvalues)
    levels = np.array([np.mean(eigenvalues[group]) for group in groups])
    if len(groups) < net.size:
        logger.debug(
            "Merged %d eigenvalues into %d eigenspaces.",
            net.size, len(groups)
        )
    return HamiltonianSS(matrix, eigenvalues, eigenvectors, levels, groups)


def transfer_targets(net: SpinNetwork) -> List[int]:
    """Returns the output spins studied for transfers from spin one.

    Chains use {floor(N / 2) + 1, N}; rings use 2, ..., ceil(N / 2).
    """
    if net.topology is Topology.CHAIN:
        return sorted({net.size // 2 + 1, net.size})
    return list(range(2, math.ceil(net.size / 2) + 1))


def canonicalize_biases(biases: Sequence[float]) -> np.ndarray:
    """Returns biases shifted so that min(biases) = 0.

    A uniform shift of all biases only adds a global phase to the dynamics.
    """
    biases = np.asarray(biases, dtype=np.float64)
    return biases - np.min(biases)


def problem_id(net: SpinNetwork, output_spin: int, algorithm: str) -> str:
    """Returns a file-system friendly name such as ``ring6_out4_A``."""
    return f"{net}_out{output_spin}_{algorithm}"
