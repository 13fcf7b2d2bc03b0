"""Dephasing operators acting in the eigenbasis of the Hamiltonian.

A dephasing operator V = sum_k c_k Pi_k shares the eigenprojectors Pi_k of
the single excitation subspace Hamiltonian. It damps the coherence between
eigenspaces k and l at rate gamma_kl = (c_k - c_l)^2 / 2 and leaves the
populations of each eigenspace untouched.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from spinrim.liouville import HermitianBasis, dephasing_superop, \
    hermitian_basis
from spinrim.network import HamiltonianSS
from spinrim.operators import commutator_norm

logger = logging.getLogger(__name__)

DEFAULT_NUM_OPERATORS = 1000
DEFAULT_DELTA_STEP = 1e-4
DEFAULT_DELTA_STEPS = 1000


class HashMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class DephasingOp:
    """Dephasing operator with its superoperator and decoherence rates.

    Attributes:
        eigenvalues: One eigenvalue c_k per eigenspace of the Hamiltonian.
        operator: Hermitian N x N matrix V.
        superop: N^2 x N^2 real symmetric generator S.
        rates: Matrix of decoherence rates gamma_kl between eigenspaces.
    """
    eigenvalues: np.ndarray
    operator: np.ndarray
    superop: np.ndarray
    rates: np.ndarray

    def scaled(self, delta: float) -> np.ndarray:
        """Returns the generator delta * S at dephasing strength delta."""
        return delta * self.superop


@dataclass
class CPReport:
    """Outcome of validate_cp with the list of violated constraints."""
    passed: bool = True
    violations: List[str] = field(default_factory=list)

    def fail(self, message: str) -> None:
        self.passed = False
        self.violations.append(message)

    def __bool__(self) -> bool:
        return self.passed

    def __str__(self) -> str:
        if self.passed:
            return "passed"
        return "failed: " + "; ".join(self.violations)


@dataclass(frozen=True)
class StrengthGrid:
    """Uniform grid of dephasing strengths delta(n) = step * n."""
    step: float = DEFAULT_DELTA_STEP
    steps: int = DEFAULT_DELTA_STEPS

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError(f"Need at least one step but steps = {self.steps}.")
        if not self.step > 0.:
            raise ValueError(f"Step must be positive but is {self.step}.")

    @staticmethod
    def from_max(delta_max: float, steps: int = DEFAULT_DELTA_STEPS
                 ) -> "StrengthGrid":
        """Returns the grid with `steps` intervals spanning [0, delta_max]."""
        return StrengthGrid(step=delta_max / steps, steps=steps)

    @property
    def values(self) -> np.ndarray:
        return self.step * np.arange(self.steps + 1)

    @property
    def delta_max(self) -> float:
        return self.step * self.steps

    def __len__(self) -> int:
        return self.steps + 1

    def index_of(self, delta: float) -> int:
        """Returns the index of the grid point closest to delta."""
        if not 0. <= delta <= self.delta_max * (1 + 1e-12):
            raise ValueError(
                f"Delta = {delta} lies outside [0, {self.delta_max}]."
            )
        return int(round(delta / self.step))


def decoherence_rates(eigenvalues: Sequence[float]) -> np.ndarray:
    """Returns gamma_kl = (c_k - c_l)^2 / 2."""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    differences = eigenvalues[:, None] - eigenvalues[None, :]
    return 0.5 * differences ** 2


def normalize_eigenvalues(eigenvalues: Sequence[float]) -> np.ndarray:
    """Rescales eigenvalues so that the largest decoherence rate is one.

    Raises:
        ValueError: If all eigenvalues are equal (V acts as the identity).
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    spread = np.ptp(eigenvalues)
    if spread <= 1e-12 * max(1., float(np.max(np.abs(eigenvalues)))):
        raise ValueError("All eigenvalues are equal; V dephases nothing.")
    return eigenvalues * (np.sqrt(2.) / spread)


def build_dephasing_op(
    hamiltonian: HamiltonianSS,
    eigenvalues: Sequence[float],
    basis: Optional[HermitianBasis] = None,
) -> DephasingOp:
    """Returns the dephasing operator V = sum_k c_k Pi_k.

    Args:
        hamiltonian: Hamiltonian whose (grouped) eigenprojectors V shares.
        eigenvalues: One c_k per eigenspace, used as given.
        basis: Hermitian basis for the superoperator.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.shape != (len(hamiltonian.groups),):
        raise ValueError(
            f"Expected {len(hamiltonian.groups)} eigenvalues (one per "
            f"eigenspace) but got {eigenvalues.size}."
        )
    basis = basis or hermitian_basis(hamiltonian.size)
    operator = sum(
        c * projector
        for c, projector in zip(eigenvalues, hamiltonian.projectors)
    )
    operator = 0.5 * (operator + operator.T)
    return DephasingOp(
        eigenvalues=eigenvalues,
        operator=operator,
        superop=dephasing_superop(operator, basis),
        rates=decoherence_rates(eigenvalues),
    )


def validate_cp(
    op: DephasingOp,
    hamiltonian_superop: Optional[np.ndarray] = None,
    atol: float = 1e-10,
) -> CPReport:
    """Checks the complete positivity and consistency constraints of op.

    Checks nonnegative, symmetric rates with zero diagonal, a negative
    semidefinite superoperator, trace preservation and, if the Hamiltonian
    superoperator A is given, [A, S] = 0.

    Args:
        op: Dephasing operator to check.
        hamiltonian_superop: Optional superoperator A for the commutation
            check.
        atol: Absolute tolerance, scaled by the size of the operands.
    """
    report = CPReport()
    rates = np.asarray(op.rates)
    if np.any(rates < -atol):
        worst = np.unravel_index(np.argmin(rates), rates.shape)
        report.fail(
            f"negative rate gamma{worst} = {rates[worst]:.3g}"
        )
    if not np.allclose(rates, rates.T, atol=atol, rtol=0.):
        report.fail("rates are not symmetric")
    if np.any(np.abs(np.diag(rates)) > atol):
        report.fail("nonzero diagonal rate")

    superop = np.asarray(op.superop)
    scale = max(1., float(np.max(np.abs(superop), initial=0.)))
    if not np.allclose(superop, superop.T, atol=atol * scale, rtol=0.):
        report.fail("superoperator is not symmetric")
    top = float(np.max(np.linalg.eigvalsh(0.5 * (superop + superop.T))))
    if top > 1e-12 * scale:
        report.fail(f"superoperator not negative semidefinite "
                    f"(max eigenvalue {top:.3g})")

    dimension = int(round(np.sqrt(superop.shape[0])))
    identity = np.zeros(superop.shape[0])
    identity[0] = np.sqrt(dimension)
    leak = float(np.max(np.abs(superop @ identity)))
    if leak > atol * scale:
        report.fail(f"trace not preserved (leak {leak:.3g})")

    if hamiltonian_superop is not None:
        norm = commutator_norm(hamiltonian_superop, superop)
        bound = atol * max(1., np.linalg.norm(hamiltonian_superop)) * scale
        if norm > bound:
            report.fail(f"does not commute with A (||[A, S]|| = {norm:.3g})")
    return report


def sample_dephasing_op(
    hamiltonian: HamiltonianSS,
    rng: np.random.Generator,
    basis: Optional[HermitianBasis] = None,
    hamiltonian_superop: Optional[np.ndarray] = None,
    max_draws: int = 100,
) -> DephasingOp:
    """Draws a normalized random dephasing operator for the Hamiltonian.

    The eigenvalues c_k are i.i.d. standard normal, one per eigenspace, and
    rescaled so that the largest decoherence rate is one.

    Args:
        hamiltonian: Hamiltonian with grouped eigenprojectors.
        rng: Random number generator.
        basis: Hermitian basis for the superoperator.
        hamiltonian_superop: Optional A used for the commutation check.
        max_draws: Number of redraws allowed for degenerate samples.

    Raises:
        ValueError: If the Hamiltonian has a single eigenspace.
        ArithmeticError: If the sampled operator fails validate_cp.
    """
    if len(hamiltonian.groups) < 2:
        raise ValueError(
            "A Hamiltonian with a single eigenspace cannot be dephased."
        )

    for _ in range(max_draws):
        draw = rng.standard_normal(len(hamiltonian.groups))
        try:
            eigenvalues = normalize_eigenvalues(draw)
        except ValueError:
            logger.debug("Degenerate eigenvalue draw, resampling.")
            continue
        op = build_dephasing_op(hamiltonian, eigenvalues, basis)
        report = validate_cp(op, hamiltonian_superop)
        if not report:
            raise ArithmeticError(f"Sampled dephasing operator {report}.")
        return op
    raise ArithmeticError(f"No valid draw in {max_draws} attempts.")


def hamiltonian_hash(hamiltonian: HamiltonianSS) -> str:
    """Returns a hex digest binding data to one Hamiltonian matrix."""
    matrix = np.ascontiguousarray(hamiltonian.matrix, dtype="<f8")
    digest = hashlib.sha256()
    digest.update(str(matrix.shape).encode())
    digest.update(matrix.tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class DephasingSet:
    """Reproducible set of dephasing operators for one Hamiltonian."""
    ops: Tuple[DephasingOp, ...]
    seed: int
    hamiltonian_hash: str
    size: int

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, index: int) -> DephasingOp:
        return self.ops[index]

    def superops(self) -> np.ndarray:
        """Returns the stacked superoperators, shape (count, N^2, N^2)."""
        return np.array([op.superop for op in self.ops])

    def to_dict(self) -> Dict[str, Any]:
        """Returns the JSON form. Superoperators are not stored."""
        return {
            "seed": int(self.seed),
            "N": int(self.size),
            "hamiltonian_hash": self.hamiltonian_hash,
            "ops": [{"c": [float(c) for c in op.eigenvalues]}
                    for op in self.ops],
        }

    @staticmethod
    def from_dict(
        data: Dict[str, Any],
        hamiltonian: HamiltonianSS,
        basis: Optional[HermitianBasis] = None,
    ) -> "DephasingSet":
        """Rebuilds a set from its JSON form, recomputing superoperators.

        Raises:
            HashMismatchError: If the set was generated for another
                Hamiltonian.
        """
        digest = hamiltonian_hash(hamiltonian)
        if data["hamiltonian_hash"] != digest:
            raise HashMismatchError(
                f"Dephasing set belongs to Hamiltonian "
                f"{data['hamiltonian_hash'][:12]} but the controller "
                f"Hamiltonian is {digest[:12]}."
            )
        basis = basis or hermitian_basis(hamiltonian.size)
        ops = tuple(
            build_dephasing_op(hamiltonian, entry["c"], basis)
            for entry in data["ops"]
        )
        return DephasingSet(ops, int(data["seed"]), digest, int(data["N"]))


def generate_set(
    hamiltonian: HamiltonianSS,
    count: int = DEFAULT_NUM_OPERATORS,
    seed: int = 0,
    basis: Optional[HermitianBasis] = None,
    hamiltonian_superop: Optional[np.ndarray] = None,
) -> DephasingSet:
    """Generates `count` validated dephasing operators deterministically.

    Args:
        hamiltonian: Hamiltonian the operators share eigenspaces with.
        count: Number of operators.
        seed: Seed for the random number generator.
        basis: Hermitian basis for the superoperators.
        hamiltonian_superop: Optional A used for the commutation check.

    Raises:
        ValueError: If count < 1.
    """
    if count < 1:
        raise ValueError(f"Count must be positive but is {count}.")
    basis = basis or hermitian_basis(hamiltonian.size)
    rng = np.random.default_rng(seed)
    ops = tuple(
        sample_dephasing_op(hamiltonian, rng, basis, hamiltonian_superop)
        for _ in range(count)
    )
    logger.debug("Generated %d dephasing operators (seed %d).", count, seed)
    return DephasingSet(
        ops, int(seed), hamiltonian_hash(hamiltonian), hamiltonian.size
    )
