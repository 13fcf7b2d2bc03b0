"""Nominal and dephasing-perturbed dynamics and fidelity errors.

Two independent propagation paths are provided: the vectorized LTI
solution r(t) = exp(t (A + delta S)) r0 and the eigenprojector solution
rho(t) = sum_kl exp(-t (i omega_kl + delta gamma_kl)) Pi_k rho0 Pi_l.
They cross-validate each other.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from spinrim.dephasing import DephasingOp, DephasingSet, StrengthGrid, \
    decoherence_rates
from spinrim.liouville import LiouvilleSystem
from spinrim.network import Controller, HamiltonianSS
from spinrim.operators import commutator_norm, validate_density_matrix

logger = logging.getLogger(__name__)

# Slack allowed on fidelity errors outside [0, 1] before aborting
ERROR_SLACK = 1e-9
COMMUTATOR_TOLERANCE = 1e-10


class NumericalIntegrityError(ArithmeticError):
    pass


@dataclass
class ErrorGrid:
    """Perturbed fidelity errors for one controller.

    Attributes:
        controller_id: Name of the controller.
        values: Array of shape (len(grid), len(dephasing set)); entry
            (n, mu) is the error at strength delta(n) under operator mu.
        grid: Dephasing strengths of the rows.
        seed: Seed of the dephasing set.
        size: Number of spins.
        clamped: Number of entries clamped from float noise into [0, 1].
    """
    controller_id: str
    values: np.ndarray
    grid: StrengthGrid
    seed: Optional[int] = None
    size: Optional[int] = None
    clamped: int = 0

    @property
    def nominal_error(self) -> float:
        return float(self.values[0, 0])

    @property
    def num_ops(self) -> int:
        return self.values.shape[1]

    def row(self, index: int) -> np.ndarray:
        """Returns the errors over all operators at strength delta(index)."""
        return self.values[index]

    def means(self) -> np.ndarray:
        """Returns the mean error over operators for every strength.

        Sums are exactly rounded, so the result does not depend on the
        order of the operators and a constant row returns its value.
        """
        count = self.values.shape[1]
        return np.array([
            row[0] if np.ptp(row) == 0. else math.fsum(row) / count
            for row in self.values
        ])


def commutes(a: np.ndarray, b: np.ndarray,
             tolerance: float = COMMUTATOR_TOLERANCE) -> bool:
    """Returns True if ||[a, b]|| is negligible relative to ||a|| ||b||."""
    scale = max(1., np.linalg.norm(a)) * max(1., np.linalg.norm(b))
    return commutator_norm(a, b) <= tolerance * scale


def _symmetric_expm(matrix: np.ndarray, scale: float) -> np.ndarray:
    """Returns exp(scale * matrix) for a real symmetric matrix."""
    eigenvalues, eigenvectors = scipy.linalg.eigh(matrix)
    return (eigenvectors * np.exp(scale * eigenvalues)) @ eigenvectors.T


def checked_error(value: float, where: str = "") -> float:
    """Returns an error value clamped into [0, 1].

    Values within ERROR_SLACK outside [0, 1] are float noise and are
    clamped; larger violations abort.

    Raises:
        NumericalIntegrityError: If the value is outside the slack.
    """
    if not -ERROR_SLACK <= value <= 1. + ERROR_SLACK:
        raise NumericalIntegrityError(
            f"Fidelity error {value!r} outside [0, 1]{where}."
        )
    if value < 0. or value > 1.:
        logger.debug("Clamped fidelity error %r%s.", value, where)
    return min(max(value, 0.), 1.)


def propagate_lti(
    superop: np.ndarray,
    dephasing: Optional[np.ndarray],
    delta: float,
    time: float,
    initial: np.ndarray,
    fast_path: Optional[bool] = None,
) -> np.ndarray:
    """Returns r(t) = exp(t (A + delta S)) r0.

    When [A, S] = 0 the exponential factorizes as exp(t A) exp(t delta S)
    and the symmetric factor is evaluated by eigendecomposition (fast
    path). Otherwise the full generator goes through scaling and squaring
    with a degree-13 Pade approximant.

    Args:
        superop: Hamiltonian superoperator A.
        dephasing: Dephasing superoperator S, or None for no dephasing.
        delta: Dephasing strength, delta >= 0.
        time: Propagation time, t >= 0.
        initial: Initial coherence vector r0.
        fast_path: True forces the factorized path, False forces the full
            generator. None picks the fast path when [A, S] = 0.

    Raises:
        ValueError: If delta or time is negative.
        NumericalIntegrityError: If the fast path is forced but A and S do
            not commute.
    """
    if delta < 0.:
        raise ValueError(f"Delta must be non-negative but is {delta}.")
    if time < 0.:
        raise ValueError(f"Time must be non-negative but is {time}.")

    initial = np.asarray(initial, dtype=np.float64)
    if time == 0.:
        return initial.copy()
    if dephasing is None or delta == 0.:
        return scipy.linalg.expm(time * superop) @ initial

    commuting = commutes(superop, dephasing)
    if fast_path and not commuting:
        raise NumericalIntegrityError(
            "Fast path requested but A and S do not commute."
        )
    if fast_path is None:
        fast_path = commuting

    if fast_path:
        damped = _symmetric_expm(dephasing, time * delta) @ initial
        return scipy.linalg.expm(time * superop) @ damped
    return scipy.linalg.expm(time * (superop + delta * dephasing)) @ initial


def eigenspace_values(
    hamiltonian: HamiltonianSS, operator: np.ndarray, atol: float = 1e-10
) -> np.ndarray:
    """Returns c_k such that V = sum_k c_k Pi_k.

    Raises:
        ValueError: If V is not of that form (it does not share the
            eigenspaces of the Hamiltonian).
    """
    operator = np.asarray(operator)
    projectors = hamiltonian.projectors
    values = np.array([
        np.trace(projector @ operator).real / np.trace(projector).real
        for projector in projectors
    ])
    residual = operator - sum(c * p for c, p in zip(values, projectors))
    if np.linalg.norm(residual) > atol * max(1., np.linalg.norm(operator)):
        raise ValueError(
            "Dephasing operator does not share the eigenspaces of the "
            "Hamiltonian."
        )
    return values


def propagate_eigen(
    hamiltonian: HamiltonianSS,
    operator: Union[np.ndarray, DephasingOp],
    delta: float,
    time: float,
    initial: np.ndarray,
    validate: bool = True,
) -> np.ndarray:
    """Returns the perturbed density matrix from the eigenprojector solution.

    rho(t) = sum_kl exp(-t (i omega_kl + delta gamma_kl)) Pi_k rho0 Pi_l
    with omega_kl = lambda_k - lambda_l and gamma_kl = (c_k - c_l)^2 / 2.

    Args:
        hamiltonian: Hamiltonian with grouped eigenprojectors.
        operator: Dephasing operator V (matrix or DephasingOp).
        delta: Dephasing strength, delta >= 0.
        time: Propagation time, t >= 0.
        initial: Initial density matrix rho0.
        validate: If True, check the result is a density matrix.

    Raises:
        ValueError: If V does not share eigenspaces with the Hamiltonian or
            delta, time are negative.
        NumericalIntegrityError: If validation of the result fails.
    """
    if delta < 0. or time < 0.:
        raise ValueError("Delta and time must be non-negative.")

    if isinstance(operator, DephasingOp):
        values = operator.eigenvalues
    else:
        values = eigenspace_values(hamiltonian, operator)

    levels = hamiltonian.levels
    frequencies = levels[:, None] - levels[None, :]
    factors = np.exp(
        -time * (1j * frequencies + delta * decoherence_rates(values))
    )
    projectors = np.array(hamiltonian.projectors)
    rho = np.einsum(
        "kl,kab,bc,lcd->ad", factors, projectors, initial, projectors
    )

    if validate:
        try:
            validate_density_matrix(rho, atol=1e-10)
        except ValueError as error:
            raise NumericalIntegrityError(
                f"Propagated state is not a density matrix: {error}"
            ) from error
    return rho


def purity(rho: np.ndarray) -> float:
    """Returns Tr(rho^2)."""
    return float(np.real(np.trace(rho @ rho)))


def trajectory(
    system: LiouvilleSystem,
    dephasing: Optional[np.ndarray],
    delta: float,
    times: Sequence[float],
) -> np.ndarray:
    """Returns r(t) for each time, shape (len(times), N^2)."""
    return np.array([
        propagate_lti(system.superop, dephasing, delta, t, system.initial)
        for t in times
    ])


def fidelity_error(ctrl: Controller, system: LiouvilleSystem) -> float:
    """Returns the nominal fidelity error e(T) = 1 - c exp(T A) r0.

    Raises:
        NumericalIntegrityError: If the error is outside [0, 1] beyond
            float noise.
    """
    final = propagate_lti(
        system.superop, None, 0., ctrl.readout_time, system.initial
    )
    return checked_error(1. - float(system.target @ final))


def perturbed_error(
    ctrl: Controller,
    system: LiouvilleSystem,
    dephasing: np.ndarray,
    delta: float,
    delta_max: float = 0.1,
    fast_path: Optional[bool] = None,
) -> float:
    """Returns the perturbed error 1 - c exp(T (A + delta S)) r0.

    At delta = 0 the result is fidelity_error(ctrl, system) exactly.

    Args:
        ctrl: Controller.
        system: LTI data of the transfer problem.
        dephasing: Dephasing superoperator S.
        delta: Dephasing strength in [0, delta_max].
        delta_max: Upper bound for delta.
        fast_path: See propagate_lti.

    Raises:
        ValueError: If delta is outside [0, delta_max].
        NumericalIntegrityError: As in fidelity_error.
    """
    if not 0. <= delta <= delta_max:
        raise ValueError(f"Delta = {delta} outside [0, {delta_max}].")
    if delta == 0.:
        return fidelity_error(ctrl, system)

    final = propagate_lti(
        system.superop, dephasing, delta, ctrl.readout_time, system.initial,
        fast_path=fast_path,
    )
    return checked_error(1. - float(system.target @ final))


def compute_error_grid(
    ctrl: Controller,
    system: LiouvilleSystem,
    dephasing_set: DephasingSet,
    grid: StrengthGrid,
    controller_id: str = "",
    jobs: int = 1,
) -> ErrorGrid:
    """Evaluates the perturbed error for every strength and operator.

    Each superoperator is diagonalized once and reused for every delta. Row
    zero is the nominal error for every operator.

    Args:
        ctrl: Controller.
        system: LTI data of the transfer problem.
        dephasing_set: Dephasing operators (columns of the grid).
        grid: Dephasing strengths (rows of the grid).
        controller_id: Name stored with the grid.
        jobs: Number of worker threads over operators.

    Raises:
        NumericalIntegrityError: On errors outside [0, 1], with the (n, mu)
            coordinates of the first offending cell.
    """
    time = ctrl.readout_time
    deltas = grid.values[1:]
    nominal = fidelity_error(ctrl, system)
    propagator = scipy.linalg.expm(time * system.superop)
    covector = system.target @ propagator

    def column(mu: int) -> np.ndarray:
        superop = dephasing_set[mu].superop
        if commutes(system.superop, superop):
            eigenvalues, eigenvectors = scipy.linalg.eigh(superop)
            weights = (covector @ eigenvectors) * (
                eigenvectors.T @ system.initial
            )
            return 1. - np.exp(time * np.outer(deltas, eigenvalues)) @ weights
        logger.warning("Operator %d does not commute with A; using the full "
                       "generator for every delta.", mu)
        return np.array([
            1. - system.target @ propagate_lti(
                system.superop, superop, delta, time, system.initial,
                fast_path=False,
            )
            for delta in deltas
        ])

    values = np.empty((len(grid), len(dephasing_set)))
    values[0, :] = nominal
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for mu, errors in enumerate(pool.map(column, range(len(values[0])))):
            values[1:, mu] = errors

    bad = (values < -ERROR_SLACK) | (values > 1. + ERROR_SLACK)
    if np.any(bad):
        n, mu = np.argwhere(bad)[0]
        raise NumericalIntegrityError(
            f"Fidelity error {values[n, mu]!r} outside [0, 1] at "
            f"(mu={mu}, n={n}) for controller {controller_id!r}."
        )
    outside = (values < 0.) | (values > 1.)
    clamped = int(np.count_nonzero(outside))
    if clamped:
        logger.info("Clamped %d float-noise errors for controller %r.",
                    clamped, controller_id)
        np.clip(values, 0., 1., out=values)

    return ErrorGrid(
        controller_id=controller_id,
        values=values,
        grid=grid,
        seed=dephasing_set.seed,
        size=system.dimension,
        clamped=clamped,
    )
