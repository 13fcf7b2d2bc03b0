"""Synthesis of static bias-field controllers for excitation transfer.

Controllers maximize the transfer fidelity |<OUT| exp(-i H T) |IN>|^2 over
the biases Delta_n and the readout time T. Three multistart schemes explore
the landscape differently:

    A: L-BFGS-B with exact gradients from uniform random starts.
    B: bounded Nelder-Mead simplex search from the same kind of starts.
    C: L-BFGS-B from starts whose biases are mirror symmetric about the
       midpoint of the transfer.
"""

import enum
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from spinrim.dynamics import fidelity_error
from spinrim.liouville import LiouvilleSystem, hermitian_basis
from spinrim.network import Controller, SpinNetwork, Topology, \
    canonicalize_biases, problem_id

logger = logging.getLogger(__name__)

DEFAULT_SET_SIZE = 100
# Optima with a larger error are failed runs
MAX_ERROR = 0.5
DUPLICATE_DISTANCE = 1e-6


class InsufficientOptimaError(RuntimeError):
    pass


class Algorithm(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def index(self) -> int:
        return list(Algorithm).index(self)


@dataclass(frozen=True)
class OptimizationConfig:
    """Settings of one multistart optimization scheme.

    Attributes:
        algorithm: Scheme A, B or C.
        restarts: Number of independent starts per batch.
        max_restarts: Cap on the starts launched while too few distinct
            optima exist. Defaults to 10 * restarts.
        delta_bound: Box constraint |Delta_n| <= delta_bound.
        t_window: (T_min, T_max). Defaults to (0.1, 10 N).
        seed: Master seed; every restart draws from its own child stream.
        max_iterations: Iteration cap of the local optimizer.
        gtol: Gradient infinity-norm tolerance.
    """
    algorithm: Algorithm = Algorithm.A
    restarts: int = 100
    max_restarts: Optional[int] = None
    delta_bound: float = 10.
    t_window: Optional[Tuple[float, float]] = None
    seed: int = 0
    max_iterations: int = 1000
    gtol: float = 1e-9

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.restarts < 1:
            raise ValueError(
                f"Need at least one restart but restarts = {self.restarts}."
            )
        if self.max_restarts is None:
            object.__setattr__(self, "max_restarts", 10 * self.restarts)
        if self.max_restarts < self.restarts:
            raise ValueError(
                f"max_restarts = {self.max_restarts} is below restarts = "
                f"{self.restarts}."
            )
        if not self.delta_bound > 0.:
            raise ValueError("The bias bound must be positive.")
        if self.t_window is not None:
            t_min, t_max = self.t_window
            if not 0. < t_min < t_max:
                raise ValueError(
                    f"Need 0 < T_min < T_max but the window is "
                    f"{self.t_window}."
                )
            object.__setattr__(self, "t_window", (float(t_min), float(t_max)))

    def window(self, size: int) -> Tuple[float, float]:
        return self.t_window or (0.1, 10. * size)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["algorithm"] = self.algorithm.value
        data["t_window"] = list(self.t_window) if self.t_window else None
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "OptimizationConfig":
        data = dict(data)
        if data.get("t_window") is not None:
            data["t_window"] = tuple(data["t_window"])
        return OptimizationConfig(**data)


@dataclass
class ControllerSet:
    """Best distinct controllers of one transfer problem and scheme.

    Controllers are sorted by ascending nominal error.
    """
    net: SpinNetwork
    output_spin: int
    controllers: List[Controller]
    config: OptimizationConfig
    input_spin: int = 1
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        errors = [ctrl.nominal_error for ctrl in self.controllers]
        if None not in errors and any(np.diff(errors) < 0.):
            raise ValueError("Controllers must be sorted by nominal error.")

    @property
    def problem_id(self) -> str:
        return problem_id(self.net, self.output_spin,
                          self.config.algorithm.value)

    def controller_id(self, index: int) -> str:
        return f"{self.problem_id}_c{index:03d}"

    def __len__(self) -> int:
        return len(self.controllers)

    def __iter__(self):
        return iter(self.controllers)

    def __getitem__(self, index: int) -> Controller:
        return self.controllers[index]

    def nominal_errors(self) -> np.ndarray:
        return np.array([ctrl.nominal_error for ctrl in self.controllers])


def _split(parameters: np.ndarray) -> Tuple[np.ndarray, float]:
    return parameters[:-1], float(parameters[-1])


def fidelity_and_gradient(
    net: SpinNetwork,
    parameters: np.ndarray,
    output_spin: int,
    input_spin: int = 1,
) -> Tuple[float, np.ndarray]:
    """Returns the transfer error 1 - F and its gradient.

    The derivative of exp(-i T H) with respect to Delta_n uses the
    divided-difference form of the Frechet derivative in the eigenbasis of
    H; the derivative with respect to T is analytic.

    Args:
        net: Spin network.
        parameters: Vector (Delta_1, ..., Delta_N, T).
        output_spin: Target spin.
        input_spin: Initial spin.
    """
    biases, time = _split(np.asarray(parameters, dtype=np.float64))
    eigenvalues, eigenvectors = scipy.linalg.eigh(
        net.couplings() + np.diag(biases)
    )
    phases = np.exp(-1j * time * eigenvalues)
    out_row = eigenvectors[output_spin - 1]
    in_row = eigenvectors[input_spin - 1]

    amplitude = np.sum(out_row * in_row * phases)
    fidelity = abs(amplitude) ** 2

    d_time = np.sum(out_row * in_row * (-1j * eigenvalues) * phases)

    gaps = eigenvalues[:, None] - eigenvalues[None, :]
    scale = max(1., float(np.max(np.abs(eigenvalues))))
    degenerate = np.abs(gaps) <= 1e-12 * scale
    divided = np.where(
        degenerate,
        -1j * time * phases[:, None] * np.ones_like(gaps),
        (phases[:, None] - phases[None, :]) / np.where(degenerate, 1., gaps),
    )
    kernel = out_row[:, None] * divided * in_row[None, :]
    d_biases = np.einsum("nk,kl,nl->n", eigenvectors, kernel, eigenvectors)

    d_amplitude = np.append(d_biases, d_time)
    gradient = 2. * np.real(np.conj(amplitude) * d_amplitude)
    return 1. - fidelity, -gradient


def transfer_error(
    net: SpinNetwork,
    parameters: np.ndarray,
    output_spin: int,
    input_spin: int = 1,
) -> float:
    """Returns 1 - |<OUT| exp(-i H T) |IN>|^2."""
    return fidelity_and_gradient(net, parameters, output_spin, input_spin)[0]


def mirror_permutation(
    net: SpinNetwork, output_spin: int, input_spin: int = 1
) -> np.ndarray:
    """Returns the zero-based reflection n -> IN + OUT - n.

    On rings the reflection wraps around; on chains spins whose image falls
    off the chain are fixed.
    """
    spins = np.arange(1, net.size + 1)
    image = input_spin + output_spin - spins
    if net.topology is Topology.RING:
        image = (image - 1) % net.size + 1
    else:
        image = np.where((image >= 1) & (image <= net.size), image, spins)
    return image - 1


def initial_parameters(
    net: SpinNetwork,
    output_spin: int,
    config: OptimizationConfig,
    rng: np.random.Generator,
    input_spin: int = 1,
) -> np.ndarray:
    """Draws a start point for one restart of the configured scheme."""
    t_min, t_max = config.window(net.size)
    biases = rng.uniform(-config.delta_bound, config.delta_bound, net.size)
    if config.algorithm is Algorithm.C:
        biases = 0.5 * (
            biases + biases[mirror_permutation(net, output_spin, input_spin)]
        )
    return np.append(biases, rng.uniform(t_min, t_max))


def restart_rng(config: OptimizationConfig, restart_index: int
                ) -> np.random.Generator:
    """Returns the independent random stream of one restart."""
    sequence = np.random.SeedSequence(
        config.seed, spawn_key=(config.algorithm.index, restart_index)
    )
    return np.random.default_rng(sequence)


def optimize_controller(
    net: SpinNetwork,
    output_spin: int,
    config: OptimizationConfig,
    restart_index: int = 0,
    input_spin: int = 1,
    options: Optional[Dict[str, Any]] = None,
) -> Controller:
    """Runs one restart of the configured scheme.

    A run that does not converge still returns its best iterate, flagged
    with metadata["converged"] = False.

    Args:
        net: Spin network.
        output_spin: Target spin.
        config: Scheme settings.
        restart_index: Index of the restart, selects the random stream.
        input_spin: Initial spin.
        options: Extra solver options forwarded to scipy.optimize.minimize.
    """
    rng = restart_rng(config, restart_index)
    start = initial_parameters(net, output_spin, config, rng, input_spin)
    t_min, t_max = config.window(net.size)
    bounds = [(-config.delta_bound, config.delta_bound)] * net.size
    bounds.append((t_min, t_max))

    history: List[float] = []

    def record(parameters, *_) -> None:
        history.append(transfer_error(net, parameters, output_spin,
                                      input_spin))

    if config.algorithm is Algorithm.B:
        solver_options = {"maxiter": config.max_iterations,
                          "xatol": 1e-10, "fatol": 1e-14}
        solver_options.update(options or {})
        result = scipy.optimize.minimize(
            lambda x: transfer_error(net, x, output_spin, input_spin),
            start, method="Nelder-Mead", bounds=bounds, callback=record,
            options=solver_options,
        )
    else:
        solver_options = {"maxiter": config.max_iterations,
                          "gtol": config.gtol, "ftol": 1e-15}
        solver_options.update(options or {})
        result = scipy.optimize.minimize(
            lambda x: fidelity_and_gradient(net, x, output_spin, input_spin),
            start, jac=True, method="L-BFGS-B", bounds=bounds,
            callback=record, options=solver_options,
        )

    if not result.success:
        logger.debug("Restart %d of scheme %s stopped: %s", restart_index,
                     config.algorithm.value, result.message)

    biases, time = _split(result.x)
    monotone = bool(np.all(np.diff(history) <= 1e-12)) if history else True
    return Controller(
        biases=canonicalize_biases(biases),
        readout_time=time,
        output_spin=output_spin,
        input_spin=input_spin,
        metadata={
            "algorithm": config.algorithm.value,
            "restart": restart_index,
            "converged": bool(result.success),
            "iterations": int(result.nit),
            "monotone": monotone,
            "transfer_error": float(result.fun),
        },
    )


def _deduplicate(controllers: List[Controller]) -> List[Controller]:
    distinct: List[Controller] = []
    for ctrl in controllers:
        point = ctrl.parameters()
        if all(np.linalg.norm(point - other.parameters()) >= DUPLICATE_DISTANCE
               for other in distinct):
            distinct.append(ctrl)
    return distinct


def synthesize_set(
    net: SpinNetwork,
    output_spin: int,
    config: OptimizationConfig,
    count: int = DEFAULT_SET_SIZE,
    jobs: int = 1,
    input_spin: int = 1,
    options: Optional[Dict[str, Any]] = None,
) -> ControllerSet:
    """Returns the best `count` distinct controllers of all restarts.

    Restarts run in batches of config.restarts until `count` distinct
    optima exist or config.max_restarts starts were launched. Nominal
    errors are recomputed from the vectorized dynamics. Runs with
    e(T) >= 0.5 are dropped and optima closer than 1e-6 in (Delta, T) are
    merged.

    Raises:
        InsufficientOptimaError: If fewer than `count` distinct optima
            remain after config.max_restarts starts.
    """
    task = functools.partial(optimize_controller, net, output_spin, config,
                             input_spin=input_spin, options=options)
    basis = hermitian_basis(net.size)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    candidates: List[Controller] = []
    distinct: List[Controller] = []
    try:
        while len(candidates) < config.max_restarts:
            batch = range(len(candidates),
                          min(len(candidates) + config.restarts,
                              config.max_restarts))
            launched = list(pool.map(task, batch)) if pool \
                else [task(k) for k in batch]
            for ctrl in launched:
                system = LiouvilleSystem.from_problem(net, ctrl, basis)
                ctrl.nominal_error = fidelity_error(ctrl, system)
            candidates.extend(launched)

            accepted = sorted(
                (ctrl for ctrl in candidates
                 if ctrl.nominal_error < MAX_ERROR),
                key=lambda ctrl: ctrl.nominal_error,
            )
            distinct = _deduplicate(accepted)
            if len(distinct) >= count:
                break
            logger.info("%d distinct optima after %d restarts of scheme %s.",
                        len(distinct), len(candidates),
                        config.algorithm.value)
    finally:
        if pool:
            pool.shutdown()

    unconverged = sum(not ctrl.metadata["converged"] for ctrl in candidates)
    if unconverged:
        logger.warning("%d of %d restarts of scheme %s did not converge.",
                       unconverged, len(candidates), config.algorithm.value)
    if len(distinct) < count:
        raise InsufficientOptimaError(
            f"Only {len(distinct)} distinct optima with e(T) < {MAX_ERROR} "
            f"from {len(candidates)} restarts of {net} OUT={output_spin} "
            f"scheme {config.algorithm.value}; increase max_restarts."
        )
    logger.info("%s OUT=%d scheme %s: best e(T) = %.3g.", net, output_spin,
                config.algorithm.value, distinct[0].nominal_error)
    return ControllerSet(
        net=net,
        output_spin=output_spin,
        controllers=distinct[:count],
        config=config,
        input_spin=input_spin,
        metadata={"restarts": len(candidates), "distinct": len(distinct),
                  "unconverged": unconverged},
    )
