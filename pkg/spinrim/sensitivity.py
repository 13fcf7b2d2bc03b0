"""Analytic and estimated sensitivities of the fidelity error to dephasing.

The differential sensitivity is the derivative of the perturbed error with
respect to the dephasing strength at delta = 0,

    zeta(S, T) = -c exp(T A) (T S) r0,

valid when [A, S] = 0. The log-sensitivity divides it by the nominal error,
s(S, T) = zeta(S, T) / e(T). Averaging over a dephasing set gives s_a and
zeta_a. The estimates s_k and zeta_k are instead read off a smoothing spline
fitted to the mean of the perturbed error distributions.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.linalg
import scipy.stats

from spinrim.dephasing import DephasingSet
from spinrim.dynamics import ErrorGrid, commutes, fidelity_error
from spinrim.liouville import LiouvilleSystem
from spinrim.network import Controller

logger = logging.getLogger(__name__)

# Nominal errors below this make log-sensitivities undefined
DEGENERATE_ERROR = 1e-12
# Controllers below this are left out of log-sensitivity statistics
EXCLUDED_ERROR = 1e-10
ANCHOR_WEIGHT = 1e3
STENCIL_AGREEMENT = 0.05
KDE_POINTS = 512


class DegenerateControllerError(ValueError):
    pass


class InvalidModelError(ValueError):
    pass


@dataclass
class SensitivityRecord:
    """Sensitivity measures of one controller against one dephasing set.

    Log-sensitivities are NaN for degenerate controllers.
    """
    controller_id: str
    nominal_error: float
    s_a: float
    s_k: float
    zeta_a: float
    zeta_k: float
    per_op_s: np.ndarray = field(repr=False)
    per_op_zeta: np.ndarray = field(repr=False)
    degenerate: bool = False

    def to_row(self) -> Dict[str, Any]:
        return {
            "controller_id": self.controller_id,
            "e_T": self.nominal_error,
            "s_a": self.s_a,
            "s_k": self.s_k,
            "zeta_a": self.zeta_a,
            "zeta_k": self.zeta_k,
        }


def _require_commuting(system: LiouvilleSystem, superop: np.ndarray) -> None:
    if not commutes(system.superop, superop):
        raise InvalidModelError(
            "Dephasing superoperator does not commute with A; the analytic "
            "sensitivity does not apply."
        )


def _final_covector(ctrl: Controller, system: LiouvilleSystem) -> np.ndarray:
    """Returns c exp(T A)."""
    return system.target @ scipy.linalg.expm(
        ctrl.readout_time * system.superop
    )


def differential_sensitivity(
    ctrl: Controller, system: LiouvilleSystem, superop: np.ndarray
) -> float:
    """Returns zeta(S, T) = -c exp(T A) (T S) r0."""
    covector = _final_covector(ctrl, system)
    return float(-ctrl.readout_time * covector @ superop @ system.initial)


def analytic_log_sensitivity(
    ctrl: Controller,
    system: LiouvilleSystem,
    superop: np.ndarray,
    nominal_error: Optional[float] = None,
) -> float:
    """Returns s(S, T) = zeta(S, T) / e(T).

    Args:
        ctrl: Controller.
        system: LTI data of the transfer problem.
        superop: Dephasing superoperator S.
        nominal_error: e(T) if already known.

    Raises:
        DegenerateControllerError: If e(T) < 1e-12.
        InvalidModelError: If [A, S] != 0.
    """
    if nominal_error is None:
        nominal_error = fidelity_error(ctrl, system)
    if nominal_error < DEGENERATE_ERROR:
        raise DegenerateControllerError(
            f"Nominal error {nominal_error!r} is too small for a "
            "log-sensitivity."
        )
    _require_commuting(system, superop)
    return differential_sensitivity(ctrl, system, superop) / nominal_error


def analytic_sensitivities(
    ctrl: Controller, system: LiouvilleSystem, dephasing_set: DephasingSet
) -> np.ndarray:
    """Returns zeta(S_mu, T) for every operator of the set.

    Raises:
        InvalidModelError: If any superoperator does not commute with A.
    """
    superops = dephasing_set.superops()
    for mu, superop in enumerate(superops):
        if not commutes(system.superop, superop):
            raise InvalidModelError(
                f"Dephasing operator {mu} does not commute with A."
            )
    covector = _final_covector(ctrl, system)
    return -ctrl.readout_time * np.einsum(
        "i,mij,j->m", covector, superops, system.initial
    )


@dataclass(frozen=True)
class ErrorDensity:
    """Kernel density estimate of the error distribution at one strength.

    A constant row has no density; it is described by point_mass instead.
    """
    support: np.ndarray
    density: np.ndarray
    bandwidth: float
    point_mass: Optional[float] = None

    @property
    def is_point_mass(self) -> bool:
        return self.point_mass is not None

    def integral(self) -> float:
        if self.is_point_mass:
            return 1.
        return float(scipy.integrate.trapezoid(self.density, self.support))

    def mean(self) -> float:
        if self.is_point_mass:
            return self.point_mass
        weighted = scipy.integrate.trapezoid(
            self.support * self.density, self.support
        )
        return float(weighted / self.integral())


def error_density(
    errors: np.ndarray, points: int = KDE_POINTS
) -> ErrorDensity:
    """Returns a Gaussian KDE with Silverman bandwidth for the errors.

    The support extends three bandwidths past the extreme samples.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if np.ptp(errors) == 0.:
        return ErrorDensity(
            support=errors[:1].copy(), density=np.ones(1), bandwidth=0.,
            point_mass=float(errors[0]),
        )
    kde = scipy.stats.gaussian_kde(errors, bw_method="silverman")
    bandwidth = float(kde.factor * np.std(errors, ddof=1))
    support = np.linspace(
        errors.min() - 3 * bandwidth, errors.max() + 3 * bandwidth, points
    )
    return ErrorDensity(support, kde(support), bandwidth)


def kde_error_density(
    grid: ErrorGrid, index: int, points: int = KDE_POINTS
) -> ErrorDensity:
    """Returns the error density over the dephasing set at delta(index)."""
    return error_density(grid.row(index), points)


@dataclass(frozen=True)
class MeanErrorCurve:
    """Smoothing spline of the mean error as a function of delta.

    The spline is fitted on the rescaled variable u = delta / delta_max.
    """
    spline: scipy.interpolate.BSpline
    delta_max: float

    def __call__(self, delta):
        return self.spline(np.asarray(delta) / self.delta_max)

    def derivative(self, delta: float = 0.) -> float:
        """Returns the first derivative with respect to delta."""
        slope = self.spline.derivative()(delta / self.delta_max)
        return float(slope) / self.delta_max


def fit_smoothing_spline(
    deltas: np.ndarray,
    means: np.ndarray,
    anchor_weight: float = ANCHOR_WEIGHT,
) -> MeanErrorCurve:
    """Fits a cubic smoothing spline with a GCV-selected penalty.

    The first point (delta = 0, the exact nominal error) is weighted by
    anchor_weight so the curve passes through it.

    Raises:
        ValueError: If fewer than five points are given.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    if deltas.size < 5:
        raise ValueError(
            f"A smoothing spline needs at least five points, got "
            f"{deltas.size}."
        )
    weights = np.ones_like(deltas)
    weights[0] = anchor_weight
    delta_max = float(deltas[-1])
    spline = scipy.interpolate.make_smoothing_spline(
        deltas / delta_max, means, w=weights
    )
    return MeanErrorCurve(spline, delta_max)


def smooth_mean_error(
    grid: ErrorGrid, delta_max: Optional[float] = None
) -> MeanErrorCurve:
    """Returns the smoothed mean error curve of a grid.

    Args:
        grid: Error grid.
        delta_max: Truncate the fit to strengths up to this value.
    """
    stop = len(grid.grid)
    if delta_max is not None:
        stop = grid.grid.index_of(delta_max) + 1
    return fit_smoothing_spline(grid.grid.values[:stop], grid.means()[:stop])


def fd_derivative(means: np.ndarray, step: float) -> float:
    """Returns the one-sided five-point derivative of means at index 0."""
    f = np.asarray(means, dtype=np.float64)
    if f.size < 5:
        raise ValueError("The stencil needs five points.")
    return float(
        (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4])
        / (12 * step)
    )


def fd_log_sensitivity(
    means: np.ndarray, step: float, nominal_error: float
) -> float:
    """Returns the stencil derivative of the mean error over e(T).

    Raises:
        DegenerateControllerError: If e(T) < 1e-12.
    """
    if nominal_error < DEGENERATE_ERROR:
        raise DegenerateControllerError(
            f"Nominal error {nominal_error!r} is too small for a "
            "log-sensitivity."
        )
    return fd_derivative(means, step) / nominal_error


def _estimated_zeta(
    grid: ErrorGrid, delta_max: Optional[float] = None
) -> float:
    """Returns the spline slope at zero, cross-checked against the stencil."""
    zeta = smooth_mean_error(grid, delta_max).derivative(0.)
    stencil = fd_derivative(grid.means()[:5], grid.grid.step)
    scale = max(abs(zeta), abs(stencil))
    if scale > 0. and abs(zeta - stencil) > STENCIL_AGREEMENT * scale:
        logger.warning(
            "Spline slope %.6g and stencil slope %.6g disagree for "
            "controller %r.", zeta, stencil, grid.controller_id,
        )
    return zeta


def kde_log_sensitivity(
    grid: ErrorGrid,
    nominal_error: float,
    delta_max: Optional[float] = None,
) -> Tuple[float, float]:
    """Returns (s_k, zeta_k) from the smoothed mean of the error densities.

    The mean of a Gaussian KDE equals the sample mean, so the smoothed
    curve is fitted to the row means of the grid.

    Args:
        grid: Error grid of the controller.
        nominal_error: e(T).
        delta_max: Truncate the fit to strengths up to this value.

    Raises:
        DegenerateControllerError: If e(T) < 1e-12.
    """
    if nominal_error < DEGENERATE_ERROR:
        raise DegenerateControllerError(
            f"Nominal error {nominal_error!r} is too small for a "
            "log-sensitivity."
        )
    zeta = _estimated_zeta(grid, delta_max)
    return zeta / nominal_error, zeta


def sensitivity_record(
    ctrl: Controller,
    system: LiouvilleSystem,
    dephasing_set: DephasingSet,
    grid: ErrorGrid,
    controller_id: Optional[str] = None,
    nominal_error: Optional[float] = None,
) -> SensitivityRecord:
    """Computes every sensitivity measure of one controller.

    Controllers with e(T) < 1e-10 are flagged degenerate and get NaN
    log-sensitivities; their differential sensitivities are still filled.
    """
    controller_id = controller_id or grid.controller_id
    if nominal_error is None:
        nominal_error = fidelity_error(ctrl, system)

    per_op_zeta = analytic_sensitivities(ctrl, system, dephasing_set)
    zeta_a = math.fsum(per_op_zeta) / per_op_zeta.size
    zeta_k = _estimated_zeta(grid)

    if nominal_error < EXCLUDED_ERROR:
        logger.warning(
            "Controller %r has nominal error %.3g; log-sensitivities are "
            "left out.", controller_id, nominal_error,
        )
        return SensitivityRecord(
            controller_id, nominal_error, math.nan, math.nan, zeta_a, zeta_k,
            np.full_like(per_op_zeta, math.nan), per_op_zeta, degenerate=True,
        )

    per_op_s = per_op_zeta / nominal_error
    return SensitivityRecord(
        controller_id=controller_id,
        nominal_error=nominal_error,
        s_a=zeta_a / nominal_error,
        s_k=zeta_k / nominal_error,
        zeta_a=zeta_a,
        zeta_k=zeta_k,
        per_op_s=per_op_s,
        per_op_zeta=per_op_zeta,
    )
