"""Robustness infidelity measure RIM_1 and its link to the sensitivities.

RIM_1(delta) is the expected fidelity error under dephasing of strength
delta, estimated as the mean over the dephasing set. Its derivative at
delta = 0 is the mean differential sensitivity.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.stats

from spinrim.dynamics import ERROR_SLACK, ErrorGrid
from spinrim.sensitivity import SensitivityRecord
from spinrim.stats import UndefinedTauError, kendall_tau

logger = logging.getLogger(__name__)

THEOREM_TOLERANCE = 1e-3
HEATMAP_POINTS = 20
HEATMAP_RANGE = (0.005, 0.1)


@dataclass(frozen=True)
class RimCurve:
    """RIM_1 of one controller over the strength grid.

    Attributes:
        controller_id: Name of the controller.
        deltas: Dephasing strengths.
        values: RIM_1(delta), values[0] = e(T).
        adjusted: RIM_1(delta) - e(T).
    """
    controller_id: str
    deltas: np.ndarray
    values: np.ndarray
    adjusted: np.ndarray

    @property
    def nominal_error(self) -> float:
        return float(self.values[0])

    def index_of(self, delta: float) -> int:
        """Returns the index of the grid strength closest to delta."""
        if not self.deltas[0] <= delta <= self.deltas[-1] * (1 + 1e-12):
            raise ValueError(
                f"Delta = {delta} lies outside [0, {self.deltas[-1]}]."
            )
        return int(np.argmin(np.abs(self.deltas - delta)))

    def at(self, delta: float) -> Tuple[float, float]:
        """Returns (RIM_1, adjusted RIM_1) at the grid strength nearest delta."""
        index = self.index_of(delta)
        return float(self.values[index]), float(self.adjusted[index])


def rim1_curve(grid: ErrorGrid) -> RimCurve:
    """Returns the mean error over the dephasing set for every strength."""
    values = grid.means()
    adjusted = values - values[0]
    if np.any(adjusted < -ERROR_SLACK):
        logger.warning(
            "Controller %r: dephasing lowers the mean error by up to %.3g.",
            grid.controller_id, -float(adjusted.min()),
        )
    return RimCurve(grid.controller_id, grid.grid.values, values, adjusted)


@dataclass(frozen=True)
class TheoremCheck:
    """Mean differential sensitivity against the slope of RIM_1 at zero.

    relative_error is NaN when zeta_a = 0; absolute_error is always set.
    """
    controller_id: str
    zeta_a: float
    rim_slope: float
    absolute_error: float
    relative_error: float
    zero_sensitivity: bool = False

    def passed(self, tolerance: float = THEOREM_TOLERANCE) -> bool:
        if self.zero_sensitivity:
            return self.absolute_error <= tolerance
        return self.relative_error <= tolerance


def theorem1_check(
    record: SensitivityRecord, curve: RimCurve
) -> TheoremCheck:
    """Compares zeta_a with the forward difference of RIM_1 at zero.

    Args:
        record: Sensitivities of the controller.
        curve: RIM_1 curve of the same controller and dephasing set.
    """
    step = float(curve.deltas[1])
    if not math.isclose(step, 1e-4):
        logger.info("Forward difference uses step %.3g instead of 1e-4.", step)
    slope = float(curve.adjusted[1]) / step
    absolute = abs(record.zeta_a - slope)
    if record.zeta_a == 0.:
        return TheoremCheck(curve.controller_id, 0., slope, absolute,
                            math.nan, zero_sensitivity=True)
    return TheoremCheck(curve.controller_id, record.zeta_a, slope, absolute,
                        absolute / abs(record.zeta_a))


@dataclass(frozen=True)
class DeltaHeatmap:
    """Kendall tau between controller rankings by RIM_1 at two strengths."""
    deltas: np.ndarray
    indices: np.ndarray
    tau: np.ndarray

    def min_tau(
        self, delta: float, bounds: Tuple[float, float] = HEATMAP_RANGE
    ) -> float:
        """Returns the smallest tau between delta and strengths in bounds.

        NaN when no defined cell is left.

        Raises:
            ValueError: If delta is not one of the heat map strengths.
        """
        row = int(np.argmin(np.abs(self.deltas - delta)))
        if not math.isclose(self.deltas[row], delta, rel_tol=1e-9):
            raise ValueError(f"Delta = {delta} is not in the heat map.")
        low, high = bounds
        columns = (self.deltas >= low * (1 - 1e-9)) \
            & (self.deltas <= high * (1 + 1e-9))
        values = self.tau[row, columns]
        values = values[~np.isnan(values)]
        return float(values.min()) if values.size else math.nan


def heatmap_indices(
    deltas: np.ndarray,
    points: int = HEATMAP_POINTS,
    bounds: Tuple[float, float] = HEATMAP_RANGE,
    include: Sequence[float] = (),
) -> np.ndarray:
    """Returns grid indices nearest to log-spaced strengths within bounds.

    Strengths in include are always added.
    """
    step = deltas[1] - deltas[0]
    targets = np.concatenate([np.geomspace(bounds[0], bounds[1], points),
                              np.asarray(include, dtype=np.float64)])
    indices = np.clip(np.rint(targets / step).astype(int), 1, len(deltas) - 1)
    return np.unique(indices)


def rim_delta_selection(
    curves: Sequence[RimCurve],
    points: int = HEATMAP_POINTS,
    bounds: Tuple[float, float] = HEATMAP_RANGE,
    full: bool = False,
    include: Sequence[float] = (),
) -> DeltaHeatmap:
    """Returns the tau heat map over pairs of strengths (delta_1, delta_2).

    Cells where a ranking is entirely tied are NaN.

    Args:
        curves: RIM_1 curves of at least two controllers on a common grid.
        points: Number of log-spaced strengths.
        bounds: Range of the log-spaced strengths.
        full: Use every grid strength instead.
        include: Strengths always added to the log-spaced ones.

    Raises:
        ValueError: With fewer than two controllers or mismatched grids.
    """
    if len(curves) < 2:
        raise ValueError("The heat map needs at least two controllers.")
    deltas = curves[0].deltas
    for curve in curves[1:]:
        if not np.array_equal(curve.deltas, deltas):
            raise ValueError("All curves must share one strength grid.")

    if full:
        indices = np.arange(len(deltas))
    else:
        indices = heatmap_indices(deltas, points, bounds, include)
    table = np.array([curve.values[indices] for curve in curves])

    size = indices.size
    tau = np.full((size, size), np.nan)
    for i in range(size):
        for j in range(i, size):
            try:
                tau[i, j] = tau[j, i] = kendall_tau(table[:, i], table[:, j])
            except UndefinedTauError:
                pass
    return DeltaHeatmap(deltas[indices], indices, tau)


def rim_at(
    curves: Sequence[RimCurve], delta: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (RIM_1, adjusted RIM_1) of every curve at one strength."""
    pairs = np.array([curve.at(delta) for curve in curves])
    return pairs[:, 0], pairs[:, 1]


def robustness_outliers(
    curves: Sequence[RimCurve],
    zeta_a: Sequence[float],
    delta: float,
    threshold: float = 0.25,
) -> List[str]:
    """Returns controllers ranked very differently by RIM and by zeta_a.

    A controller is an outlier when its rank by adjusted RIM_1 at delta and
    its rank by zeta_a differ by more than threshold times the set size.
    These controllers are locally sensitive but globally robust, or the
    reverse.
    """
    _, adjusted = rim_at(curves, delta)
    zeta_a = np.asarray(zeta_a, dtype=np.float64)
    if zeta_a.shape != adjusted.shape:
        raise ValueError("Need one zeta_a per curve.")
    gap = np.abs(scipy.stats.rankdata(adjusted) - scipy.stats.rankdata(zeta_a))
    return [curves[k].controller_id
            for k in np.flatnonzero(gap > threshold * len(curves))]
