"""Kendall rank correlation and the one-tailed tests on robustness measures.

Two families of tests are run per controller set: concordance between pairs
of robustness measures (H1: positive correlation) and the trade-off between
each measure and the nominal error (H1: negative correlation).
"""

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

logger = logging.getLogger(__name__)

ALPHA = 0.05
# Normal approximation of the tau statistic is unreliable below this
MIN_NORMAL_SAMPLES = 10
MIN_CONTROLLERS = 20
# p-values below this are reported as zero
REPORTED_P_FLOOR = 1e-16

MEASURES = ("e_T", "s_a", "s_k", "zeta_a", "zeta_k", "rim1", "rim1_adjusted")

CONCORDANCE_PAIRS = (
    ("s_a", "s_k"),
    ("s_a", "rim1"),
    ("s_k", "rim1"),
    ("zeta_a", "zeta_k"),
    ("zeta_a", "rim1_adjusted"),
    ("zeta_k", "rim1_adjusted"),
)

TRADEOFF_MEASURES = ("s_a", "s_k", "rim1", "zeta_a", "zeta_k",
                     "rim1_adjusted")

SENTINEL_PAIR = ("e_T", "e_T")


class UndefinedTauError(ValueError):
    pass


class Tail(str, enum.Enum):
    CONCORDANCE = "concordance"
    DISCORDANCE = "discordance"


class Decision(str, enum.Enum):
    REJECT = "RejectH0"
    FAIL_TO_REJECT = "FailToReject"


class Trend(str, enum.Enum):
    CONCORDANT = "concordant"
    DISCORDANT = "discordant"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class TauResult:
    """Kendall tau with its one-tailed significance.

    Attributes:
        tau: Kendall tau-b in [-1, 1].
        n: Number of samples.
        z: Normal test statistic of tau.
        p: One-tailed p-value for the given tail.
        tail: Alternative hypothesis.
        decision: RejectH0 iff p < alpha.
    """
    tau: float
    n: int
    z: float
    p: float
    tail: Tail
    decision: Decision

    @property
    def reported_p(self) -> float:
        return 0. if self.p < REPORTED_P_FLOOR else self.p

    @property
    def rejected(self) -> bool:
        return self.decision is Decision.REJECT


def _check_vectors(x: Sequence[float], y: Sequence[float]
                   ) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(
            f"Need two vectors of equal length, got {x.shape} and {y.shape}."
        )
    if x.size < 2:
        raise ValueError("Kendall tau needs at least two samples.")
    for name, values in (("x", x), ("y", y)):
        if np.all(values == values[0]):
            raise UndefinedTauError(
                f"All values of {name} are tied; tau is undefined."
            )
    return x, y


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Returns Kendall's tau-b in O(n log n).

    Raises:
        ValueError: On vectors of different length or fewer than two samples.
        UndefinedTauError: If either vector is entirely tied.
    """
    x, y = _check_vectors(x, y)
    tau, _ = scipy.stats.kendalltau(x, y, variant="b")
    return float(tau)


def kendall_tau_bruteforce(x: Sequence[float], y: Sequence[float]) -> float:
    """Returns Kendall's tau-b by counting all pairs."""
    x, y = _check_vectors(x, y)
    upper = np.triu_indices(x.size, 1)
    dx = np.sign(x[:, None] - x[None, :])[upper]
    dy = np.sign(y[:, None] - y[None, :])[upper]
    concordant = int(np.sum(dx * dy > 0))
    discordant = int(np.sum(dx * dy < 0))
    # Pairs tied in both count for neither.
    tied_x = int(np.sum((dx == 0) & (dy != 0)))
    tied_y = int(np.sum((dy == 0) & (dx != 0)))
    pairs = concordant + discordant
    return (concordant - discordant) / math.sqrt(
        (pairs + tied_x) * (pairs + tied_y)
    )


def tau_statistic(tau: float, n: int) -> float:
    """Returns Z = tau / sqrt(2 (2n + 5) / (9 n (n - 1)))."""
    if n < 2:
        raise ValueError(f"Need at least two samples but n = {n}.")
    return tau / math.sqrt(2 * (2 * n + 5) / (9 * n * (n - 1)))


def tau_significance(
    tau: float,
    n: int,
    tail: Tail = Tail.CONCORDANCE,
    alpha: float = ALPHA,
) -> TauResult:
    """Returns the one-tailed significance of tau.

    The p-value is 1 - Phi(Z) for the concordance tail and Phi(Z) for the
    discordance tail.
    """
    tail = Tail(tail)
    if n < MIN_NORMAL_SAMPLES:
        warnings.warn(
            f"n = {n} < {MIN_NORMAL_SAMPLES}: normal approximation of tau "
            "is unreliable."
        )
    z = tau_statistic(tau, n)
    if tail is Tail.CONCORDANCE:
        p = float(scipy.stats.norm.sf(z))
    else:
        p = float(scipy.stats.norm.cdf(z))
    decision = Decision.REJECT if p < alpha else Decision.FAIL_TO_REJECT
    return TauResult(float(tau), int(n), float(z), p, tail, decision)


def tau_test(
    x: Sequence[float],
    y: Sequence[float],
    tail: Tail = Tail.CONCORDANCE,
    alpha: float = ALPHA,
) -> TauResult:
    """Returns tau of two samples with its one-tailed significance."""
    return tau_significance(kendall_tau(x, y), len(x), tail, alpha)


def classify_trend(
    x: Sequence[float], y: Sequence[float], alpha: float = ALPHA
) -> Trend:
    """Runs both one-tailed tests and labels the trend between x and y."""
    tau = kendall_tau(x, y)
    n = len(x)
    if tau_significance(tau, n, Tail.CONCORDANCE, alpha).rejected:
        return Trend.CONCORDANT
    if tau_significance(tau, n, Tail.DISCORDANCE, alpha).rejected:
        return Trend.DISCORDANT
    return Trend.INCONCLUSIVE


@dataclass
class ControllerMeasures:
    """Robustness measures of a controller set, one entry per controller."""
    problem: str
    controller_ids: List[str]
    e_T: np.ndarray
    s_a: np.ndarray
    s_k: np.ndarray
    zeta_a: np.ndarray
    zeta_k: np.ndarray
    rim1: np.ndarray
    rim1_adjusted: np.ndarray

    def __post_init__(self) -> None:
        for name in MEASURES:
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.shape != (len(self.controller_ids),):
                raise ValueError(
                    f"Measure {name} has shape {values.shape} but there are "
                    f"{len(self.controller_ids)} controllers."
                )
            setattr(self, name, values)

    def __len__(self) -> int:
        return len(self.controller_ids)

    def column(self, name: str) -> np.ndarray:
        if name not in MEASURES:
            raise KeyError(f"Unknown measure {name!r}.")
        return getattr(self, name)

    @staticmethod
    def from_records(
        problem: str,
        records: Sequence,
        rim1: Sequence[float],
        rim1_adjusted: Sequence[float],
    ) -> "ControllerMeasures":
        """Collects measures from sensitivity records and RIM values.

        Args:
            problem: Problem identifier.
            records: SensitivityRecord per controller.
            rim1: RIM at the evaluation strength, per controller.
            rim1_adjusted: Adjusted RIM at the same strength.
        """
        return ControllerMeasures(
            problem=problem,
            controller_ids=[record.controller_id for record in records],
            e_T=[record.nominal_error for record in records],
            s_a=[record.s_a for record in records],
            s_k=[record.s_k for record in records],
            zeta_a=[record.zeta_a for record in records],
            zeta_k=[record.zeta_k for record in records],
            rim1=rim1,
            rim1_adjusted=rim1_adjusted,
        )


@dataclass(frozen=True)
class SuiteCase:
    problem: str
    pair: Tuple[str, str]
    result: TauResult

    @property
    def pair_name(self) -> str:
        return f"{self.pair[0]} vs {self.pair[1]}"

    def to_row(self) -> Dict[str, object]:
        problem, _, algorithm = self.problem.rpartition("_")
        return {
            "problem": problem or self.problem,
            "algorithm": algorithm if problem else "",
            "measure_pair": self.pair_name,
            "tau": self.result.tau,
            "p": self.result.reported_p,
            "decision": self.result.decision.value,
        }


@dataclass
class HypothesisSuite:
    """Test cases of one hypothesis family over many controller sets."""
    name: str
    tail: Tail
    alpha: float = ALPHA
    cases: List[SuiteCase] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def extend(self, other: "HypothesisSuite") -> None:
        self.cases.extend(other.cases)

    def rejected(self) -> List[SuiteCase]:
        return [case for case in self.cases if case.result.rejected]

    def failed(self) -> List[SuiteCase]:
        return [case for case in self.cases if not case.result.rejected]

    def rows(self) -> List[Dict[str, object]]:
        return [case.to_row() for case in self.cases]


def _finite_pair(x: np.ndarray, y: np.ndarray
                 ) -> Tuple[np.ndarray, np.ndarray]:
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep]


def _run_pairs(
    name: str,
    measures: ControllerMeasures,
    pairs: Iterable[Tuple[str, str]],
    tail: Tail,
    alpha: float,
    min_controllers: int,
) -> HypothesisSuite:
    if len(measures) < min_controllers:
        raise ValueError(
            f"Problem {measures.problem} has {len(measures)} controllers; "
            f"the tests need at least {min_controllers}."
        )
    suite = HypothesisSuite(name, tail, alpha)
    for pair in pairs:
        x, y = _finite_pair(measures.column(pair[0]),
                            measures.column(pair[1]))
        if x.size < len(measures):
            logger.info("%s: dropped %d degenerate controllers for %s vs %s.",
                        measures.problem, len(measures) - x.size, *pair)
        if x.size < 2:
            logger.warning("%s: skipping %s vs %s: fewer than two finite "
                           "values.", measures.problem, *pair)
            continue
        try:
            result = tau_test(x, y, tail, alpha)
        except UndefinedTauError as error:
            logger.warning("%s: skipping %s vs %s: %s",
                           measures.problem, pair[0], pair[1], error)
            continue
        suite.cases.append(SuiteCase(measures.problem, pair, result))
    return suite


def concordance_suite(
    measures: ControllerMeasures,
    alpha: float = ALPHA,
    min_controllers: int = MIN_CONTROLLERS,
) -> HypothesisSuite:
    """Tests every pair of robustness measures for positive correlation."""
    return _run_pairs("concordance", measures, CONCORDANCE_PAIRS,
                      Tail.CONCORDANCE, alpha, min_controllers)


def tradeoff_suite(
    measures: ControllerMeasures,
    alpha: float = ALPHA,
    min_controllers: int = MIN_CONTROLLERS,
) -> HypothesisSuite:
    """Tests every robustness measure against e(T) for negative correlation.

    The self-test e(T) vs e(T) must give tau = 1; it is checked and left out
    of the suite.

    Raises:
        ArithmeticError: If the self-test fails.
    """
    sentinel = kendall_tau(*(measures.column(name) for name in SENTINEL_PAIR))
    if not math.isclose(sentinel, 1.):
        raise ArithmeticError(f"Self-test tau(e_T, e_T) = {sentinel} != 1.")
    pairs = [(measure, "e_T") for measure in TRADEOFF_MEASURES]
    return _run_pairs("tradeoff", measures, pairs, Tail.DISCORDANCE,
                      alpha, min_controllers)


def failure_consistency(
    suite: HypothesisSuite, measures: Optional[Sequence[str]] = None
) -> Dict[str, bool]:
    """Checks that failing problems are the same for all measures.

    Args:
        suite: Trade-off suite.
        measures: Measures to compare. Defaults to the differential
            sensitivities and the adjusted RIM.

    Returns:
        Mapping from problem to True if the listed measures either all
        reject or all fail to reject H0 for that problem.
    """
    measures = measures or ("zeta_a", "zeta_k", "rim1_adjusted")
    outcomes: Dict[str, Dict[str, bool]] = {}
    for case in suite:
        if case.pair[0] in measures:
            outcomes.setdefault(case.problem, {})[case.pair[0]] = \
                case.result.rejected
    return {
        problem: len(set(decisions.values())) == 1
        for problem, decisions in outcomes.items()
    }
