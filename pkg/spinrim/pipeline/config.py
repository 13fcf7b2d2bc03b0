"""Declarative configuration of the pipeline."""

import dataclasses
import json
import logging
import pathlib
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from spinrim.network import SpinNetwork, Topology, problem_id, \
    transfer_targets
from spinrim.optimizer import Algorithm

logger = logging.getLogger(__name__)

DEFAULT_RIM_DELTA = 0.05


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    """One transfer problem solved by one optimization scheme."""
    size: int
    topology: Topology
    output_spin: int
    algorithm: Algorithm

    @property
    def network(self) -> SpinNetwork:
        return SpinNetwork(self.size, self.topology)

    @property
    def id(self) -> str:
        return problem_id(self.network, self.output_spin,
                          self.algorithm.value)

    @staticmethod
    def parse(text: str, algorithms: Sequence[str] = ("A", "B", "C")
              ) -> List["Problem"]:
        """Parses "ring:6:4:A", "ring:6:4" or "chain:5".

        Omitted fields expand to every transfer target and every algorithm.

        Raises:
            ConfigError: On malformed text.
        """
        parts = text.strip().split(":")
        if not 2 <= len(parts) <= 4:
            raise ConfigError(
                f"Problem {text!r} is not of the form "
                "topology:N[:OUT[:ALGORITHM]]."
            )
        try:
            topology = Topology(parts[0].lower())
            size = int(parts[1])
            net = SpinNetwork(size, topology)
            targets = [int(parts[2])] if len(parts) > 2 else \
                transfer_targets(net)
            schemes = [Algorithm(parts[3].upper())] if len(parts) > 3 else \
                [Algorithm(a) for a in algorithms]
        except ValueError as error:
            raise ConfigError(f"Problem {text!r}: {error}") from error

        for out in targets:
            if not 1 <= out <= size:
                raise ConfigError(
                    f"Problem {text!r}: output spin {out} not in 1..{size}."
                )
        return [Problem(size, topology, out, scheme)
                for out in targets for scheme in schemes]


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of a full pipeline run.

    Attributes:
        problems: Problem specifications, see Problem.parse.
        synth_seed: Master seed of the controller optimization.
        dephasing_seed: Seed of the dephasing set, shared by all controllers
            of a problem.
        delta_max: Largest dephasing strength.
        delta_steps: Number of intervals of the strength grid.
        num_ops: Dephasing operators per set.
        num_controllers: Controllers kept per problem.
        restarts: Optimizer restarts per batch.
        max_restarts: Cap on the optimizer restarts per problem.
        algorithms: Schemes used when a problem does not name one.
        out_dir: Root of all outputs.
        jobs: Worker processes or threads.
        heatmap_points: Log-spaced strengths of the tau heat map.
        full_heatmap: Use every grid strength in the heat map.
        alpha: Significance level.
        rim_delta: Strength at which RIM enters the hypothesis tests.
            None selects min(0.05, delta_max).
        keep_grids: Write the full error grids.
        min_controllers: Smallest controller set the hypothesis tests accept.
    """
    problems: Tuple[str, ...] = ("chain:5", "ring:6")
    synth_seed: int = 0
    dephasing_seed: int = 1
    delta_max: float = 0.1
    delta_steps: int = 1000
    num_ops: int = 1000
    num_controllers: int = 100
    restarts: int = 100
    max_restarts: int = 1000
    algorithms: Tuple[str, ...] = ("A", "B", "C")
    out_dir: str = "spinrim_out"
    jobs: int = 1
    heatmap_points: int = 20
    full_heatmap: bool = False
    alpha: float = 0.05
    rim_delta: Optional[float] = None
    keep_grids: bool = True
    min_controllers: int = 20

    def __post_init__(self) -> None:
        for name in ("problems", "algorithms"):
            value = getattr(self, name)
            if isinstance(value, str):
                value = [item for item in value.split(",") if item]
            object.__setattr__(self, name, tuple(value))
        checks = (
            (self.delta_max > 0., "delta_max must be positive"),
            (self.delta_steps >= 4, "delta_steps must be at least 4"),
            (self.num_ops >= 1, "num_ops must be positive"),
            (self.num_controllers >= 2, "num_controllers must be at least 2"),
            (self.restarts >= 1, "restarts must be positive"),
            (self.max_restarts >= max(self.restarts, self.num_controllers),
             "max_restarts must be at least restarts and num_controllers"),
            (self.jobs >= 1, "jobs must be positive"),
            (0. < self.alpha < 1., "alpha must be in (0, 1)"),
            (self.rim_delta is None
             or 0. < self.rim_delta <= self.delta_max,
             "rim_delta must be in (0, delta_max]"),
            (self.min_controllers >= 2, "min_controllers must be at least 2"),
        )
        for passed, message in checks:
            if not passed:
                raise ConfigError(message + ".")
        self.problem_list()

    @property
    def delta_step(self) -> float:
        return self.delta_max / self.delta_steps

    @property
    def rim_strength(self) -> float:
        """Returns rim_delta, or min(0.05, delta_max) when it is unset."""
        if self.rim_delta is None:
            return min(DEFAULT_RIM_DELTA, self.delta_max)
        return self.rim_delta

    @property
    def out_path(self) -> pathlib.Path:
        return pathlib.Path(self.out_dir)

    def problem_list(self) -> List[Problem]:
        """Returns the expanded problems in configuration order."""
        problems: List[Problem] = []
        for text in self.problems:
            for problem in Problem.parse(text, self.algorithms):
                if problem not in problems:
                    problems.append(problem)
        return problems

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["problems"] = list(self.problems)
        data["algorithms"] = list(self.algorithms)
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "PipelineConfig":
        """Raises ConfigError on unknown keys or invalid values."""
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}.")
        try:
            return PipelineConfig(**data)
        except TypeError as error:
            raise ConfigError(str(error)) from error

    @staticmethod
    def from_file(path) -> "PipelineConfig":
        """Reads a JSON configuration file."""
        path = pathlib.Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as error:
            raise ConfigError(f"Cannot read config {path}: {error}") from error
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must hold a JSON object.")
        return PipelineConfig.from_dict(data)

    def with_overrides(self, **overrides: Optional[Any]) -> "PipelineConfig":
        """Returns a copy with every override that is not None applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return PipelineConfig.from_dict({**self.to_dict(), **changes})
