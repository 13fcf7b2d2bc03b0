"""Unit tests for the pipeline configuration."""

import json

import pytest

from spinrim.network import Topology
from spinrim.optimizer import Algorithm
from spinrim.pipeline.config import ConfigError, PipelineConfig, Problem


def test_parse_full_problem():
    """Tests a fully specified problem."""
    (problem,) = Problem.parse("ring:6:4:b")
    assert problem == Problem(6, Topology.RING, 4, Algorithm.B)
    assert problem.id == "ring6_out4_B"
    assert problem.network.size == 6


def test_parse_expands_targets_and_algorithms():
    """Tests omitted fields expand to every target and algorithm."""
    problems = Problem.parse("chain:5")
    assert [p.id for p in problems] == [
        "chain5_out3_A", "chain5_out3_B", "chain5_out3_C",
        "chain5_out5_A", "chain5_out5_B", "chain5_out5_C",
    ]
    assert len(Problem.parse("ring:6:3", algorithms=("A",))) == 1


def test_parse_return_to_input_spin():
    """Tests OUT = 1 is a valid transfer target."""
    (problem,) = Problem.parse("ring:4:1:A")
    assert problem.output_spin == 1
    assert problem.id == "ring4_out1_A"


@pytest.mark.parametrize("text", [
    "chain", "chain:5:3:A:x", "star:5", "chain:five", "chain:5:0",
    "chain:5:6", "chain:5:3:D",
])
def test_parse_invalid(text):
    """Tests malformed problems raise ConfigError."""
    with pytest.raises(ConfigError):
        Problem.parse(text)


def test_defaults():
    """Tests the default configuration."""
    config = PipelineConfig()
    assert config.delta_step == pytest.approx(1e-4)
    assert config.num_ops == 1000
    assert len(config.problem_list()) == 12
    assert config.rim_delta is None
    assert config.rim_strength == 0.05
    assert config.max_restarts == 1000


def test_rim_strength_follows_delta_max():
    """Tests a smaller delta_max alone is accepted and bounds rim_delta."""
    config = PipelineConfig().with_overrides(delta_max=0.01)
    assert config.rim_strength == 0.01
    assert PipelineConfig(delta_max=0.2).rim_strength == 0.05
    assert PipelineConfig(rim_delta=0.02).rim_strength == 0.02


@pytest.mark.parametrize("overrides", [
    {"delta_max": 0.},
    {"delta_steps": 3},
    {"num_ops": 0},
    {"restarts": 0},
    {"max_restarts": 50},
    {"restarts": 200, "max_restarts": 150},
    {"jobs": 0},
    {"alpha": 1.},
    {"rim_delta": 0.2},
    {"problems": ("chain:1",)},
])
def test_invalid_values(overrides):
    """Tests invalid settings raise ConfigError."""
    with pytest.raises(ConfigError):
        PipelineConfig(**overrides)


def test_comma_separated_problems():
    """Tests problems may be given as one comma separated string."""
    config = PipelineConfig(problems="chain:5:5:A,ring:6:3:C")
    assert config.problems == ("chain:5:5:A", "ring:6:3:C")
    assert [p.id for p in config.problem_list()] == ["chain5_out5_A",
                                                     "ring6_out3_C"]


def test_duplicate_problems_collapse():
    """Tests repeated problems appear once."""
    config = PipelineConfig(problems=("chain:5:5:A", "chain:5:5"),
                            algorithms=("A",))
    assert len(config.problem_list()) == 1


def test_from_file_and_overrides(tmp_path):
    """Tests reading JSON and applying command line overrides."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"problems": ["chain:4:4:A"], "num_ops": 7,
                                "synth_seed": 3}))
    config = PipelineConfig.from_file(path)
    assert config.num_ops == 7
    changed = config.with_overrides(synth_seed=9, jobs=None)
    assert changed.synth_seed == 9
    assert changed.jobs == 1
    assert PipelineConfig.from_dict(changed.to_dict()) == changed


def test_from_file_errors(tmp_path):
    """Tests unreadable files and unknown keys raise ConfigError."""
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(tmp_path / "missing.json")

    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(path)

    path.write_text(json.dumps({"num_opps": 3}))
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(path)

    path.write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(path)
