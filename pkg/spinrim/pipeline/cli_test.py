"""Unit tests for the command line entry point."""

import json

from spinrim.pipeline import cli


def test_help_exits_cleanly(capsys):
    """Tests --help returns success."""
    assert cli.main(["--help"]) == cli.EXIT_OK
    assert "synth" in capsys.readouterr().out


def test_unknown_verb():
    """Tests an unknown verb is a usage error."""
    assert cli.main(["plot"]) == cli.EXIT_CONFIG


def test_invalid_config_file(tmp_path):
    """Tests an invalid configuration returns the config exit code."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"delta_steps": 2}))
    assert cli.main(["synth", "--config", str(path)]) == cli.EXIT_CONFIG


def test_invalid_problem_flag(tmp_path):
    """Tests malformed --problems values are rejected."""
    assert cli.main(["synth", "--problems", "star:5",
                     "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_analyze_without_inputs(tmp_path):
    """Tests missing stage inputs return the config exit code."""
    assert cli.main(["analyze", "--problems", "chain:3:3:A",
                     "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_overrides_reach_config(tmp_path):
    """Tests flags override values of the configuration file."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"synth_seed": 1, "jobs": 2}))
    args = cli.build_parser().parse_args(
        ["evaluate", "--config", str(path), "--seed", "7",
         "--delta-max", "0.05", "--delta-steps", "500"])
    config = cli.load_config(args)
    assert config.synth_seed == 7
    assert config.jobs == 2
    assert config.delta_max == 0.05
    assert abs(config.delta_step - 1e-4) < 1e-15
    assert config.rim_strength == 0.05


def test_delta_max_flag_alone(tmp_path):
    """Tests --delta-max below the default RIM strength is accepted."""
    args = cli.build_parser().parse_args(
        ["synth", "--delta-max", "0.01", "--out", str(tmp_path)])
    config = cli.load_config(args)
    assert config.rim_strength == 0.01


def test_synth_and_evaluate(tmp_path):
    """Tests a tiny synth then evaluate run through the entry point."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "problems": ["chain:3:3:A"], "num_controllers": 2, "restarts": 20,
        "num_ops": 3, "delta_max": 0.01, "delta_steps": 10,
        "rim_delta": 0.01, "min_controllers": 2,
    }))
    flags = ["--config", str(path), "--out", str(tmp_path / "out")]
    assert cli.main(["synth"] + flags) == cli.EXIT_OK
    assert (tmp_path / "out" / "controllers" / "chain3_out3_A.json").exists()
    assert cli.main(["evaluate"] + flags) == cli.EXIT_OK
