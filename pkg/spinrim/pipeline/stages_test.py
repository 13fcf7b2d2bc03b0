"""End-to-end tests of the pipeline stages on a tiny problem."""

import pytest

from spinrim.dephasing import HashMismatchError
from spinrim.pipeline import io, stages
from spinrim.pipeline.config import PipelineConfig


def _config(out_dir, **overrides):
    settings = dict(
        problems=("chain:3:3:A",),
        num_controllers=2,
        restarts=20,
        num_ops=4,
        delta_max=0.01,
        delta_steps=10,
        rim_delta=0.01,
        heatmap_points=3,
        min_controllers=2,
        out_dir=str(out_dir),
    )
    settings.update(overrides)
    return PipelineConfig(**settings)


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    config = _config(tmp_path_factory.mktemp("run"))
    stages.cmd_synth(config)
    stages.cmd_evaluate(config)
    stages.cmd_analyze(config)
    return config


def test_synth_writes_sorted_set(finished_run):
    """Tests the controller set file."""
    (problem,) = finished_run.problem_list()
    controllers = io.load_controller_set(
        stages.controllers_path(finished_run, problem))
    assert len(controllers) == 2
    errors = controllers.nominal_errors()
    assert errors[0] <= errors[1] < 0.5


def test_evaluate_outputs(finished_run):
    """Tests every per-controller file and the summary are written."""
    (problem,) = finished_run.problem_list()
    directory = stages.evaluation_dir(finished_run, problem)
    summary = io.read_json(directory / "summary.json")
    assert summary["problem"] == "chain3_out3_A"
    assert summary["num_ops"] == 4
    ids = [entry["controller_id"] for entry in summary["controllers"]]
    assert ids == ["chain3_out3_A_c000", "chain3_out3_A_c001"]
    for cid in ids:
        grid = io.read_grid(directory / f"{cid}.grid")
        assert grid.values.shape == (11, 4)
        assert (directory / f"{cid}.rim.csv").exists()
        assert (directory / f"{cid}.kde.csv").exists()
        record = io.read_json(directory / f"{cid}.record.json")
        assert record["dephasing_seed"] == finished_run.dephasing_seed
        assert stages.dephasing_path(finished_run, problem, cid).exists()
    assert len(io.read_records_csv(directory / "sensitivity.csv")) == 2


def test_evaluate_resumes(finished_run):
    """Tests a rerun keeps finished records untouched."""
    (problem,) = finished_run.problem_list()
    directory = stages.evaluation_dir(finished_run, problem)
    path = directory / "chain3_out3_A_c000.record.json"
    before = path.stat().st_mtime_ns
    stages.cmd_evaluate(finished_run)
    assert path.stat().st_mtime_ns == before


def test_evaluate_rejects_foreign_dephasing_set(finished_run):
    """Tests a stored set with other settings aborts the evaluation."""
    config = finished_run.with_overrides(dephasing_seed=99)
    (problem,) = config.problem_list()
    controllers = io.load_controller_set(
        stages.controllers_path(config, problem))
    record = stages.evaluation_dir(config, problem) / \
        "chain3_out3_A_c000.record.json"
    backup = record.with_suffix(".bak")
    record.rename(backup)
    try:
        with pytest.raises(HashMismatchError):
            stages.evaluate_controller(config, problem, controllers[0],
                                       "chain3_out3_A_c000")
    finally:
        backup.rename(record)


def test_evaluate_rejects_stale_records(finished_run):
    """Tests a rerun with other settings does not reuse finished records."""
    config = finished_run.with_overrides(dephasing_seed=99, num_ops=5)
    with pytest.raises(HashMismatchError) as error:
        stages.cmd_evaluate(config)
    message = str(error.value)
    assert "dephasing_seed" in message
    assert "num_ops" in message
    assert "delta_max" not in message


def test_rerun_is_byte_identical(finished_run, tmp_path):
    """Tests synth and evaluate reproduce every file from the same seeds."""
    config = finished_run.with_overrides(out_dir=str(tmp_path))
    stages.cmd_synth(config)
    stages.cmd_evaluate(config)
    (problem,) = config.problem_list()
    cid = "chain3_out3_A_c001"
    for path_of in (
        lambda c: stages.controllers_path(c, problem),
        lambda c: stages.dephasing_path(c, problem, cid),
        lambda c: stages.evaluation_dir(c, problem) / f"{cid}.grid",
        lambda c: stages.evaluation_dir(c, problem) / f"{cid}.record.json",
        lambda c: stages.evaluation_dir(c, problem) / "summary.json",
    ):
        assert path_of(config).read_bytes() == \
            path_of(finished_run).read_bytes()


def test_analyze_outputs(finished_run):
    """Tests the analysis tables."""
    out = stages.analysis_dir(finished_run)
    for name in ("concordance.csv", "tradeoff.csv", "consistency.json"):
        assert (out / name).exists()
    problem_dir = out / "chain3_out3_A"
    for name in ("heatmap.csv", "rim_matrix.csv", "measures.csv",
                 "rim_by_zeta.csv"):
        assert (problem_dir / name).exists()
    assert len(io.read_rows(problem_dir / "measures.csv")) == 2
    assert len(io.read_rows(problem_dir / "rim_matrix.csv")) == 11
    consistency = io.read_json(out / "consistency.json")
    assert consistency["rim_delta"] == 0.01
    assert "chain3_out3_A" in consistency["min_tau_at_rim_delta"]
    heatmap = io.read_heatmap_csv(problem_dir / "heatmap.csv")
    assert any(abs(delta - 0.01) < 1e-12 for delta in heatmap.deltas)


def test_report(finished_run):
    """Tests the console report lists both suites and the slope check."""
    report = stages.cmd_report(finished_run)
    assert "concordance" in report
    assert "tradeoff" in report
    assert "chain3_out3_A" in report
    assert "min tau" in report


def test_analyze_lists_missing_inputs(tmp_path):
    """Tests analysis before evaluation names every missing file."""
    config = _config(tmp_path, problems=("chain:3:3:A", "chain:4:4:A"))
    with pytest.raises(FileNotFoundError) as error:
        stages.cmd_analyze(config)
    message = str(error.value)
    assert "chain3_out3_A.json" in message
    assert "chain4_out4_A.json" in message
    assert "summary.json" in message
