"""Pipeline stages: synthesize controllers, evaluate them, analyze, report.

Output layout under PipelineConfig.out_dir:

    controllers/<problem>.json
    dephasing/<problem>/<controller>.json
    evaluation/<problem>/<controller>.{record.json,grid,rim.csv,kde.csv}
    evaluation/<problem>/{sensitivity.csv,summary.json}
    analysis/{concordance.csv,tradeoff.csv,consistency.json}
    analysis/<problem>/{heatmap,rim_matrix,measures,rim_by_zeta}.csv
"""

import functools
import logging
import math
import pathlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

import numpy as np
import tabulate

from spinrim.dephasing import HashMismatchError, StrengthGrid, \
    generate_set, hamiltonian_hash
from spinrim.dynamics import compute_error_grid, fidelity_error
from spinrim.liouville import LiouvilleSystem, hermitian_basis
from spinrim.network import Controller
from spinrim.optimizer import OptimizationConfig, synthesize_set
from spinrim.pipeline import io
from spinrim.pipeline.config import PipelineConfig, Problem
from spinrim.rim import HEATMAP_RANGE, rim1_curve, rim_at, \
    rim_delta_selection, robustness_outliers, theorem1_check
from spinrim.sensitivity import kde_error_density, sensitivity_record
from spinrim.stats import ControllerMeasures, HypothesisSuite, Tail, \
    concordance_suite, failure_consistency, tradeoff_suite

logger = logging.getLogger(__name__)

KDE_DELTAS = (0.01, 0.05, 0.1)


def controllers_path(config: PipelineConfig, problem: Problem) -> pathlib.Path:
    return config.out_path / "controllers" / f"{problem.id}.json"


def evaluation_dir(config: PipelineConfig, problem: Problem) -> pathlib.Path:
    return config.out_path / "evaluation" / problem.id


def dephasing_path(config: PipelineConfig, problem: Problem,
                   controller_id: str) -> pathlib.Path:
    return config.out_path / "dephasing" / problem.id / f"{controller_id}.json"


def analysis_dir(config: PipelineConfig) -> pathlib.Path:
    return config.out_path / "analysis"


def strength_grid(config: PipelineConfig) -> StrengthGrid:
    return StrengthGrid.from_max(config.delta_max, config.delta_steps)


# Synthesis


def cmd_synth(config: PipelineConfig) -> List[pathlib.Path]:
    """Writes one controller set per problem."""
    paths = []
    for problem in config.problem_list():
        optimization = OptimizationConfig(
            algorithm=problem.algorithm,
            restarts=config.restarts,
            max_restarts=config.max_restarts,
            seed=config.synth_seed,
        )
        controllers = synthesize_set(
            problem.network, problem.output_spin, optimization,
            count=config.num_controllers, jobs=config.jobs,
        )
        paths.append(io.save_controller_set(
            controllers, controllers_path(config, problem)
        ))
        logger.info("Wrote %s.", paths[-1])
    return paths


# Evaluation


def _record_path(directory: pathlib.Path, controller_id: str) -> pathlib.Path:
    return directory / f"{controller_id}.record.json"


def _record_settings(config: PipelineConfig, hamiltonian: str
                     ) -> Dict[str, Any]:
    """Settings a controller record depends on; resumed records must match."""
    return {
        "dephasing_seed": config.dephasing_seed,
        "num_ops": config.num_ops,
        "delta_max": config.delta_max,
        "delta_steps": config.delta_steps,
        "hamiltonian_hash": hamiltonian,
    }


def evaluate_controller(
    config: PipelineConfig,
    problem: Problem,
    ctrl: Controller,
    controller_id: str,
) -> Dict[str, Any]:
    """Evaluates one controller and writes its outputs.

    The controller record JSON is written last and marks completion.

    Raises:
        HashMismatchError: If a stored dephasing set or controller record
            belongs to another Hamiltonian or other settings.
    """
    directory = evaluation_dir(config, problem)
    record_path = _record_path(directory, controller_id)
    net = problem.network
    basis = hermitian_basis(net.size)
    system = LiouvilleSystem.from_problem(net, ctrl, basis)

    if record_path.exists():
        data = io.read_json(record_path)
        expected = _record_settings(config,
                                    hamiltonian_hash(system.hamiltonian))
        stale = sorted(key for key, value in expected.items()
                       if data.get(key) != value)
        if stale:
            raise HashMismatchError(
                f"{record_path} was evaluated with other {', '.join(stale)}; "
                "use a fresh output directory."
            )
        logger.info("Resuming: %s already evaluated.", controller_id)
        return data

    set_path = dephasing_path(config, problem, controller_id)
    if set_path.exists():
        dephasing_set = io.load_dephasing_set(set_path, system.hamiltonian,
                                              basis)
        if (dephasing_set.seed != config.dephasing_seed
                or len(dephasing_set) != config.num_ops):
            raise HashMismatchError(
                f"{set_path} was generated with other settings."
            )
    else:
        dephasing_set = generate_set(
            system.hamiltonian, config.num_ops, config.dephasing_seed, basis,
            system.superop,
        )
        io.save_dephasing_set(dephasing_set, set_path)

    nominal = fidelity_error(ctrl, system)
    grid = compute_error_grid(ctrl, system, dephasing_set,
                              strength_grid(config), controller_id)
    record = sensitivity_record(ctrl, system, dephasing_set, grid,
                                controller_id, nominal)
    curve = rim1_curve(grid)
    check = theorem1_check(record, curve)

    if config.keep_grids:
        io.write_grid(grid, directory / f"{controller_id}.grid")
    io.write_rim_csv(curve, directory / f"{controller_id}.rim.csv")
    kde_rows = []
    for delta in KDE_DELTAS:
        if delta > grid.grid.delta_max * (1 + 1e-12):
            continue
        density = kde_error_density(grid, grid.grid.index_of(delta))
        kde_rows.extend(
            {"delta": delta, "e": float(e), "density": float(p)}
            for e, p in zip(density.support, density.density)
        )
    io.write_rows(directory / f"{controller_id}.kde.csv",
                  ("delta", "e", "density"), kde_rows)

    data = io.record_to_dict(record)
    data.update({
        "theorem_relative_error": (None if math.isnan(check.relative_error)
                                   else check.relative_error),
        "theorem_absolute_error": check.absolute_error,
        "zero_sensitivity": check.zero_sensitivity,
        "theorem_passed": check.passed(),
        "clamped": grid.clamped,
        **_record_settings(config, dephasing_set.hamiltonian_hash),
    })
    io.write_json(record_path, data)
    return data


def cmd_evaluate(config: PipelineConfig) -> List[pathlib.Path]:
    """Evaluates every controller of every problem.

    Reruns skip controllers whose record already exists.

    Raises:
        FileNotFoundError: If a controller set is missing.
    """
    summaries = []
    for problem in config.problem_list():
        controllers = io.load_controller_set(controllers_path(config, problem))
        ids = [controllers.controller_id(k) for k in range(len(controllers))]
        task = functools.partial(evaluate_controller, config, problem)
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(task, controllers, ids))
        else:
            results = [task(ctrl, cid) for ctrl, cid in zip(controllers, ids)]

        directory = evaluation_dir(config, problem)
        io.write_records_csv(
            (io.record_from_dict(result) for result in results),
            directory / "sensitivity.csv",
        )
        relative = [r["theorem_relative_error"] for r in results
                    if r["theorem_relative_error"] is not None]
        summary = {
            "problem": problem.id,
            "dephasing_seed": config.dephasing_seed,
            "grid": {"delta_max": config.delta_max,
                     "steps": config.delta_steps},
            "num_ops": config.num_ops,
            "max_theorem_relative_error": max(relative) if relative else None,
            "theorem_failures": sum(not r["theorem_passed"] for r in results),
            "controllers": [
                {key: r[key] for key in (
                    "controller_id", "e_T", "theorem_relative_error",
                    "theorem_absolute_error", "zero_sensitivity",
                    "theorem_passed", "clamped",
                )}
                for r in results
            ],
        }
        summaries.append(io.write_json(directory / "summary.json", summary))
        if summary["theorem_failures"]:
            logger.warning("%s: %d controllers exceed the RIM slope "
                           "tolerance.", problem.id,
                           summary["theorem_failures"])
    return summaries


# Analysis


def _missing_inputs(config: PipelineConfig) -> List[pathlib.Path]:
    missing = []
    for problem in config.problem_list():
        directory = evaluation_dir(config, problem)
        summary = directory / "summary.json"
        for path in (controllers_path(config, problem), summary):
            if not path.exists():
                missing.append(path)
        if not summary.exists():
            continue
        for entry in io.read_json(summary)["controllers"]:
            cid = entry["controller_id"]
            for path in (_record_path(directory, cid),
                         directory / f"{cid}.rim.csv"):
                if not path.exists():
                    missing.append(path)
    return missing


def _load_problem(config: PipelineConfig, problem: Problem):
    directory = evaluation_dir(config, problem)
    summary = io.read_json(directory / "summary.json")
    ids = [entry["controller_id"] for entry in summary["controllers"]]
    records = [io.record_from_dict(io.read_json(_record_path(directory, cid)))
               for cid in ids]
    curves = [io.read_rim_csv(directory / f"{cid}.rim.csv", cid)
              for cid in ids]
    return records, curves


def cmd_analyze(config: PipelineConfig) -> List[pathlib.Path]:
    """Runs the hypothesis tests and writes plot-ready tables.

    Raises:
        FileNotFoundError: Listing every missing input.
    """
    missing = _missing_inputs(config)
    if missing:
        raise FileNotFoundError(
            "Missing inputs:\n" + "\n".join(f"  {path}" for path in missing)
        )

    out = analysis_dir(config)
    concordance = HypothesisSuite("concordance", Tail.CONCORDANCE,
                                  config.alpha)
    tradeoff = HypothesisSuite("tradeoff", Tail.DISCORDANCE, config.alpha)
    written = []
    outliers: Dict[str, List[str]] = {}
    min_tau: Dict[str, Optional[float]] = {}

    for problem in config.problem_list():
        records, curves = _load_problem(config, problem)
        directory = out / problem.id
        deltas = curves[0].deltas
        rim_delta = float(deltas[curves[0].index_of(config.rim_strength)])
        rim1, adjusted = rim_at(curves, rim_delta)
        measures = ControllerMeasures.from_records(problem.id, records,
                                                   rim1, adjusted)
        if len(measures) >= config.min_controllers:
            concordance.extend(concordance_suite(
                measures, config.alpha, config.min_controllers))
            tradeoff.extend(tradeoff_suite(
                measures, config.alpha, config.min_controllers))
        else:
            logger.warning("%s: %d controllers are too few for the tests.",
                           problem.id, len(measures))

        heatmap = rim_delta_selection(curves, config.heatmap_points,
                                      full=config.full_heatmap,
                                      include=(rim_delta,))
        written.append(io.write_heatmap_csv(heatmap,
                                            directory / "heatmap.csv"))
        tau = heatmap.min_tau(rim_delta)
        min_tau[problem.id] = None if math.isnan(tau) else tau

        fields = ["delta"] + [curve.controller_id for curve in curves]
        written.append(io.write_rows(
            directory / "rim_matrix.csv", fields,
            (dict(zip(fields, [float(d)] + [float(c.values[n])
                                              for c in curves]))
             for n, d in enumerate(deltas)),
        ))

        written.append(io.write_rows(
            directory / "measures.csv",
            ("index", "controller_id", "e_T", "s_a", "s_k", "zeta_a",
             "zeta_k", "rim1", "rim1_adjusted"),
            ({"index": k, "controller_id": cid,
              **{name: float(measures.column(name)[k]) for name in (
                  "e_T", "s_a", "s_k", "zeta_a", "zeta_k", "rim1",
                  "rim1_adjusted")}}
             for k, cid in enumerate(measures.controller_ids)),
        ))

        order = np.argsort(measures.zeta_a, kind="stable")
        sampled = heatmap.indices
        fields = ["controller_id", "zeta_a"] + [
            repr(float(deltas[n])) for n in sampled]
        written.append(io.write_rows(
            directory / "rim_by_zeta.csv", fields,
            (dict(zip(fields, [curves[k].controller_id,
                               float(measures.zeta_a[k])]
                      + [float(curves[k].adjusted[n]) for n in sampled]))
             for k in order),
        ))
        outliers[problem.id] = robustness_outliers(
            curves, measures.zeta_a, rim_delta)

    written.append(io.write_suite_csv(concordance, out / "concordance.csv"))
    written.append(io.write_suite_csv(tradeoff, out / "tradeoff.csv"))
    written.append(io.write_json(out / "consistency.json", {
        "failures_consistent": failure_consistency(tradeoff),
        "outliers": outliers,
        "rim_delta": config.rim_strength,
        "min_tau_at_rim_delta": min_tau,
    }))
    return written


# Report


def cmd_report(config: PipelineConfig) -> str:
    """Returns console tables of the tests and the RIM slope check."""
    out = analysis_dir(config)
    sections = []
    for name in ("concordance", "tradeoff"):
        rows = io.read_suite_csv(out / f"{name}.csv")
        table = [[r["problem"], r["algorithm"], r["measure_pair"],
                  f"{r['tau']:.3f}", f"{r['p']:.4f}", r["decision"]]
                 for r in rows]
        sections.append(f"{name}\n" + tabulate.tabulate(
            table, headers=list(io.SUITE_FIELDS), tablefmt="github"))

    theorem = []
    for problem in config.problem_list():
        summary = io.read_json(
            evaluation_dir(config, problem) / "summary.json")
        worst = summary["max_theorem_relative_error"]
        theorem.append([problem.id, len(summary["controllers"]),
                        "n/a" if worst is None else f"{worst:.2e}",
                        summary["theorem_failures"]])
    sections.append("mean differential sensitivity vs RIM slope\n"
                    + tabulate.tabulate(
                        theorem, headers=["problem", "controllers",
                                          "max relative error", "failures"],
                        tablefmt="github"))

    consistency = io.read_json(out / "consistency.json")
    lowest = [[problem, "n/a" if tau is None else f"{tau:.3f}"]
              for problem, tau in consistency["min_tau_at_rim_delta"].items()]
    sections.append(
        f"min tau between RIM_1({consistency['rim_delta']:g}) and RIM_1 over "
        f"[{HEATMAP_RANGE[0]:g}, {HEATMAP_RANGE[1]:g}]\n"
        + tabulate.tabulate(lowest, headers=["problem", "min tau"],
                            tablefmt="github"))

    inconsistent = [p for p, ok in
                    consistency["failures_consistent"].items() if not ok]
    sections.append(
        "trade-off failures identical across measures: "
        + ("yes" if not inconsistent else "no (" + ", ".join(inconsistent)
           + ")")
    )
    return "\n\n".join(sections)
