"""Readers and writers for every file the pipeline produces.

Error grids use a small binary container: the magic bytes b"SPRG", a
little-endian uint32 header length, a UTF-8 JSON header, then the grid as
little-endian float64 in row-major order.
"""

import csv
import json
import logging
import math
import pathlib
import struct
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from spinrim.dephasing import DephasingSet, StrengthGrid
from spinrim.dynamics import ErrorGrid
from spinrim.liouville import HermitianBasis
from spinrim.network import Controller, HamiltonianSS, SpinNetwork, Topology
from spinrim.optimizer import ControllerSet, OptimizationConfig
from spinrim.rim import DeltaHeatmap, RimCurve
from spinrim.sensitivity import SensitivityRecord
from spinrim.stats import HypothesisSuite

logger = logging.getLogger(__name__)

GRID_MAGIC = b"SPRG"
RECORD_FIELDS = ("controller_id", "e_T", "s_a", "s_k", "zeta_a", "zeta_k")
SUITE_FIELDS = ("problem", "algorithm", "measure_pair", "tau", "p",
                "decision")


def write_json(path, data: Any) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path) -> Any:
    return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))


def write_rows(path, fieldnames: Sequence[str],
               rows: Iterable[Dict[str, Any]]) -> pathlib.Path:
    """Writes dictionaries as CSV rows with a header."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def read_rows(path) -> List[Dict[str, str]]:
    with pathlib.Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value


def _float(text: str) -> float:
    return float(text) if text not in ("", "nan") else math.nan


def _json_float(value: float) -> Optional[float]:
    """Maps NaN to None; JSON has no NaN literal."""
    value = float(value)
    return None if math.isnan(value) else value


# Controller sets


def controller_set_to_dict(controllers: ControllerSet) -> Dict[str, Any]:
    return {
        "N": controllers.net.size,
        "topology": controllers.net.topology.value,
        "out": controllers.output_spin,
        "in": controllers.input_spin,
        "config": controllers.config.to_dict(),
        "metadata": controllers.metadata,
        "controllers": [
            {
                "delta": [float(d) for d in ctrl.biases],
                "T": float(ctrl.readout_time),
                "nominal_error": ctrl.nominal_error,
                "metadata": ctrl.metadata,
            }
            for ctrl in controllers
        ],
    }


def controller_set_from_dict(data: Dict[str, Any]) -> ControllerSet:
    net = SpinNetwork(int(data["N"]), Topology(data["topology"]))
    output_spin = int(data["out"])
    input_spin = int(data.get("in", 1))
    controllers = [
        Controller(
            biases=np.array(entry["delta"], dtype=np.float64),
            readout_time=float(entry["T"]),
            output_spin=output_spin,
            input_spin=input_spin,
            nominal_error=entry.get("nominal_error"),
            metadata=entry.get("metadata", {}),
        )
        for entry in data["controllers"]
    ]
    return ControllerSet(
        net=net,
        output_spin=output_spin,
        controllers=controllers,
        config=OptimizationConfig.from_dict(data["config"]),
        input_spin=input_spin,
        metadata=data.get("metadata", {}),
    )


def save_controller_set(controllers: ControllerSet, path) -> pathlib.Path:
    return write_json(path, controller_set_to_dict(controllers))


def load_controller_set(path) -> ControllerSet:
    return controller_set_from_dict(read_json(path))


# Dephasing sets


def save_dephasing_set(dephasing_set: DephasingSet, path) -> pathlib.Path:
    return write_json(path, dephasing_set.to_dict())


def load_dephasing_set(
    path, hamiltonian: HamiltonianSS, basis: Optional[HermitianBasis] = None
) -> DephasingSet:
    """Raises HashMismatchError if the set belongs to another Hamiltonian."""
    return DephasingSet.from_dict(read_json(path), hamiltonian, basis)


# Error grids


def write_grid(grid: ErrorGrid, path) -> pathlib.Path:
    """Writes an error grid in the binary container format."""
    header = json.dumps({
        "controller_id": grid.controller_id,
        "N": grid.size,
        "seed": grid.seed,
        "step": grid.grid.step,
        "steps": grid.grid.steps,
        "num_ops": grid.num_ops,
        "clamped": grid.clamped,
    }).encode("utf-8")
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(GRID_MAGIC)
        handle.write(struct.pack("<I", len(header)))
        handle.write(header)
        handle.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
    return path


def read_grid(path) -> ErrorGrid:
    """Reads an error grid.

    Raises:
        ValueError: If the file is not a grid container or is truncated.
    """
    path = pathlib.Path(path)
    payload = path.read_bytes()
    if payload[:4] != GRID_MAGIC:
        raise ValueError(f"{path} is not an error grid file.")
    (length,) = struct.unpack("<I", payload[4:8])
    header = json.loads(payload[8:8 + length].decode("utf-8"))
    grid = StrengthGrid(step=header["step"], steps=header["steps"])
    shape = (len(grid), header["num_ops"])
    body = payload[8 + length:]
    if len(body) != 8 * shape[0] * shape[1]:
        raise ValueError(f"{path} is truncated.")
    values = np.frombuffer(body, dtype="<f8").reshape(shape).astype(np.float64)
    return ErrorGrid(
        controller_id=header["controller_id"],
        values=values,
        grid=grid,
        seed=header["seed"],
        size=header["N"],
        clamped=header["clamped"],
    )


def write_grid_csv(grid: ErrorGrid, path) -> pathlib.Path:
    """Writes the grid as CSV, one row per strength."""
    fields = ["delta"] + [f"op{mu}" for mu in range(grid.num_ops)]
    rows = (
        dict(zip(fields, [float(delta)] + [float(e) for e in row]))
        for delta, row in zip(grid.grid.values, grid.values)
    )
    return write_rows(path, fields, rows)


# RIM curves


def write_rim_csv(curve: RimCurve, path) -> pathlib.Path:
    rows = (
        {"delta": float(d), "rim1": float(r), "adjusted": float(a)}
        for d, r, a in zip(curve.deltas, curve.values, curve.adjusted)
    )
    return write_rows(path, ("delta", "rim1", "adjusted"), rows)


def read_rim_csv(path, controller_id: str = "") -> RimCurve:
    rows = read_rows(path)
    return RimCurve(
        controller_id=controller_id or pathlib.Path(path).stem,
        deltas=np.array([float(r["delta"]) for r in rows]),
        values=np.array([float(r["rim1"]) for r in rows]),
        adjusted=np.array([float(r["adjusted"]) for r in rows]),
    )


# Sensitivity records


def record_to_dict(record: SensitivityRecord) -> Dict[str, Any]:
    data = record.to_row()
    data.update({
        "degenerate": record.degenerate,
        "per_op_s": [_json_float(s) for s in record.per_op_s],
        "per_op_zeta": [_json_float(z) for z in record.per_op_zeta],
    })
    return {k: (_json_float(v) if isinstance(v, float) else v)
            for k, v in data.items()}


def record_from_dict(data: Dict[str, Any]) -> SensitivityRecord:
    def value(key: str) -> float:
        return math.nan if data[key] is None else float(data[key])

    return SensitivityRecord(
        controller_id=data["controller_id"],
        nominal_error=value("e_T"),
        s_a=value("s_a"),
        s_k=value("s_k"),
        zeta_a=value("zeta_a"),
        zeta_k=value("zeta_k"),
        per_op_s=np.array([math.nan if s is None else s
                           for s in data["per_op_s"]], dtype=np.float64),
        per_op_zeta=np.array([math.nan if z is None else z
                              for z in data["per_op_zeta"]],
                             dtype=np.float64),
        degenerate=bool(data["degenerate"]),
    )


def write_records_csv(records: Iterable[SensitivityRecord], path
                      ) -> pathlib.Path:
    return write_rows(path, RECORD_FIELDS,
                      (record.to_row() for record in records))


def read_records_csv(path) -> List[Dict[str, Any]]:
    return [
        {k: (v if k == "controller_id" else _float(v)) for k, v in row.items()}
        for row in read_rows(path)
    ]


# Statistics


def write_suite_csv(suite: HypothesisSuite, path) -> pathlib.Path:
    return write_rows(path, SUITE_FIELDS, suite.rows())


def read_suite_csv(path) -> List[Dict[str, Any]]:
    rows = read_rows(path)
    for row in rows:
        row["tau"] = float(row["tau"])
        row["p"] = float(row["p"])
    return rows


def write_heatmap_csv(heatmap: DeltaHeatmap, path) -> pathlib.Path:
    """Writes the tau matrix with the strengths as first row and column."""
    fields = ["delta"] + [repr(float(d)) for d in heatmap.deltas]
    rows = (
        dict(zip(fields, [float(d)] + [float(t) for t in row]))
        for d, row in zip(heatmap.deltas, heatmap.tau)
    )
    return write_rows(path, fields, rows)


def read_heatmap_csv(path) -> DeltaHeatmap:
    rows = read_rows(path)
    deltas = np.array([float(row["delta"]) for row in rows])
    tau = np.array([[_float(v) for k, v in row.items() if k != "delta"]
                    for row in rows])
    return DeltaHeatmap(deltas, np.arange(deltas.size), tau)
