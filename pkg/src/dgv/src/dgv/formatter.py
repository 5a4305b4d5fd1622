"""Write result tables as CSV and summaries as TOON."""

import csv
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from toon import encode

from dgk.basis import BasisSet
from dgk.cases import TgvRecord, q_criterion
from dgk.discretization import DGState
from dgk.kinetics import GasModel, pressure
from dgk.mesh import Mesh
from dgk.runtime import ScalingRow

from .runner import ErrorRow

ERROR_COLUMNS = ["mesh", "eL1", "order_L1", "eL2", "order_L2", "ec", "order_c"]
TGV_COLUMNS = ["t", "Ek", "epsEk", "epsZeta"]
SCALING_COLUMNS = ["size", "workers", "seconds", "speedup"]
FIELD_COLUMNS = ["i", "j", "k", "x", "y", "z", "rho", "u", "v", "w", "p"]


def format_number(value: Any) -> str:
    """17 significant digits for floats; blank for missing values."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return path


def write_errors_csv(rows: Sequence[ErrorRow], path: Path) -> Path:
    return _write_csv(path, ERROR_COLUMNS, [[row[c] for c in ERROR_COLUMNS] for row in rows])


def write_tgv_csv(records: Sequence[TgvRecord], path: Path) -> Path:
    return _write_csv(path, TGV_COLUMNS, [[r.t, r.ek, r.eps_ek, r.eps_zeta] for r in records])


def write_scaling_csv(rows: Sequence[ScalingRow], path: Path) -> Path:
    return _write_csv(path, SCALING_COLUMNS, [[row[c] for c in SCALING_COLUMNS] for row in rows])


def write_field_dump(state: DGState, mesh: Mesh, gas: GasModel, path: Path) -> Path:
    """Cell averages as CSV plus the modal coefficients in a .npy sidecar."""
    q = state.cell_averages()
    p = pressure(q, gas)
    rows = []
    for flat, center in enumerate(mesh.centers):
        i, j, k = mesh.cell_index(flat)
        rho = float(q[flat, 0])
        u, v, w = (float(m) / rho for m in q[flat, 1:4])
        rows.append([i, j, k, *map(float, center), rho, u, v, w, float(p[flat])])
    _write_csv(path, FIELD_COLUMNS, rows)
    np.save(path.with_suffix(".npy"), state.coeffs)
    return path


def write_q_criterion(state: DGState, mesh: Mesh, basis: BasisSet, path: Path) -> Path:
    q = q_criterion(state, mesh, basis)
    rows = []
    for flat, center in enumerate(mesh.centers):
        rows.append([*mesh.cell_index(flat), *map(float, center), float(q[flat])])
    return _write_csv(path, ["i", "j", "k", "x", "y", "z", "q"], rows)


def format_summary(summary: dict[str, Any], table: Sequence[dict[str, Any]] | None = None) -> str:
    """TOON summary of a run followed by its result table."""
    parts = [encode(summary)]
    if table:
        parts.append("")
        parts.append(encode([{k: _compact(v) for k, v in row.items()} for row in table]))
    return "\n".join(parts)


def _compact(value: Any) -> Any:
    if isinstance(value, float):
        return None if math.isnan(value) else float(f"{value:.5g}")
    return value
