"""
Writers - CSV, JSON and legacy VTK artifacts

Floats are written with 17 significant digits and keys in sorted order, so
identical inputs give byte-identical files.
"""
import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

FLOAT_FORMAT = "%.16e"


def format_value(value) -> str:
    """One CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT % value
    return str(value)


def write_csv(path, rows: Sequence[dict], columns: List[str] = None) -> Path:
    """Write dict rows; columns default to the keys of the first row in order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def _plain(value):
    """Convert numpy and complex values to JSON-ready ones, NaN and inf to null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_plain(float(value.real)), _plain(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_plain(data), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_vtk(path, grid, title: str = "heat enclosure voxel state") -> Path:
    """
    Legacy ASCII VTK structured points, x varying fastest.

    Header:
        # vtk DataFile Version 3.0
        <title>
        ASCII
        DATASET STRUCTURED_POINTS
        DIMENSIONS nx ny nz / ORIGIN / SPACING
        POINT_DATA n, SCALARS state int 1, LOOKUP_TABLE default
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny, nz = grid.shape
    values = np.transpose(grid.state, (2, 1, 0)).reshape(-1)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        "ORIGIN " + " ".join(FLOAT_FORMAT % c for c in grid.origin),
        "SPACING " + " ".join(FLOAT_FORMAT % grid.spacing for _ in range(3)),
        f"POINT_DATA {nx * ny * nz}",
        "SCALARS state int 1",
        "LOOKUP_TABLE default",
    ]
    body = [" ".join(str(int(v)) for v in values[i:i + 64]) for i in range(0, len(values), 64)]
    path.write_text("\n".join(lines + body) + "\n", encoding="utf-8")
    return path


def voxel_rows(grid) -> Iterable[dict]:
    """Non-outside voxels as CSV rows."""
    centers = grid.centers()
    idx = np.argwhere(grid.state != 0)
    for i, j, k in idx:
        c = centers[i, j, k]
        yield {"i": int(i), "j": int(j), "k": int(k), "x": float(c[0]), "y": float(c[1]),
               "z": float(c[2]), "state": int(grid.state[i, j, k])}
