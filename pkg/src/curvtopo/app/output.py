"""Writers for fields (legacy VTK, PGM), iteration histories and run summaries.

Everything is written with fixed formatting so that identical runs produce
identical bytes. :func:`read_vtk` parses what :func:`write_vtk` emits and is
used to check header conformance.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["write_vtk", "read_vtk", "write_pgm", "read_pgm", "write_history", "write_summary", "HISTORY_COLUMNS"]

HISTORY_COLUMNS = ("iter", "F", "volume", "step", "backtracks", "mgcg", "stationarity", "change",
                   "h1", "h2", "h3", "h4")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_vtk(path, grid, fields: dict, title: str = "curvtopo fields") -> Path:
    """ASCII structured-points file with one SCALARS block per cell field.

    Values are attached as CELL_DATA, so DIMENSIONS counts the n+1 points per
    axis. Fields are written in x-fastest order as the format requires.
    """
    path = Path(path)
    dims = [grid.n + 1] * grid.dim + [1] * (3 - grid.dim)
    origin = list(grid.lo) + [0.0] * (3 - grid.dim)
    spacing = [grid.h] * grid.dim + [1.0] * (3 - grid.dim)
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN " + " ".join(_fmt(o) for o in origin),
        "SPACING " + " ".join(_fmt(s) for s in spacing),
        f"CELL_DATA {grid.size}",
    ]
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"field {name!r} has shape {arr.shape}, expected {grid.shape}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        flat = arr.transpose().ravel()  # x varies fastest
        lines.extend(" ".join(f"{v:.17g}" for v in flat[i:i + 8]) for i in range(0, flat.size, 8))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_vtk(path) -> tuple[dict, dict]:
    """Parse a file written by :func:`write_vtk`; returns ``(header, fields)``."""
    tokens = Path(path).read_text(encoding="ascii").split("\n")
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError("missing vtk version line")
    if tokens[2].strip() != "ASCII":
        raise ValueError("only ASCII files are supported")
    if tokens[3].strip() != "DATASET STRUCTURED_POINTS":
        raise ValueError("not a structured-points dataset")
    header = {"title": tokens[1]}
    words = " ".join(tokens[4:]).split()
    i = 0
    fields = {}
    ncell = None
    while i < len(words):
        key = words[i]
        if key == "DIMENSIONS":
            header["dimensions"] = tuple(int(w) for w in words[i + 1:i + 4])
            i += 4
        elif key in ("ORIGIN", "SPACING"):
            header[key.lower()] = tuple(float(w) for w in words[i + 1:i + 4])
            i += 4
        elif key == "CELL_DATA":
            ncell = int(words[i + 1])
            i += 2
        elif key == "SCALARS":
            if ncell is None:
                raise ValueError("SCALARS before CELL_DATA")
            name = words[i + 1]
            i += 3 if i + 3 < len(words) and words[i + 3] == "LOOKUP_TABLE" else 4
            if words[i] != "LOOKUP_TABLE":
                raise ValueError(f"missing LOOKUP_TABLE for {name}")
            i += 2
            vals = np.array([float(w) for w in words[i:i + ncell]])
            if vals.size != ncell:
                raise ValueError(f"field {name} is truncated")
            cells = tuple(d - 1 for d in header["dimensions"] if d > 1)
            fields[name] = vals.reshape(cells[::-1]).transpose()
            i += ncell
        else:
            raise ValueError(f"unexpected token {key!r}")
    expected = int(np.prod([d - 1 for d in header["dimensions"] if d > 1]))
    if ncell != expected:
        raise ValueError(f"CELL_DATA {ncell} does not match DIMENSIONS {header['dimensions']}")
    return header, fields


def write_pgm(path, w: np.ndarray) -> Path:
    """Binary 8-bit grayscale raster of a 2-D design; dark is material (w = 1), y points up."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError("PGM snapshots are 2-D only")
    img = np.round(255.0 * (1.0 - np.clip(w, 0.0, 1.0))).astype(np.uint8)
    img = img.T[::-1]  # rows are y, top row is the largest y
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    width, height = (int(x) for x in parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)
    return 1.0 - img[::-1].T / 255.0


def write_history(path, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in HISTORY_COLUMNS])
    return path


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else repr(float(v))
    return v


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_cell) + "\n", encoding="utf-8")
    return path
