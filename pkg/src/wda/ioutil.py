"""Small file helpers: atomic writes and dense matrix CSV/JSON round trips.

Matrix CSV files are plain dense row-major tables of numbers, one matrix row
per line. The JSON form is ``{"shape": [n, m], "data": [flat row-major]}``.
All writes go through a temp file + rename so partial outputs are never left
behind.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import ParseError

# 17 significant digits round-trips any finite double exactly
FLOAT_FMT = "%.17g"


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file in the same directory + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def save_matrix_csv(matrix: np.ndarray, path: str) -> None:
    """Save a 2-d array as a dense CSV table (row-major, full double precision)."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ParseError(f"expected a 2-d matrix, got array of dimension {matrix.ndim}")
    lines = [",".join(FLOAT_FMT % x for x in row) for row in matrix]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_matrix_csv(path: str) -> np.ndarray:
    """Load a dense CSV table written by :func:`save_matrix_csv`."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(f"line {lineno}: expected {width} columns, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def matrix_to_json(matrix: np.ndarray) -> dict:
    """Encode a 2-d array as shape + flat row-major list."""
    matrix = np.asarray(matrix, dtype=float)
    return {"shape": list(matrix.shape), "data": matrix.ravel(order="C").tolist()}


def matrix_from_json(payload: dict) -> np.ndarray:
    shape = payload["shape"]
    data = np.asarray(payload["data"], dtype=float)
    if data.size != int(np.prod(shape)):
        raise ParseError(f"flat data length {data.size} does not match shape {shape}")
    return data.reshape(shape)
