"""Deterministic CSV reading/writing shared by datasets and run exports.

Floats are written with 17 significant digits so that float64 values
round-trip bit-exactly; line endings are LF regardless of platform.
"""
from __future__ import annotations

import numpy as np


def format_float(v: float) -> str:
    return "%.17g" % v


def write_csv(path, header: list[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise ValueError(f"{path}: header has {len(header)} fields, rows have {rows.shape[1]}")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_csv(path, n_cols: int | None = None) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",") if lines and lines[0] else []
    if n_cols is None:
        n_cols = len(header)
    data = []
    for line in lines[1:]:
        if n_cols == 0:
            data.append([])
        elif line:
            data.append([float(tok) for tok in line.split(",")])
    return np.asarray(data, dtype=float).reshape(len(data), n_cols)
