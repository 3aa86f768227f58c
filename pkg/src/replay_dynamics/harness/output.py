"""CSV / JSON serialization of traces, sweeps and training runs."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import IO

import numpy as np

from ..neural_control.dqn import TrainingTrace
from ..ode_model import OdeSolution
from .experiments import LineSearchTrace, SweepResult, classify_difference

FORMATS = ("csv", "json")


def _num(x) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def table(result) -> tuple[list[str], list[list]]:
    """Column names and rows for any harness result."""
    if isinstance(result, (OdeSolution, LineSearchTrace)):
        cols = [result.times, result.values[:, 0], result.values[:, 1]]
        header = ["t", "d1", "d2"]
        if isinstance(result, LineSearchTrace):
            header.append("N")
            cols.append(result.capacity)
        return header, [list(r) for r in zip(*cols)]
    if isinstance(result, SweepResult):
        header = ["N", "m", "M"]
        rows = []
        if result.M_alt is not None:
            header += ["M_alt", "difference", "class"]
            diff = result.difference
            cls = classify_difference(diff)
        for i, N in enumerate(result.N_values):
            for j, m in enumerate(result.m_values):
                row = [int(N), int(m), result.M[i, j]]
                if result.M_alt is not None:
                    row += [result.M_alt[i, j], diff[i, j], int(cls[i, j])]
                rows.append(row)
        return header, rows
    if isinstance(result, TrainingTrace):
        rows = [[i, r, int(n)] for i, (r, n) in enumerate(zip(result.returns, result.capacities))]
        return ["episode", "return", "N"], rows
    raise TypeError(f"cannot serialize {type(result).__name__}")


def write(result, stream: IO[str], fmt: str = "csv") -> None:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    header, rows = table(result)
    if fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(header)
        w.writerows([_num(x) for x in row] for row in rows)
        return
    columns = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    doc = {name: [v.item() if isinstance(v, np.generic) else v for v in col] for name, col in columns.items()}
    json.dump(doc, stream)
    stream.write("\n")


def emit(result, path: str | Path, fmt: str = "csv") -> Path:
    """Write ``result`` to ``path``; I/O errors name the offending path."""
    path = Path(path)
    buf = io.StringIO()
    write(result, buf, fmt)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_table(path: str | Path, fmt: str = "csv") -> dict[str, np.ndarray]:
    """Parse an emitted file back into float columns."""
    path = Path(path)
    if fmt == "json":
        doc = json.loads(path.read_text())
        return {k: np.asarray(v, dtype=float) for k, v in doc.items()}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
