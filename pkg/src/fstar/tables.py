"""Deterministic table output (CSV or JSON) for grid functions, body maps and plain tables.

Floats are written with 17 significant digits and infinities as the literal
``inf`` (a JSON string in JSON output), so a table written twice from the
same data is byte-identical and CSV output round-trips through
:meth:`GridFn.read_csv`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridFn, fmt


@dataclass
class Table:
    columns: list
    rows: list


@dataclass
class BodyMap:
    """Support vectors of bodies attached to base points."""

    points: np.ndarray
    supports: np.ndarray
    body_dim: int

    def table(self) -> Table:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        h = np.asarray(self.supports, dtype=float)
        xs = [f"x{k + 1}" for k in range(pts.shape[1])]
        if self.body_dim == 1:
            return Table(xs + ["lo", "hi"], [[*p, -s[1], s[0]] for p, s in zip(pts, h)])
        hs = [f"h{k}" for k in range(h.shape[1])]
        return Table(xs + hs, [[*p, *s] for p, s in zip(pts, h)])


def as_table(obj) -> Table:
    if isinstance(obj, Table):
        return obj
    if isinstance(obj, BodyMap):
        return obj.table()
    if isinstance(obj, GridFn):
        names = [f"x{k + 1}" for k in range(obj.ndim)]
        if obj.split:
            nx, ny = obj.split
            names = [f"x{k + 1}" for k in range(nx)] + [f"y{k + 1}" for k in range(ny)]
        pts = obj.points().reshape(-1, obj.ndim)
        return Table(names + ["value"], [[*p, v] for p, v in zip(pts, obj.values.ravel())])
    raise TypeError(f"cannot tabulate {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(float(v))


def _json_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return json.dumps(v)
    x = float(v)
    return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))


def render(obj, fmt_name: str = "csv") -> str:
    t = as_table(obj)
    if fmt_name == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(t.columns)
        for r in t.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()
    if fmt_name == "json":
        rows = ",\n".join("  [" + ", ".join(_json_cell(v) for v in r) + "]" for r in t.rows)
        return '{"columns": ' + json.dumps(list(t.columns)) + ', "rows": [\n' + rows + "\n]}\n"
    raise ValueError(f"unknown table format {fmt_name!r}")


def emit_table(obj, path, fmt_name: str = "csv") -> Path:
    """Write ``obj`` (GridFn, BodyMap or Table) to ``path`` in csv or json."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(obj, fmt_name))
    return path
