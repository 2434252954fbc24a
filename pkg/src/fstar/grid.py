"""Uniform rectangular grids and extended-real grid functions.

``GridFn`` values may be +inf (outside an effective domain); -inf is
rejected.  Two serialisations are offered: CSV (coordinates first, value last,
17 significant digits, ``inf`` literal) and a compact little-endian binary
layout::

    b"GRDF" | uint32 ndim | int32 n_x | (float64 lo, float64 hi, uint32 count) * ndim
    | float64 values in C order

where ``n_x`` is the number of base axes (-1 when the function has no split).
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_MAGIC = b"GRDF"


def fmt(v: float) -> str:
    """Deterministic 17-significant-digit float formatting."""
    v = float(v)
    if math.isfinite(v):
        return format(v, ".17g")
    if v != v:
        return "nan"
    return "inf" if v > 0 else "-inf"


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("an axis needs at least two nodes")
        if not self.hi > self.lo:
            raise ValueError("axis spacing must be positive")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    def index(self, x: float, tol: float = 1e-9) -> int:
        """Index of the node at coordinate ``x`` (must be a node)."""
        k = int(round((x - self.lo) / self.step))
        if k < 0 or k >= self.count or abs(self.nodes[k] - x) > tol * max(1.0, abs(x)) + 1e-12:
            raise ValueError(f"{x} is not a node of {self}")
        return k

    def sub(self, start: int, stop: int) -> "Axis":
        nodes = self.nodes
        return Axis(float(nodes[start]), float(nodes[stop - 1]), stop - start)

    @classmethod
    def centered(cls, half_width: float, count: int, center: float = 0.0) -> "Axis":
        return cls(center - half_width, center + half_width, count)


@dataclass(frozen=True)
class GridFn:
    axes: tuple
    values: np.ndarray = field(repr=False)
    split: tuple | None = None

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        vals = np.asarray(self.values, dtype=float)
        shape = tuple(a.count for a in axes)
        if vals.shape != shape:
            raise ValueError(f"values shape {vals.shape} does not match axes {shape}")
        if np.any(np.isneginf(vals)):
            raise ValueError("-inf values are not supported")
        object.__setattr__(self, "values", vals)
        if self.split is not None:
            nx, ny = self.split
            if nx + ny != len(axes) or nx < 0 or ny < 0:
                raise ValueError("split does not match the number of axes")
            object.__setattr__(self, "split", (int(nx), int(ny)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a.step for a in self.axes])

    @property
    def x_axes(self) -> tuple:
        return self.axes[: self.split[0]] if self.split else self.axes

    @property
    def y_axes(self) -> tuple:
        return self.axes[self.split[0]:] if self.split else ()

    def nodes(self) -> list[np.ndarray]:
        return [a.nodes for a in self.axes]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.nodes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid coordinates, shape (*shape, ndim)."""
        return np.stack(self.mesh(), axis=-1)

    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def with_values(self, values) -> "GridFn":
        return GridFn(self.axes, values, self.split)

    @classmethod
    def from_function(cls, axes, func, split=None) -> "GridFn":
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes)
        mesh = np.meshgrid(*[a.nodes for a in axes], indexing="ij")
        return cls(axes, np.broadcast_to(func(*mesh), mesh[0].shape).copy(), split)

    def sup_norm(self) -> float:
        f = self.values[self.finite()]
        return float(np.max(np.abs(f))) if f.size else 0.0

    def index_of(self, point) -> tuple:
        return tuple(a.index(float(p)) for a, p in zip(self.axes, np.atleast_1d(point)))

    def fiber(self, x_index) -> "GridFn":
        """The y-fibre at base node ``x_index``."""
        if not self.split:
            raise ValueError("fibres need a split function")
        return GridFn(self.y_axes, self.values[tuple(x_index)])

    # -- serialisation -------------------------------------------------------

    def to_csv(self, path=None, names=None) -> str:
        names = names or _default_names(self)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*names, "value"])
        pts = self.points().reshape(-1, self.ndim)
        for p, v in zip(pts, self.values.ravel()):
            w.writerow([*(fmt(c) for c in p), fmt(v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def read_csv(cls, source, split=None) -> "GridFn":
        text = Path(source).read_text() if not _looks_like_csv(source) else source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        data = np.array([[float(c) for c in r] for r in body])
        ndim = len(header) - 1
        axes = []
        for k in range(ndim):
            u = np.unique(data[:, k])
            axes.append(Axis(float(u[0]), float(u[-1]), len(u)))
        shape = tuple(a.count for a in axes)
        idx = tuple(
            np.rint((data[:, k] - axes[k].lo) / axes[k].step).astype(int) for k in range(ndim)
        )
        values = np.full(shape, np.nan)
        values[idx] = data[:, -1]
        if np.any(np.isnan(values)):
            raise ValueError("CSV does not cover a full rectangular grid")
        return cls(tuple(axes), values, split)

    def to_bytes(self) -> bytes:
        nx = -1 if self.split is None else self.split[0]
        head = _MAGIC + struct.pack("<Ii", self.ndim, nx)
        for a in self.axes:
            head += struct.pack("<ddI", a.lo, a.hi, a.count)
        return head + self.values.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFn":
        if blob[:4] != _MAGIC:
            raise ValueError("not a GridFn binary blob")
        ndim, nx = struct.unpack_from("<Ii", blob, 4)
        off = 12
        axes = []
        for _ in range(ndim):
            lo, hi, count = struct.unpack_from("<ddI", blob, off)
            axes.append(Axis(lo, hi, count))
            off += 20
        shape = tuple(a.count for a in axes)
        values = np.frombuffer(blob, dtype="<f8", offset=off).reshape(shape).copy()
        split = None if nx < 0 else (nx, ndim - nx)
        return cls(tuple(axes), values, split)


def _default_names(f: GridFn) -> list[str]:
    if f.split:
        nx, ny = f.split
        return [f"x{i + 1}" for i in range(nx)] + [f"y{j + 1}" for j in range(ny)]
    return [f"x{i + 1}" for i in range(f.ndim)]


def _looks_like_csv(source) -> bool:
    return isinstance(source, str) and "\n" in source
