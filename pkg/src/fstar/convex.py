"""Grid-sampled convex analysis.

Discrete Legendre-Fenchel transforms, convex bodies in R^1 and R^2 given by
support values, Minkowski arithmetic, volumes, gauges, sup-convolution and
mollification.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .grid import Axis, GridFn

# ---------------------------------------------------------------------------
# discrete conjugates


@numba.njit(cache=True)
def _conj_line(y, f, u, out, unbounded):
    n = y.shape[0]
    hull = np.empty(n, np.int64)
    h = 0
    for i in range(n):
        if not np.isfinite(f[i]):
            continue
        while h >= 2:
            i0 = hull[h - 2]
            i1 = hull[h - 1]
            if (f[i1] - f[i0]) * (y[i] - y[i0]) >= (f[i] - f[i0]) * (y[i1] - y[i0]):
                h -= 1
            else:
                break
        hull[h] = i
        h += 1
    if h == 0:
        for k in range(u.shape[0]):
            out[k] = -np.inf
            unbounded[k] = False
        return
    left_open = hull[0] == 0
    right_open = hull[h - 1] == n - 1
    s_first = np.inf
    s_last = -np.inf
    if h >= 2:
        s_first = (f[hull[1]] - f[hull[0]]) / (y[hull[1]] - y[hull[0]])
        s_last = (f[hull[h - 1]] - f[hull[h - 2]]) / (y[hull[h - 1]] - y[hull[h - 2]])
    j = 0
    for k in range(u.shape[0]):
        uk = u[k]
        while j < h - 1:
            s = (f[hull[j + 1]] - f[hull[j]]) / (y[hull[j + 1]] - y[hull[j]])
            if uk > s:
                j += 1
            else:
                break
        i = hull[j]
        out[k] = y[i] * uk - f[i]
        tol = 1e-12 * (1.0 + abs(uk))
        unb = False
        if h >= 2:
            if right_open and uk > s_last + tol:
                unb = True
            if left_open and uk < s_first - tol:
                unb = True
        unbounded[k] = unb


@numba.njit(cache=True)
def _conj_lines(y, F, u):
    L = F.shape[0]
    out = np.empty((L, u.shape[0]))
    unb = np.zeros((L, u.shape[0]), dtype=np.bool_)
    for line in range(L):
        _conj_line(y, F[line], u, out[line], unb[line])
    return out, unb


def conjugate_1d(y, f, u):
    """max_i (y_i u_k - f_i) along the last axis of ``f``, linear time per line.

    ``y`` and ``u`` must be ascending.  Returns (values, unbounded) where
    ``unbounded`` marks duals at which the maximiser sits on a grid edge that
    the finite region touches and the sup would keep growing past it.
    """
    y = np.ascontiguousarray(y, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    lead = f.shape[:-1]
    flat = np.ascontiguousarray(f.reshape(-1, f.shape[-1]))
    out, unb = _conj_lines(y, flat, u)
    return out.reshape(*lead, u.size), unb.reshape(*lead, u.size)


def conjugate_grid(values, in_axes, out_axes, batch_ndim: int = 0, return_unbounded: bool = False):
    """Tensorised discrete conjugate over the trailing ``len(in_axes)`` dimensions.

    The leading ``batch_ndim`` dimensions index independent functions.
    """
    vals = np.asarray(values, dtype=float)
    d = len(in_axes)
    flags = np.zeros(vals.shape, dtype=bool)
    for k in reversed(range(d)):
        ax = batch_ndim + k
        moved = np.moveaxis(vals, ax, -1)
        pflags = np.moveaxis(flags, ax, -1)
        inherited = np.any(pflags & np.isfinite(moved), axis=-1, keepdims=True)
        conj, unb = conjugate_1d(in_axes[k].nodes, moved, out_axes[k].nodes)
        unb = unb | inherited
        if k > 0:
            conj = -conj
        vals = np.moveaxis(conj, -1, ax)
        flags = np.moveaxis(unb, -1, ax)
    return (vals, flags) if return_unbounded else vals


def legendre(f: GridFn, dual_axes, return_unbounded: bool = False):
    """Discrete Legendre transform f*(u) = max over nodes of (y . u - f(y)).

    Tensorised over dimensions: one linear-time conjugate per grid line.
    +inf nodes never attain the max.  ``return_unbounded`` also returns a
    mask of duals whose sup would keep growing beyond the grid.
    """
    dual_axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in dual_axes)
    if len(dual_axes) != f.ndim:
        raise ValueError("need one dual axis per dimension")
    if not np.any(f.finite()):
        raise ValueError("empty effective domain")
    vals, flags = conjugate_grid(f.values, f.axes, dual_axes, return_unbounded=True)
    out = GridFn(dual_axes, vals)
    return (out, flags) if return_unbounded else out


def suggest_dual_axes(f: GridFn, count: int | None = None) -> tuple:
    """Dual bounds spanning the discrete subgradient range of ``f``."""
    axes = []
    for k, a in enumerate(f.axes):
        d = np.diff(f.values, axis=k) / a.step
        d = d[np.isfinite(d)]
        lo, hi = (float(d.min()), float(d.max())) if d.size else (-1.0, 1.0)
        if hi - lo < 1e-12:
            lo, hi = lo - 1.0, hi + 1.0
        axes.append(Axis(lo, hi, count or a.count))
    return tuple(axes)


# ---------------------------------------------------------------------------
# convex bodies


def directions(n_dir: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(n_dir) / n_dir
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def support_consistency(h) -> np.ndarray:
    """h_{i-1} + h_{i+1} - 2 cos(2 pi / N) h_i, which is >= 0 for genuine support values."""
    h = np.asarray(h, dtype=float)
    n = h.shape[-1]
    return np.roll(h, 1, -1) + np.roll(h, -1, -1) - 2 * math.cos(2 * math.pi / n) * h


def support_area(h) -> np.ndarray:
    """Area of the polygon cut out by consistent support values (vectorised over rows)."""
    h = np.asarray(h, dtype=float)
    n = h.shape[-1]
    edge = support_consistency(h) / math.sin(2 * math.pi / n)
    return 0.5 * np.sum(h * edge, axis=-1)


@dataclass(frozen=True)
class ConvexBody:
    """Convex body in R^m, m in {1, 2}, stored by its support values.

    m=1: ``support = (hi, -lo)`` for directions (+1, -1).
    m=2: ``support[i] = h(theta_i)`` with theta_i = 2 pi i / N.
    """

    dim: int
    support: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.support, dtype=float).copy()
        h.setflags(write=False)
        object.__setattr__(self, "support", h)
        if self.dim not in (1, 2):
            raise ValueError("only bodies in R^1 and R^2 are supported")
        if self.dim == 1 and h.shape != (2,):
            raise ValueError("an interval has two support values")
        if self.dim == 2 and (h.ndim != 1 or h.size < 3):
            raise ValueError("a planar body needs at least three support values")

    # constructors
    @classmethod
    def interval(cls, lo: float, hi: float) -> "ConvexBody":
        if lo > hi:
            raise ValueError("interval needs lo <= hi")
        return cls(1, np.array([hi, -lo], dtype=float))

    @classmethod
    def from_support(cls, h, strict: bool = True) -> "ConvexBody":
        body = cls(2, h)
        if strict and not body.is_consistent():
            raise ValueError("support values violate the discrete support condition")
        return body

    @classmethod
    def from_points(cls, points, n_dir: int = 256) -> "ConvexBody":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] == 1:
            return cls.interval(float(pts.min()), float(pts.max()))
        return cls(2, np.max(directions(n_dir) @ pts.T, axis=1))

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius: float = 1.0, n_dir: int = 256) -> "ConvexBody":
        return cls(2, directions(n_dir) @ np.asarray(center, dtype=float) + radius)

    @classmethod
    def ellipse(cls, a: float, b: float, angle: float = 0.0, center=(0.0, 0.0), n_dir: int = 256) -> "ConvexBody":
        d = directions(n_dir)
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        local = d @ rot
        h = np.sqrt((a * local[:, 0]) ** 2 + (b * local[:, 1]) ** 2)
        return cls(2, h + d @ np.asarray(center, dtype=float))

    # accessors
    @property
    def lo(self) -> float:
        self._need_dim(1)
        return -float(self.support[1])

    @property
    def hi(self) -> float:
        self._need_dim(1)
        return float(self.support[0])

    @property
    def n_dir(self) -> int:
        return self.support.size

    @property
    def directions(self) -> np.ndarray:
        if self.dim == 1:
            return np.array([[1.0], [-1.0]])
        return directions(self.n_dir)

    def _need_dim(self, m):
        if self.dim != m:
            raise ValueError(f"operation needs a body in R^{m}")

    def scale_length(self) -> float:
        return max(1.0, float(np.max(np.abs(self.support))))

    def is_consistent(self, tol: float = 1e-9) -> bool:
        if self.dim == 1:
            return self.lo <= self.hi + tol * self.scale_length()
        return bool(np.all(support_consistency(self.support) >= -tol * self.scale_length()))

    def compatible(self, other: "ConvexBody") -> bool:
        return self.dim == other.dim and self.support.shape == other.support.shape

    def vertices(self) -> np.ndarray:
        """Polygon vertices in counter-clockwise order (m=2)."""
        self._need_dim(2)
        if self.is_consistent():
            h = self.support
            th = 2 * np.pi * np.arange(h.size) / h.size
            th1 = np.roll(th, -1)
            h1 = np.roll(h, -1)
            s = math.sin(2 * math.pi / h.size)
            x = (h * np.sin(th1) - h1 * np.sin(th)) / s
            y = (h1 * np.cos(th) - h * np.cos(th1)) / s
            return np.stack([x, y], axis=-1)
        return _clip_halfplanes(self.directions, self.support)

    def to_dict(self) -> dict:
        if self.dim == 1:
            return {"dim": 1, "endpoints": [self.lo, self.hi]}
        return {"dim": 2, "directions": self.n_dir, "support": self.support.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConvexBody":
        if int(d["dim"]) == 1:
            lo, hi = d["endpoints"]
            return cls.interval(float(lo), float(hi))
        h = np.asarray(d["support"], dtype=float)
        if "directions" in d and int(d["directions"]) != h.size:
            raise ValueError("direction count does not match support length")
        return cls.from_support(h)


def _clip_halfplanes(normals, offsets, box: float | None = None) -> np.ndarray:
    """Sutherland-Hodgman clipping of a large square by {z : n_i . z <= c_i}."""
    big = box or 10.0 * (1.0 + float(np.max(np.abs(offsets))))
    poly = np.array([[-big, -big], [big, -big], [big, big], [-big, big]])
    for nrm, c in zip(normals, offsets):
        if len(poly) == 0:
            break
        d = poly @ nrm - c
        nxt = np.roll(poly, -1, axis=0)
        dn = np.roll(d, -1)
        out = []
        for p, q, dp, dq in zip(poly, nxt, d, dn):
            if dp <= 0:
                out.append(p)
            if (dp < 0 < dq) or (dq < 0 < dp):
                out.append(p + (q - p) * (dp / (dp - dq)))
        poly = np.array(out).reshape(-1, 2)
    return poly


def _shoelace(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def support_function(body: ConvexBody, u):
    """h_A(u) = sup_{z in A} z . u; ``u`` is a scalar (m=1) or (..., 2) array."""
    u = np.asarray(u, dtype=float)
    if body.dim == 1:
        return np.where(u >= 0, body.hi * u, body.lo * u)
    verts = body.vertices()
    if len(verts) == 0:
        raise ValueError("empty body")
    return np.max(u @ verts.T, axis=-1)


def indicator(body: ConvexBody, axes) -> GridFn:
    """0 on grid nodes inside the body, +inf outside."""
    axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes)
    if len(axes) != body.dim:
        raise ValueError("grid dimension does not match body dimension")
    tol = 1e-12 * body.scale_length()
    if body.dim == 1:
        y = axes[0].nodes
        inside = (y >= body.lo - tol) & (y <= body.hi + tol)
    else:
        mesh = np.stack(np.meshgrid(axes[0].nodes, axes[1].nodes, indexing="ij"), -1)
        inside = np.all(mesh @ body.directions.T <= body.support + tol, axis=-1)
    return GridFn(axes, np.where(inside, 0.0, np.inf))


def minkowski_sum(a: ConvexBody, b: ConvexBody) -> ConvexBody:
    if not a.compatible(b):
        raise ValueError("bodies must share dimension and direction count")
    return ConvexBody(a.dim, a.support + b.support)


def scale(a: ConvexBody, t: float) -> ConvexBody:
    if t < 0:
        raise ValueError("scaling factor must be nonnegative")
    return ConvexBody(a.dim, t * a.support)


def body_integral(weighted) -> ConvexBody:
    """Minkowski combination sum_i w_i A_i for nonnegative weights summing to one."""
    weighted = list(weighted)
    if not weighted:
        raise ValueError("nothing to integrate")
    w = np.array([float(wi) for wi, _ in weighted])
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    first = weighted[0][1]
    for _, b in weighted[1:]:
        if not first.compatible(b):
            raise ValueError("bodies must share dimension and direction count")
    h = np.tensordot(w, np.stack([b.support for _, b in weighted]), axes=1)
    return ConvexBody(first.dim, h)


def volume(body: ConvexBody) -> float:
    """Length (m=1) or polygon area of the half-plane intersection (m=2)."""
    if body.dim == 1:
        return max(body.hi - body.lo, 0.0)
    if body.is_consistent():
        return float(support_area(body.support))
    poly = _clip_halfplanes(body.directions, body.support)
    if len(poly) < 3:
        warnings.warn("empty half-plane intersection; volume is 0", stacklevel=2)
        return 0.0
    return _shoelace(poly)


def gauge(body: ConvexBody, y):
    """Minkowski gauge inf{lam > 0 : y in lam A} for a body with 0 in its interior."""
    y = np.asarray(y, dtype=float)
    if np.any(body.support <= 0):
        raise ValueError("0 must be an interior point of the body")
    if body.dim == 1:
        return np.where(y >= 0, y / body.hi, y / body.lo)
    return np.max((y @ body.directions.T) / body.support, axis=-1)


def distance(body: ConvexBody, y) -> np.ndarray:
    """Euclidean distance from points ``y`` to the body."""
    y = np.asarray(y, dtype=float)
    if body.dim == 1:
        return np.maximum(np.maximum(body.lo - y, y - body.hi), 0.0)
    pts = y.reshape(-1, 2)
    verts = body.vertices()
    p, q = verts, np.roll(verts, -1, axis=0)
    e = q - p
    ee = np.maximum(np.sum(e * e, axis=1), 1e-300)
    rel = pts[:, None, :] - p[None]
    t = np.clip(np.sum(rel * e[None], axis=2) / ee, 0.0, 1.0)
    closest = p[None] + t[..., None] * e[None]
    dist = np.sqrt(np.min(np.sum((pts[:, None, :] - closest) ** 2, axis=2), axis=1))
    inside = np.all(pts @ body.directions.T <= body.support + 1e-12 * body.scale_length(), axis=1)
    return np.where(inside, 0.0, dist).reshape(y.shape[:-1])


def smoothed_indicator(body: ConvexBody, k: float, axes) -> GridFn:
    """exp(k dist(y, A)) - 1, increasing in k to the indicator of A."""
    if k <= 0:
        raise ValueError("k must be positive")
    axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes)
    mesh = np.meshgrid(*[a.nodes for a in axes], indexing="ij")
    pts = mesh[0] if body.dim == 1 else np.stack(mesh, axis=-1)
    with np.errstate(over="ignore"):
        vals = np.expm1(k * distance(body, pts))
    return GridFn(axes, vals)


# ---------------------------------------------------------------------------
# regularisations


def _shrink_slices(axes, shrink, which):
    slices, new_axes = [], []
    for k, a in enumerate(axes):
        if shrink is None or k not in which:
            slices.append(slice(None))
            new_axes.append(a)
            continue
        mid = 0.5 * (a.lo + a.hi)
        half = 0.5 * (a.hi - a.lo) * shrink
        nodes = a.nodes
        keep = np.nonzero(np.abs(nodes - mid) <= half + 1e-12 * max(1.0, abs(half)))[0]
        if keep.size < 2:
            raise ValueError("shrunk grid has fewer than two nodes on an axis")
        slices.append(slice(keep[0], keep[-1] + 1))
        new_axes.append(a.sub(keep[0], keep[-1] + 1))
    return tuple(slices), tuple(new_axes)


def _window_max(moved: np.ndarray, step: float, eps: float, radius: int) -> np.ndarray:
    """Direct max over the 2 * radius + 1 nearest nodes along the last axis."""
    out = moved.copy()
    n = moved.shape[-1]
    for k in range(1, min(radius, n - 1) + 1):
        pen = (k * step) ** 2 / (2 * eps)
        np.maximum(out[..., k:], moved[..., :-k] - pen, out=out[..., k:])
        np.maximum(out[..., :-k], moved[..., k:] - pen, out=out[..., :-k])
    return out


def sup_convolution(psi: GridFn, eps: float, shrink: float | None = 0.5, axes_to_shrink=None,
                    max_window: int = 64) -> GridFn:
    """psi_eps(z) = max over nodes z' of psi(z') - |z - z'|^2 / (2 eps).

    Separable: one parabolic max-convolution per axis.  A node z' farther
    than sqrt(2 eps osc(psi)) from z never beats z' = z, so when that window
    spans at most ``max_window`` nodes the max is taken directly (exact up to
    one rounding, and monotone in eps); otherwise it is a discrete conjugate
    in disguise.  The result is restricted to the centred sub-box of relative
    size ``shrink`` (all axes unless ``axes_to_shrink`` is given).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not np.all(psi.finite()):
        raise ValueError("sup-convolution needs a finite function")
    vals = psi.values
    for k, a in enumerate(psi.axes):
        z = a.nodes
        moved = np.moveaxis(vals, k, -1)
        osc = float(np.max(moved) - np.min(moved))
        radius = int(math.floor(math.sqrt(2 * eps * osc) / a.step)) + 1
        if radius <= max_window:
            out = _window_max(moved, a.step, eps, radius)
        else:
            phi = z**2 / (2 * eps) - moved
            conj, _ = conjugate_1d(z, phi, z / eps)
            # z' = z is always a candidate; the max undoes cancellation error for small eps
            out = np.maximum(conj - z**2 / (2 * eps), moved)
        vals = np.moveaxis(out, -1, k)
    which = range(psi.ndim) if axes_to_shrink is None else axes_to_shrink
    slices, axes = _shrink_slices(psi.axes, shrink, set(which))
    return GridFn(axes, vals[slices], psi.split)


def bump_weights(radius_nodes: float, r: int) -> np.ndarray:
    k = np.arange(-r, r + 1, dtype=float)
    t = k / radius_nodes
    w = np.zeros_like(t)
    inside = np.abs(t) < 1
    w[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return w / w.sum()


def mollify(psi: GridFn, eps: float) -> GridFn:
    """Convolution with a tensorised compactly supported bump of radius ``eps``.

    The output grid loses the stencil radius on each side.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vals = psi.values
    axes = list(psi.axes)
    for k, a in enumerate(psi.axes):
        r = int(math.floor(eps / a.step + 1e-9))
        if r == 0:
            continue
        n_out = a.count - 2 * r
        if n_out < 2:
            raise ValueError("grid too small for the mollifier stencil")
        w = bump_weights(eps / a.step, r)
        moved = np.moveaxis(vals, k, 0)
        acc = np.zeros((n_out,) + moved.shape[1:])
        for j, wj in enumerate(w):
            if wj:
                acc = acc + wj * moved[j: j + n_out]
        vals = np.moveaxis(acc, 0, k)
        axes[k] = a.sub(r, r + n_out)
    return GridFn(tuple(axes), vals, psi.split)
