"""Harmonic interpolation of boundary families of convex functions and bodies.

Functions are interpolated through the dual side: conjugate every boundary
function on a shared dual grid, integrate the conjugates against harmonic
measure, and conjugate back.  Bodies are interpolated by integrating support
values.  The convex-envelope route (the psd-cone case) is computed separately
by iterated line convexification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .cones import DirichletSet
from .convex import ConvexBody, conjugate_grid
from .grid import Axis, GridFn
from .harmonic import DiskSolver, Domain, harmonic_weights
from .verify import CheckReport, _scale, is_convex, is_F_subharmonic, is_product_subharmonic


def _axes(axes) -> tuple:
    return tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes)


@dataclass(frozen=True)
class BoundaryFunctionFamily:
    """Convex functions phi_tau on a shared y-grid, one per boundary node of ``domain``.

    ``values`` has shape (M, *y_shape); +inf marks points outside a function's domain.
    """

    domain: Domain
    y_axes: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "y_axes", _axes(self.y_axes))
        vals = np.asarray(self.values, dtype=float)
        n_nodes = len(self.domain.boundary_nodes())
        shape = (n_nodes,) + tuple(a.count for a in self.y_axes)
        if vals.shape != shape:
            raise ValueError(f"family values have shape {vals.shape}, expected {shape}")
        if np.any(np.isneginf(vals)) or np.any(np.isnan(vals)):
            raise ValueError("family values must be finite or +inf")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.y_axes)

    def member(self, i: int) -> GridFn:
        return GridFn(self.y_axes, self.values[i])

    def check(self, tol: float = 1e-9, modulus: float | None = None) -> list[str]:
        """Problems with the family invariants (empty when it is well formed)."""
        problems = []
        for i in range(len(self.values)):
            if not is_convex(self.member(i), tol).passed:
                problems.append(f"member {i} is not convex")
        if modulus is not None:
            v = self.values
            nxt = np.roll(v, -1, axis=0) if self.domain.kind == "disk" else v[1:]
            cur = v if self.domain.kind == "disk" else v[:-1]
            both = np.isfinite(cur) & np.isfinite(nxt)
            jump = float(np.max(np.abs(np.where(both, cur - nxt, 0.0)))) if both.any() else 0.0
            if jump > modulus:
                problems.append(f"adjacent members differ by {jump:.3g} > {modulus}")
        return problems

    @classmethod
    def from_function(cls, domain: Domain, y_axes, func) -> "BoundaryFunctionFamily":
        """``func(i, node, *y_mesh)`` gives member i on the y-grid."""
        y_axes = _axes(y_axes)
        mesh = np.meshgrid(*[a.nodes for a in y_axes], indexing="ij")
        nodes = domain.boundary_nodes()
        vals = np.stack([np.broadcast_to(func(i, p, *mesh), mesh[0].shape) for i, p in enumerate(nodes)])
        return cls(domain, y_axes, vals)


@dataclass(frozen=True)
class BoundaryBodyFamily:
    domain: Domain
    bodies: tuple

    def __post_init__(self):
        bodies = tuple(self.bodies)
        object.__setattr__(self, "bodies", bodies)
        if len(bodies) != len(self.domain.boundary_nodes()):
            raise ValueError("need one body per boundary node")
        first = bodies[0]
        if any(not first.compatible(b) for b in bodies[1:]):
            raise ValueError("bodies must share dimension and direction count")

    @property
    def supports(self) -> np.ndarray:
        return np.stack([b.support for b in self.bodies])

    def modulus(self) -> float:
        h = self.supports
        nxt = np.roll(h, -1, axis=0) if self.domain.kind == "disk" else h[1:]
        cur = h if self.domain.kind == "disk" else h[:-1]
        return float(np.max(np.abs(cur - nxt)))


# ---------------------------------------------------------------------------
# comparability


@dataclass
class ComparabilityReport:
    passed: bool
    worst_constant: float
    finite: np.ndarray = field(repr=False)
    mixed: int = 0
    isolated: int = 0
    witness: tuple | None = None


def family_conjugates(family: BoundaryFunctionFamily, dual_axes) -> np.ndarray:
    """phi*_tau on the dual grid for every member, +inf where the sup leaves the grid."""
    dual_axes = _axes(dual_axes)
    vals, flags = conjugate_grid(family.values, family.y_axes, dual_axes, batch_ndim=1, return_unbounded=True)
    vals = np.where(flags | ~np.isfinite(vals), np.inf, vals)
    return vals


def locally_comparable_check(family: BoundaryFunctionFamily, dual_axes) -> ComparabilityReport:
    """Grid reading of local comparability of the conjugates.

    At each dual node the conjugates are either all finite (their spread is
    the local constant) or all infinite.  The finite set may not contain
    isolated nodes.
    """
    conj = family_conjugates(family, dual_axes)
    fin = np.isfinite(conj)
    all_fin = np.all(fin, axis=0)
    mixed = np.any(fin, axis=0) & ~all_fin
    spread = np.where(all_fin, np.max(np.where(fin, conj, -np.inf), axis=0) - np.min(np.where(fin, conj, np.inf), axis=0), 0.0)
    worst = float(spread.max()) if all_fin.any() else 0.0
    isolated = _isolated(all_fin)
    witness = None
    if mixed.any():
        u_idx = tuple(int(i) for i in np.argwhere(mixed)[0])
        witness = (u_idx, [int(t) for t in np.nonzero(fin[(slice(None),) + u_idx])[0]])
    passed = not mixed.any() and isolated == 0 and all_fin.any()
    return ComparabilityReport(passed, worst, all_fin, int(mixed.sum()), isolated, witness)


def _isolated(region: np.ndarray) -> int:
    if region.size <= 1:
        return 0
    nb = np.zeros(region.shape, dtype=bool)
    for k in range(region.ndim):
        if region.shape[k] < 2:
            continue
        sl_a = [slice(None)] * region.ndim
        sl_b = [slice(None)] * region.ndim
        sl_a[k], sl_b[k] = slice(1, None), slice(None, -1)
        nb[tuple(sl_a)] |= region[tuple(sl_b)]
        nb[tuple(sl_b)] |= region[tuple(sl_a)]
    return int(np.sum(region & ~nb))


# ---------------------------------------------------------------------------
# interpolation


def interior_points(domain: Domain, x_axes) -> tuple[np.ndarray, np.ndarray]:
    """Base-grid points and the mask of those inside the domain (closed for intervals)."""
    x_axes = _axes(x_axes)
    mesh = np.meshgrid(*[a.nodes for a in x_axes], indexing="ij")
    pts = np.stack(mesh, axis=-1)
    if domain.kind == "interval":
        mask = domain.is_interior(pts[..., 0], closed=True)
    else:
        mask = domain.is_interior(pts)
    return pts, mask


@dataclass
class FunctionInterpolation:
    Phi: GridFn
    Phi_star: GridFn
    mask: np.ndarray
    conjugates: np.ndarray = field(repr=False)
    comparability: ComparabilityReport | None = None


def interpolate_functions(
    family: BoundaryFunctionFamily,
    x_axes,
    dual_axes,
    y_axes=None,
    infinite_outside: bool = False,
    require_comparable: bool = True,
) -> FunctionInterpolation:
    """Phi(x, .) = (integral of phi*_tau against harmonic measure at x)*.

    ``x_axes`` is the base grid; nodes outside the domain get +inf.  With
    ``infinite_outside`` the back-transform marks y whose sup leaves the dual
    grid as +inf, which is the right reading for indicator families.
    """
    if family.domain.kind not in ("interval", "disk"):
        raise ValueError("interpolation needs an interval or disk domain")
    x_axes, dual_axes = _axes(x_axes), _axes(dual_axes)
    y_axes = family.y_axes if y_axes is None else _axes(y_axes)
    comp = locally_comparable_check(family, dual_axes)
    if require_comparable and not comp.passed:
        raise ValueError(f"family is not locally comparable on this dual grid (witness {comp.witness})")
    conj = family_conjugates(family, dual_axes)
    fin = np.all(np.isfinite(conj), axis=0)
    pts, mask = interior_points(family.domain, x_axes)
    W = harmonic_weights(family.domain, pts[mask], closed=True)
    flat = np.where(fin, conj, 0.0).reshape(conj.shape[0], -1)
    star_in = (W @ flat).reshape((-1,) + fin.shape)
    star_in = np.where(fin, star_in, np.inf)
    u_shape = tuple(a.count for a in dual_axes)
    star = np.full(mask.shape + u_shape, np.inf)
    star[mask] = star_in
    back, flags = conjugate_grid(star_in, dual_axes, y_axes, batch_ndim=1, return_unbounded=True)
    if infinite_outside:
        back = np.where(flags, np.inf, back)
    y_shape = tuple(a.count for a in y_axes)
    Phi = np.full(mask.shape + y_shape, np.inf)
    Phi[mask] = back
    nx = len(x_axes)
    return FunctionInterpolation(
        GridFn(x_axes + y_axes, Phi, (nx, len(y_axes))),
        GridFn(x_axes + dual_axes, star, (nx, len(dual_axes))),
        mask, conj, comp,
    )


def interpolate_bodies(family: BoundaryBodyFamily, points) -> list[ConvexBody]:
    """A_x = integral of A_tau against harmonic measure at each point (support values add)."""
    return [ConvexBody(family.bodies[0].dim, h) for h in interpolate_supports(family, points)]


def interpolate_supports(family: BoundaryBodyFamily, points) -> np.ndarray:
    """Support vectors of the interpolated bodies, shape (P, n_support)."""
    W = harmonic_weights(family.domain, points, closed=True)
    return W @ family.supports


def dual_by_grid_solve(family: BoundaryFunctionFamily, dual_axes, count: int = 129) -> GridFn:
    """Phi*(x, u) on the covering square grid by one Dirichlet solve per dual node (disk only).

    Serves as an independent route to the Poisson-kernel quadrature.
    """
    if family.domain.kind != "disk":
        raise ValueError("grid-solve route is implemented for the disk")
    dual_axes = _axes(dual_axes)
    conj = family_conjugates(family, dual_axes)
    if not np.all(np.isfinite(conj)):
        raise ValueError("grid-solve route needs conjugates finite on the whole dual grid")
    solver = DiskSolver(family.domain, count)
    u_shape = conj.shape[1:]
    out = np.full((count, count) + u_shape, np.nan)
    for u_idx in np.ndindex(*u_shape):
        sol = solver.solve(conj[(slice(None),) + u_idx])
        out[(slice(None), slice(None)) + u_idx] = sol.values
    return GridFn(solver.axes + dual_axes, out, (2, len(dual_axes)))


# ---------------------------------------------------------------------------
# envelope diagnostics


@dataclass
class EnvelopeReport:
    boundary_error: float
    product: CheckReport
    duality_residual: float
    duality_subharmonic: bool
    duality_reports: list = field(default_factory=list)

    def passed(self, boundary_tol: float = 1e-2, duality_tol: float = 1e-3) -> bool:
        return (
            self.boundary_error <= boundary_tol
            and self.product.passed
            and self.duality_residual <= duality_tol
            and self.duality_subharmonic
        )

    def to_dict(self) -> dict:
        return {
            "boundary_error": self.boundary_error,
            "product": self.product.to_dict(),
            "duality_residual": self.duality_residual,
            "duality_subharmonic": self.duality_subharmonic,
        }


def _collar_values(family: BoundaryFunctionFamily, evaluate, collar: float, every: int):
    """Boundary values of a function of x by linear extrapolation from two collar points."""
    dom = family.domain
    if dom.kind == "interval":
        inward = [(dom.a, 1.0), (dom.b, -1.0)]
        out = []
        for i, (p, sgn) in enumerate(inward):
            x1 = np.array([[p + sgn * collar]])
            x2 = np.array([[p + 2 * sgn * collar]])
            out.append((i, 2 * evaluate(x1)[0] - evaluate(x2)[0]))
        return out
    th = dom.boundary_angles
    c = np.asarray(dom.center)
    out = []
    for i in range(0, len(th), every):
        e = np.array([math.cos(th[i]), math.sin(th[i])])
        x1 = (c + (dom.radius - collar) * e)[None]
        x2 = (c + (dom.radius - 2 * collar) * e)[None]
        out.append((i, 2 * evaluate(x1)[0] - evaluate(x2)[0]))
    return out


def resolved_nodes(values: np.ndarray, y_axes, dual_axes) -> np.ndarray:
    """Nodes whose discrete gradient lies strictly inside the dual box.

    Only there does a conjugate computed on ``dual_axes`` reproduce the data.
    """
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    filled = np.where(ok, values, 0.0)
    for k, (ya, ua) in enumerate(zip(y_axes, dual_axes)):
        g = np.gradient(filled, ya.step, axis=k) if ya.count > 1 else np.zeros_like(filled)
        # gradients next to an infinite node are meaningless
        near = np.ones_like(ok)
        for shift in (-1, 1):
            near &= np.roll(ok, shift, axis=k)
        ok &= near & (g > ua.lo) & (g < ua.hi)
    return ok


def envelope_property_check(
    result: FunctionInterpolation,
    family: BoundaryFunctionFamily,
    F: DirichletSet,
    gammas=None,
    tol: float = 1e-4,
    collar: float | None = None,
    n_dual_samples: int = 5,
    every: int = 8,
    eps: float | None = None,
) -> EnvelopeReport:
    """Boundary attainment, product subharmonicity and Legendre duality of an interpolant.

    Boundary values are obtained by extrapolating the interpolation formula
    from a one-cell collar and compared on :func:`resolved_nodes` only.  ``eps`` mollifies Phi before the product check,
    which smooths the piecewise-linear fibres of a discrete conjugate.
    """
    dom = family.domain
    x_axes = result.Phi.x_axes
    dual_axes = result.Phi_star.y_axes
    collar = collar or min(a.step for a in x_axes)
    conj = result.conjugates
    fin = np.all(np.isfinite(conj), axis=0)
    flat = np.where(fin, conj, 0.0).reshape(conj.shape[0], -1)

    def star_at(x):
        return (harmonic_weights(dom, x, closed=True) @ flat).reshape((-1,) + fin.shape)

    def phi_at(x):
        s = np.where(fin, star_at(x), np.inf)
        return conjugate_grid(s, dual_axes, family.y_axes, batch_ndim=1)

    boundary = 0.0
    for i, vals in _collar_values(family, phi_at, collar, every):
        target = family.values[i]
        ok = resolved_nodes(target, family.y_axes, dual_axes) & np.isfinite(vals)
        if ok.any():
            boundary = max(boundary, float(np.max(np.abs(vals - target)[ok])))

    Phi = result.Phi
    if eps:
        from .convex import mollify

        Phi = mollify(Phi, eps)
    product = is_product_subharmonic(Phi, F, gammas, tol)

    # duality: x -> -Phi*(x, u) is F-subharmonic and meets -phi*_tau(u) on the boundary
    u_flat = np.flatnonzero(fin.ravel())
    picks = u_flat[np.linspace(0, len(u_flat) - 1, min(n_dual_samples, len(u_flat))).astype(int)]
    residual, sub_ok, reports = 0.0, True, []
    star = result.Phi_star.values.reshape(result.mask.shape + (-1,))
    # one scale for every slice: the size of the whole conjugate family
    scale = _scale(np.where(np.isfinite(star), star, np.nan), [a.step for a in x_axes])
    for k in picks:
        vals = -star[..., k]
        g = GridFn(x_axes, np.where(result.mask, vals, np.inf))
        rep = is_F_subharmonic(g, F, tol, scale=scale)
        reports.append(rep)
        sub_ok &= rep.passed
        for i, bval in _collar_values(family, lambda x: -star_at(x).reshape(len(x), -1)[:, k], collar, every):
            residual = max(residual, abs(float(bval) + float(conj.reshape(conj.shape[0], -1)[i, k])))
    return EnvelopeReport(boundary, product, residual, bool(sub_ok), reports)


# ---------------------------------------------------------------------------
# convex envelope route


@numba.njit(cache=True)
def _convexify_direction(vals, shape, direction):
    """Lower convex envelope along every lattice line with the given index direction, in place."""
    nd = shape.shape[0]
    total = vals.shape[0]
    strides = np.empty(nd, np.int64)
    acc = 1
    for k in range(nd - 1, -1, -1):
        strides[k] = acc
        acc *= shape[k]
    maxlen = 0
    for k in range(nd):
        if shape[k] > maxlen:
            maxlen = shape[k]
    idx = np.empty(maxlen, np.int64)
    pos = np.empty(maxlen, np.float64)
    val = np.empty(maxlen, np.float64)
    hull = np.empty(maxlen, np.int64)
    multi = np.empty(nd, np.int64)
    change = 0.0
    for p in range(total):
        rem = p
        for k in range(nd):
            multi[k] = rem // strides[k]
            rem = rem % strides[k]
        start = False
        for k in range(nd):
            q = multi[k] - direction[k]
            if q < 0 or q >= shape[k]:
                start = True
        if not start:
            continue
        n = 0
        while True:
            ok = True
            for k in range(nd):
                c = multi[k] + n * direction[k]
                if c < 0 or c >= shape[k]:
                    ok = False
            if not ok:
                break
            flat = 0
            for k in range(nd):
                flat += (multi[k] + n * direction[k]) * strides[k]
            idx[n] = flat
            n += 1
        if n < 3:
            continue
        h = 0
        for i in range(n):
            v = vals[idx[i]]
            if not np.isfinite(v):
                continue
            while h >= 2:
                i0 = hull[h - 2]
                i1 = hull[h - 1]
                if (vals[idx[i1]] - vals[idx[i0]]) * (i - i0) >= (v - vals[idx[i0]]) * (i1 - i0):
                    h -= 1
                else:
                    break
            hull[h] = i
            h += 1
        if h < 2:
            continue
        for j in range(h - 1):
            a = hull[j]
            b = hull[j + 1]
            va = vals[idx[a]]
            vb = vals[idx[b]]
            for i in range(a + 1, b):
                new = va + (vb - va) * (i - a) / (b - a)
                old = vals[idx[i]]
                if new < old:
                    if np.isfinite(old):
                        if old - new > change:
                            change = old - new
                    else:
                        change = np.inf
                    vals[idx[i]] = new
    return change


def _primitive_directions(ndim: int, radius: int) -> list[tuple]:
    out = []
    for d in np.ndindex(*([2 * radius + 1] * ndim)):
        v = tuple(int(c) - radius for c in d)
        if not any(v):
            continue
        first = next(c for c in v if c)
        if first < 0:
            continue
        if math.gcd(*[abs(c) for c in v]) != 1:
            continue
        out.append(v)
    return out


def convexify(values: np.ndarray, directions, tol: float = 1e-10, max_iter: int = 500) -> tuple[np.ndarray, int]:
    """Iterate line convexification over ``directions`` until the largest change is <= tol."""
    vals = np.ascontiguousarray(values, dtype=float).ravel().copy()
    shape = np.asarray(values.shape, dtype=np.int64)
    dirs = [np.asarray(d, dtype=np.int64) for d in directions]
    for it in range(1, max_iter + 1):
        change = 0.0
        for d in dirs:
            change = max(change, _convexify_direction(vals, shape, d))
        if change <= tol:
            return vals.reshape(values.shape), it
    raise RuntimeError(f"convex envelope did not settle in {max_iter} sweeps (last change {change:.3e})")


def convex_hull_interpolation(
    family: BoundaryFunctionFamily,
    x_axes=None,
    radius: int = 2,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> GridFn:
    """Discrete convex envelope on (domain x y-grid) of the boundary graph.

    Interval: boundary data sit on the end rows of the base axis; the
    direction set joins every pair of end-row nodes.  Disk: boundary data are
    carried by the grid nodes just outside the circle (angular linear
    interpolation of the family) and lattice directions up to ``radius`` are used.
    """
    dom = family.domain
    y_axes = family.y_axes
    ny = len(y_axes)
    y_shape = tuple(a.count for a in y_axes)
    if dom.kind == "interval":
        x_axes = _axes(x_axes or (Axis(dom.a, dom.b, 11),))
        ax = x_axes[0]
        if not (math.isclose(ax.lo, dom.a) and math.isclose(ax.hi, dom.b)):
            raise ValueError("base axis must span the interval")
        vals = np.full((ax.count,) + y_shape, np.inf)
        vals[0] = family.values[0]
        vals[-1] = family.values[1]
        steps = ax.count - 1
        directions = [tuple([1] + [0] * ny)]
        for k in range(ny):
            e = [0] * (ny + 1)
            e[k + 1] = 1
            directions.append(tuple(e))
        span = [a.count - 1 for a in y_axes]
        for off in np.ndindex(*[2 * s + 1 for s in span]):
            d = (steps,) + tuple(int(o) - s for o, s in zip(off, span))
            g = math.gcd(*[abs(c) for c in d])
            directions.append(tuple(c // g for c in d))
        directions = sorted(set(directions))
        out, _ = convexify(vals, directions, tol, max_iter)
        return GridFn(x_axes + y_axes, out, (1, ny))
    if dom.kind != "disk":
        raise ValueError("convex envelope route needs an interval or disk")
    x_axes = _axes(x_axes or (Axis(dom.center[0] - dom.radius, dom.center[0] + dom.radius, 33),
                             Axis(dom.center[1] - dom.radius, dom.center[1] + dom.radius, 33)))
    pts, inside = interior_points(dom, x_axes)
    ring = np.zeros(inside.shape, dtype=bool)
    for k in range(2):
        for s in (-1, 1):
            ring |= np.roll(inside, s, axis=k)
    ring &= ~inside
    vals = np.full(inside.shape + y_shape, np.inf)
    th = np.mod(np.arctan2(pts[..., 1] - dom.center[1], pts[..., 0] - dom.center[0]), 2 * np.pi)
    M = dom.n_boundary
    pos = th / (2 * np.pi) * M
    i0 = np.floor(pos).astype(int) % M
    i1 = (i0 + 1) % M
    frac = pos - np.floor(pos)
    for (i, j) in np.argwhere(ring):
        a, b = family.values[i0[i, j]], family.values[i1[i, j]]
        with np.errstate(invalid="ignore"):
            vals[i, j] = np.where(np.isfinite(a) & np.isfinite(b), (1 - frac[i, j]) * a + frac[i, j] * b, np.inf)
    directions = _primitive_directions(2 + ny, radius)
    out, _ = convexify(vals, directions, tol, max_iter)
    out[~inside] = np.inf
    return GridFn(x_axes + y_axes, out, (2, ny))
