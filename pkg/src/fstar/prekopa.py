"""Marginal functionals, section volumes, transport and the minimum principle.

The marginal of psi(x, y) is phi(x) = -log of the integral of exp(-psi(x, .))
over the fibre.  For one-dimensional fibres the module also provides the
quantile transport between fibres, its x-velocity Gamma, and the two sides of
the Hessian identity

    Hess phi = E[(d_y Gamma)^T (d_y Gamma)] + E[(I; Gamma)^T Hess psi (I; Gamma)]

where E is expectation under the normalised fibre density.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .blockprod import BlockSym, restrict_graph
from .grid import Axis, GridFn

CDF_RESOLUTION = 1e-14
TAIL_GAP = 5.0
CORE_DENSITY = 1e-25


def trapezoid_weights(axis: Axis) -> np.ndarray:
    w = np.full(axis.count, axis.step)
    w[0] = w[-1] = 0.5 * axis.step
    return w


def _fiber_weights(y_axes) -> np.ndarray:
    w = np.ones(())
    for a in y_axes:
        w = np.multiply.outer(w, trapezoid_weights(a))
    return w


def _need_split(psi: GridFn):
    if not psi.split:
        raise ValueError("psi needs a (base; fibre) split")


@dataclass
class MarginalResult:
    phi: GridFn
    log_integral: np.ndarray
    scheme: str = "trapezoid"
    truncated: np.ndarray | None = field(default=None, repr=False)

    @property
    def integral(self) -> np.ndarray:
        return np.exp(self.log_integral)


def marginal(psi: GridFn, weight: GridFn | None = None) -> MarginalResult:
    """phi(x) = -log sum_y exp(-psi(x, y) - u(y)) * trapezoid cell volume.

    Each fibre is shifted by its minimum before exponentiation so that large
    values do not underflow.  +inf nodes contribute zero; an all-+inf fibre
    gives phi = +inf.  A warning is issued when finite values on the fibre
    boundary come within ``TAIL_GAP`` of the fibre minimum.
    """
    _need_split(psi)
    nx, ny = psi.split
    vals = psi.values
    if weight is not None:
        if weight.axes != psi.y_axes:
            raise ValueError("weight must live on the fibre grid")
        vals = vals + weight.values
    y_dims = tuple(range(nx, nx + ny))
    fin = np.isfinite(vals)
    any_fin = np.any(fin, axis=y_dims)
    lo = np.min(np.where(fin, vals, np.inf), axis=y_dims)
    shift = np.where(any_fin, lo, 0.0)
    shifted = vals - shift.reshape(shift.shape + (1,) * ny)
    w = _fiber_weights(psi.y_axes)
    with np.errstate(over="ignore"):
        dens = np.where(fin, np.exp(-shifted), 0.0)
    total = np.sum(dens * w, axis=y_dims)
    with np.errstate(divide="ignore"):
        log_int = np.where(total > 0, np.log(total) - shift, -np.inf)
    phi = -log_int

    edge = np.zeros(psi.shape[nx:], dtype=bool)
    for k in range(ny):
        sl = [slice(None)] * ny
        sl[k] = 0
        edge[tuple(sl)] = True
        sl[k] = -1
        edge[tuple(sl)] = True
    near = fin & edge & (shifted < TAIL_GAP)
    truncated = np.any(near, axis=y_dims) & any_fin
    if np.any(truncated):
        warnings.warn(
            f"fibre boundary values within {TAIL_GAP} of the fibre minimum at "
            f"{int(truncated.sum())} base nodes; the integral may be truncated",
            stacklevel=2,
        )
    return MarginalResult(GridFn(psi.x_axes, phi), log_int, truncated=truncated)


# ---------------------------------------------------------------------------
# section volumes


def _golden_min(f, lo, hi, iters: int = 80):
    """Vectorised golden-section search for the minimiser of convex f on [lo, hi]."""
    g = (np.sqrt(5.0) - 1) / 2
    a, b = lo.copy(), hi.copy()
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - g * (b - a)
        new_d = a + g * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, f(new_c), fd)
        fd_next = np.where(left, fc, f(new_d))
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    return 0.5 * (a + b)


def _bisect(f, inside, outside, tol: float):
    """Vectorised bisection for f = 0 with f(inside) <= 0 < f(outside)."""
    a, b = inside.copy(), outside.copy()
    while np.max(np.abs(b - a)) > tol:
        mid = 0.5 * (a + b)
        neg = f(mid) <= 0
        a = np.where(neg, mid, a)
        b = np.where(neg, b, mid)
    return 0.5 * (a + b)


@dataclass
class SectionResult:
    BK: GridFn
    lower: np.ndarray
    upper: np.ndarray
    mode: str


def section_volume(rho, level: float, x_axes=None, y_bracket=(-1e3, 1e3), tol: float = 1e-12) -> SectionResult:
    """B_K(x) = -log length of the section {y : rho(x, y) <= level}, fibre dimension 1.

    ``rho`` is either a vectorised callable ``rho(*x, y)`` that is convex in
    y (closed mode: golden-section fibre minimum, then bisection of both
    endpoints to ``tol``) or a split GridFn (grid mode: sub-level runs with
    linear interpolation at the crossings).  Empty sections give +inf.
    """
    if callable(rho):
        if x_axes is None:
            raise ValueError("closed mode needs the base axes")
        x_axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in x_axes)
        mesh = np.meshgrid(*[a.nodes for a in x_axes], indexing="ij")
        lo_b = np.full(mesh[0].shape, float(y_bracket[0]))
        hi_b = np.full(mesh[0].shape, float(y_bracket[1]))

        def g(y):
            return rho(*mesh, y) - level

        ymin = _golden_min(g, lo_b, hi_b)
        gmin = g(ymin)
        nonempty = gmin < 0
        if np.any(nonempty & ((g(lo_b) <= 0) | (g(hi_b) <= 0))):
            raise ValueError("section reaches the y bracket; widen y_bracket")
        lower = _bisect(g, ymin, lo_b, tol)
        upper = _bisect(g, ymin, hi_b, tol)
        length = np.where(nonempty, upper - lower, 0.0)
        with np.errstate(divide="ignore"):
            bk = np.where(length > 0, -np.log(np.where(length > 0, length, 1.0)), np.inf)
        return SectionResult(GridFn(x_axes, bk), lower, upper, "closed")

    _need_split(rho)
    if rho.split[1] != 1:
        raise NotImplementedError("grid-mode sections need one-dimensional fibres")
    y = rho.y_axes[0].nodes
    vals = rho.values - level
    flat = vals.reshape(-1, y.size)
    lower = np.full(flat.shape[0], np.nan)
    upper = np.full(flat.shape[0], np.nan)
    truncated = 0
    for i, row in enumerate(flat):
        inside = np.nonzero(row <= 0)[0]
        if inside.size == 0:
            continue
        j0, j1 = inside[0], inside[-1]
        if j1 - j0 + 1 != inside.size:
            raise ValueError("nonconvex fibre: sub-level set is not an interval")
        if j0 == 0 or j1 == y.size - 1:
            truncated += 1
        lower[i] = y[j0] if j0 == 0 else _cross(y[j0 - 1], y[j0], row[j0 - 1], row[j0])
        upper[i] = y[j1] if j1 == y.size - 1 else _cross(y[j1], y[j1 + 1], row[j1], row[j1 + 1])
    if truncated:
        warnings.warn(f"{truncated} sections touch the fibre grid edge", stacklevel=2)
    length = upper - lower
    with np.errstate(invalid="ignore", divide="ignore"):
        bk = np.where(np.isfinite(length) & (length > 0), -np.log(length), np.inf)
    shape = rho.shape[: rho.split[0]]
    return SectionResult(GridFn(rho.x_axes, bk.reshape(shape)), lower.reshape(shape), upper.reshape(shape), "grid")


def _cross(y0, y1, v0, v1):
    if not np.isfinite(v0):
        return y1
    if not np.isfinite(v1):
        return y0
    return y0 + (y1 - y0) * v0 / (v0 - v1)


# ---------------------------------------------------------------------------
# transport along one-dimensional fibres


def _need_line_fibres(psi: GridFn):
    _need_split(psi)
    if psi.split[1] != 1:
        raise NotImplementedError("transport needs one-dimensional fibres")
    if not np.all(psi.finite()):
        raise ValueError("transport needs a finite psi")


def _normalised_cdf(row: np.ndarray, y: np.ndarray) -> np.ndarray:
    dens = np.exp(-(row - row.min()))
    cdf = cumulative_trapezoid(dens, y, initial=0.0)
    if cdf[-1] <= 0:
        raise ValueError("zero-mass fibre")
    return cdf / cdf[-1]


def transport_map(psi: GridFn, x0, x) -> np.ndarray:
    """T(x, .) on the fibre grid, pushing the fibre law at ``x0`` onto the one at ``x``.

    Cumulative trapezoid sums inverted by linear interpolation; values clamp
    to the grid where the target law has no mass.
    """
    _need_line_fibres(psi)
    nx = psi.split[0]
    i0 = psi.index_of(np.atleast_1d(x0))[:nx] if np.ndim(x0) else psi.index_of([x0])
    i1 = psi.index_of(np.atleast_1d(x))[:nx] if np.ndim(x) else psi.index_of([x])
    y = psi.y_axes[0].nodes
    if i0 == i1:
        return y.copy()
    F0 = _normalised_cdf(psi.values[i0], y)
    F1 = _normalised_cdf(psi.values[i1], y)
    # increments below CDF_RESOLUTION carry no usable mass and make interp slopes overflow
    keep = np.concatenate([[True], np.diff(F1) > CDF_RESOLUTION])
    return np.interp(F0, F1[keep], y[keep])


def _x_gradient(values: np.ndarray, x_axes) -> np.ndarray:
    """d_x of values along each base axis, shape (*shape, n)."""
    grads = [np.gradient(values, a.step, axis=k, edge_order=2) for k, a in enumerate(x_axes)]
    return np.stack(grads, axis=-1)


def _velocity_all(psi: GridFn):
    """Gamma at every node, plus density, weights and d_x phi (one-dimensional fibres)."""
    y_axis = psi.y_axes[0]
    y = y_axis.nodes
    vals = psi.values
    shifted = vals - vals.min(axis=-1, keepdims=True)
    dens = np.exp(-shifted)
    dpsi = _x_gradient(vals, psi.x_axes)
    w = trapezoid_weights(y_axis)
    mass = np.sum(dens * w, axis=-1)
    dphi = np.sum((dens * w)[..., None] * dpsi, axis=-2) / mass[..., None]

    low0 = cumulative_trapezoid(dens, y, axis=-1, initial=0.0)
    low1 = cumulative_trapezoid(dens[..., None] * dpsi, y, axis=-2, initial=0.0)
    up0 = np.flip(cumulative_trapezoid(np.flip(dens, -1), -np.flip(y), axis=-1, initial=0.0), -1)
    up1 = np.flip(
        cumulative_trapezoid(np.flip(dens[..., None] * dpsi, -2), -np.flip(y), axis=-2, initial=0.0), -2
    )
    lower_form = low1 - dphi[..., None, :] * low0[..., None]
    upper_form = dphi[..., None, :] * up0[..., None] - up1
    use_low = (low0 <= up0)[..., None]
    core = dens / mass[..., None] >= CORE_DENSITY
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(use_low, lower_form, upper_form) / dens[..., None]
    gamma = np.where(core[..., None], gamma, 0.0)
    return gamma, dens, w, mass, dphi, core


def transport_velocity(psi: GridFn, x0) -> np.ndarray:
    """Gamma(x0, .) on the fibre grid, shape (n_y, n).

    Evaluated from the lower cumulative form below the fibre median and the
    upper form above it; set to 0 where the normalised density is below
    ``CORE_DENSITY``.
    """
    _need_line_fibres(psi)
    gamma, *_ = _velocity_all(psi)
    idx = psi.index_of(np.atleast_1d(x0))
    return gamma[idx]


def fiber_hessians(psi: GridFn, idx) -> np.ndarray:
    """Finite-difference Hessians of psi at (x_idx, y_j) for every fibre node j, shape (n_y, n+1, n+1)."""
    nx = psi.split[0]
    N = nx + 1
    v = psi.values
    h = psi.spacing
    ny = psi.shape[-1]
    out = np.zeros((ny, N, N))
    base = list(idx)

    def val(offsets, dy):
        sl = [base[k] + offsets[k] for k in range(nx)]
        jj = np.clip(np.arange(ny) + dy, 0, ny - 1)
        return v[tuple(sl)][jj]

    zero = [0] * nx
    for a in range(N):
        for b in range(a, N):
            def shift(k, s):
                off = list(zero)
                dy = 0
                if k < nx:
                    off[k] = s
                else:
                    dy = s
                return off, dy

            if a == b:
                op, dyp = shift(a, 1)
                om, dym = shift(a, -1)
                c = val(zero, 0)
                out[:, a, a] = (val(op, dyp) - 2 * c + val(om, dym)) / h[a] ** 2
            else:
                def combo(sa, sb):
                    oa, da = shift(a, sa)
                    ob, db = shift(b, sb)
                    return val([p + q for p, q in zip(oa, ob)], da + db)

                d = (combo(1, 1) - combo(1, -1) - combo(-1, 1) + combo(-1, -1)) / (4 * h[a] * h[b])
                out[:, a, b] = out[:, b, a] = d
    # one-sided rows at the fibre ends: copy the nearest interior row
    out[0] = out[1]
    out[-1] = out[-2]
    return out


@dataclass
class HessianDecomposition:
    lhs: np.ndarray
    rhs: np.ndarray
    transport_term: np.ndarray
    restriction_term: np.ndarray
    residual: float
    warnings: list = field(default_factory=list)


def _growth_warnings(psi: GridFn) -> list:
    y_axis = psi.y_axes[0]
    v = psi.values
    left = (v[..., 1] - v[..., 0]) / y_axis.step
    right = (v[..., -1] - v[..., -2]) / y_axis.step
    out = []
    if np.any(left >= 0) or np.any(right <= 0):
        out.append("fibre slopes do not point outward at the grid edges; growth hypothesis unverified")
    return out


def hessian_decomposition(psi: GridFn, x0) -> HessianDecomposition:
    """Both sides of the Hessian identity for the marginal at base node ``x0``."""
    _need_line_fibres(psi)
    nx = psi.split[0]
    idx = psi.index_of(np.atleast_1d(x0))
    for k, i in enumerate(idx):
        if i == 0 or i == psi.axes[k].count - 1:
            raise ValueError("x0 needs a full central stencil")
    notes = _growth_warnings(psi)
    phi = marginal_quiet(psi).phi
    from .verify import fd_hessian

    lhs = fd_hessian(phi, idx)
    gamma_all, dens_all, w, mass_all, _, core_all = _velocity_all(psi)
    gamma = gamma_all[idx]
    dens, mass, core = dens_all[idx], mass_all[idx], core_all[idx]
    y_step = psi.y_axes[0].step
    dgamma = np.gradient(gamma, y_step, axis=0)
    dgamma = np.where(core[:, None], dgamma, 0.0)
    prob = dens * w / mass
    transport = np.einsum("j,ja,jb->ab", prob, dgamma, dgamma)
    H = fiber_hessians(psi, idx)
    restricted = np.array([
        restrict_graph(BlockSym(nx, 1, 0.5 * (Hj + Hj.T)), g.reshape(1, nx)) if c else np.zeros((nx, nx))
        for Hj, g, c in zip(H, gamma, core)
    ])
    restriction = np.einsum("j,jab->ab", prob, restricted)
    rhs = transport + restriction
    return HessianDecomposition(lhs, rhs, transport, restriction, float(np.max(np.abs(lhs - rhs))), notes)


def hessian_decomposition_residual(psi: GridFn, x0) -> float:
    """Entrywise max |Hess phi - (transport term + restriction term)| at ``x0``."""
    res = hessian_decomposition(psi, x0)
    for note in res.warnings:
        warnings.warn(note, stacklevel=2)
    return res.residual


def marginal_quiet(psi: GridFn, weight: GridFn | None = None) -> MarginalResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return marginal(psi, weight)


# ---------------------------------------------------------------------------
# minimum principle


def fiber_minimum(psi: GridFn, refine: bool = True) -> GridFn:
    """inf over the fibre grid of psi(x, .).

    With ``refine`` and one-dimensional fibres, an interior discrete minimum
    is corrected by the vertex of the parabola through it and its two
    neighbours, which is exact for fibres that are quadratic in y.
    """
    _need_split(psi)
    nx, ny = psi.split
    vals = psi.values
    if not refine or ny != 1:
        return GridFn(psi.x_axes, np.min(vals, axis=tuple(range(nx, nx + ny))))
    j = np.argmin(vals, axis=-1)
    n = vals.shape[-1]
    jc = np.clip(j, 1, n - 2)
    take = lambda k: np.take_along_axis(vals, k[..., None], axis=-1)[..., 0]  # noqa: E731
    fm, f0, fp = take(jc - 1), take(jc), take(jc + 1)
    curv = fp - 2 * f0 + fm
    interior = (j == jc) & np.isfinite(fm) & np.isfinite(fp) & (curv > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(interior, (fp - fm) ** 2 / (8 * np.where(interior, curv, 1.0)), 0.0)
    return GridFn(psi.x_axes, take(j) - corr)


@dataclass
class MinPrincipleResult:
    minimum: GridFn
    p_values: tuple
    p_family: list
    sup_errors: list
    decreasing: bool


def p_family(psi: GridFn, p: float) -> GridFn:
    """-(1/p) log of the integral of exp(-p psi) against the normalised weight exp(-|y|^2) / Z.

    With a probability weight the L^p norms of exp(-psi) increase with p, so
    the family decreases to the fibre minimum over the grid.  The constant
    (log Z) / p does not affect F-subharmonicity.
    """
    mesh = np.meshgrid(*[a.nodes for a in psi.y_axes], indexing="ij")
    ysq = sum(m**2 for m in mesh)
    weight = GridFn(psi.y_axes, ysq)
    log_z = float(np.log(np.sum(np.exp(-ysq) * _fiber_weights(psi.y_axes))))
    scaled = GridFn(psi.axes, p * psi.values, psi.split)
    res = marginal_quiet(scaled, weight)
    return GridFn(psi.x_axes, (res.phi.values + log_z) / p)


def min_principle(psi: GridFn, p_values=(1.0, 4.0, 16.0, 64.0)) -> MinPrincipleResult:
    """Fibre minimum plus the L^p-approximation family converging to it."""
    mn = fiber_minimum(psi)
    fam, errs = [], []
    for p in p_values:
        fp = p_family(psi, p)
        fam.append(fp)
        errs.append(float(np.max(np.abs(fp.values - mn.values))))
    dec = all(b <= a for a, b in zip(errs, errs[1:]))
    return MinPrincipleResult(mn, tuple(p_values), fam, errs, dec)
