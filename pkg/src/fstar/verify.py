"""Discrete checks of F-subharmonicity, convexity and product subharmonicity.

Hessians are central second differences (mixed terms by the 4-point cross
stencil), exact on quadratics.  A node is checked only when its whole 3^k
stencil is finite; the others are counted as excluded.  Tolerances are
relative: a check passes when its worst margin is >= -tol * scale.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .blockprod import product_margin, pseudo_inverse
from .cones import DirichletSet, signed_margin
from .convex import mollify
from .grid import GridFn


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    threshold: float
    witness: tuple | None = None
    checked: int = 0
    excluded: int = 0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.worst_margin >= -self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = None if self.witness is None else [int(i) for i in self.witness]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst margin {self.worst_margin:.6g} (threshold -{self.threshold:.3g}) at {self.witness}"


def _combine(name: str, parts: list[CheckReport], threshold: float) -> CheckReport:
    worst = min(parts, key=lambda r: r.worst_margin)
    rep = CheckReport(
        name, True, worst.worst_margin, threshold, worst.witness,
        sum(p.checked for p in parts), sum(p.excluded for p in parts),
        {p.name: p.to_dict() for p in parts},
    )
    rep.passed = all(p.passed for p in parts)
    return rep


# ---------------------------------------------------------------------------
# finite differences


def fd_hessians(values: np.ndarray, spacing, dims=None) -> tuple[np.ndarray, np.ndarray]:
    """Hessians in the variables ``dims`` at every node, shape (*values.shape, k, k).

    Returns (H, valid) where ``valid`` marks nodes whose full stencil is
    finite and inside the grid.  Invalid entries of H are NaN.
    """
    v = np.asarray(values, dtype=float)
    dims = tuple(range(v.ndim)) if dims is None else tuple(dims)
    h = np.asarray(spacing, dtype=float)
    pad = [(1, 1) if k in dims else (0, 0) for k in range(v.ndim)]
    vp = np.pad(v, pad, constant_values=np.nan)
    shape = v.shape

    def at(offsets):
        sl = []
        for k, n in enumerate(shape):
            o = offsets.get(k, 0)
            start = (1 + o) if k in dims else 0
            sl.append(slice(start, start + n))
        return vp[tuple(sl)]

    k = len(dims)
    H = np.empty(shape + (k, k))
    valid = np.isfinite(v)
    with np.errstate(invalid="ignore"):
        _fill_hessians(H, valid, v, at, dims, h)
        H = np.where(valid[..., None, None], H, np.nan)
    return H, valid


def _fill_hessians(H, valid, v, at, dims, h):
    k = len(dims)
    for a in range(k):
        da = dims[a]
        for s in (-1, 1):
            valid &= np.isfinite(at({da: s}))
        H[..., a, a] = (at({da: 1}) - 2 * v + at({da: -1})) / h[da] ** 2
        for b in range(a + 1, k):
            db = dims[b]
            corners = {}
            for sa, sb in itertools.product((-1, 1), repeat=2):
                c = at({da: sa, db: sb})
                valid &= np.isfinite(c)
                corners[sa, sb] = c
            mixed = (corners[1, 1] - corners[1, -1] - corners[-1, 1] + corners[-1, -1]) / (4 * h[da] * h[db])
            H[..., a, b] = H[..., b, a] = mixed


def fd_hessian(f: GridFn, node) -> np.ndarray:
    """Central-difference Hessian of ``f`` at grid index ``node``."""
    node = tuple(int(i) for i in node)
    for i, a in zip(node, f.axes):
        if i < 1 or i > a.count - 2:
            raise ValueError("stencil exits the grid")
    patch = f.values[tuple(slice(i - 1, i + 2) for i in node)]
    H, valid = fd_hessians(patch, f.spacing)
    centre = (1,) * f.ndim
    if not valid[centre]:
        raise ValueError("stencil meets non-finite values")
    return H[centre]


def discrete_laplacian(f: GridFn) -> np.ndarray:
    """5-point (2n+1-point) Laplacian at every node; NaN where the stencil is incomplete."""
    H, valid = fd_hessians(f.values, f.spacing)
    return np.where(valid, np.trace(H, axis1=-2, axis2=-1), np.nan)


def _scale(values: np.ndarray, spacing) -> float:
    fin = values[np.isfinite(values)]
    sup = float(np.max(np.abs(fin))) if fin.size else 0.0
    return max(1.0, sup / float(np.min(spacing)) ** 2)


def _worst(margins: np.ndarray, valid: np.ndarray):
    if not np.any(valid):
        return np.inf, None
    m = np.where(valid, margins, np.inf)
    flat = int(np.argmin(m))
    return float(m.flat[flat]), tuple(int(i) for i in np.unravel_index(flat, m.shape))


# ---------------------------------------------------------------------------
# checks


def is_F_subharmonic(f: GridFn, F: DirichletSet, tol: float = 1e-6, eps: float | None = None,
                     scale: float | None = None) -> CheckReport:
    """Classify the fd Hessian at every full-stencil node under F.

    With ``eps`` the function is mollified first.  scale = max(1, |f|_inf / h^2)
    unless given, e.g. when f is one slice of a larger family.
    """
    if not np.any(f.finite()):
        raise ValueError("all-infinite input")
    if F.dim != f.ndim:
        raise ValueError(f"F acts on {F.dim}x{F.dim} matrices but f has {f.ndim} variables")
    g = mollify(f, eps) if eps else f
    H, valid = fd_hessians(g.values, g.spacing)
    margins = np.full(g.shape, np.inf)
    if np.any(valid):
        margins[valid] = signed_margin(F, H[valid])
    worst, witness = _worst(margins, valid)
    scale = _scale(g.values, g.spacing) if scale is None else float(scale)
    excluded = int(np.sum(np.isfinite(g.values)) - np.sum(valid))
    return CheckReport("F-subharmonic", True, worst, tol * scale, witness, int(valid.sum()), excluded,
                       {"scale": scale})


def _line_directions(k: int, dims) -> list[dict]:
    """Axis and pairwise-diagonal index directions within ``dims``."""
    out = [{d: 1} for d in dims]
    for a, b in itertools.combinations(dims, 2):
        out.append({a: 1, b: 1})
        out.append({a: 1, b: -1})
    return out


def _second_differences(v: np.ndarray, direction: dict):
    pad = [(1, 1) if k in direction else (0, 0) for k in range(v.ndim)]
    vp = np.pad(v, pad, constant_values=np.nan)

    def at(sign):
        sl = []
        for k, n in enumerate(v.shape):
            if k in direction:
                s = 1 + sign * direction[k]
                sl.append(slice(s, s + n))
            else:
                sl.append(slice(0, n))
        return vp[tuple(sl)]

    plus, minus = at(1), at(-1)
    valid = np.isfinite(plus) & np.isfinite(minus) & np.isfinite(v)
    with np.errstate(invalid="ignore"):
        d2 = np.where(valid, plus - 2 * v + minus, np.nan)
    return d2, valid, plus, minus


def _gaps(v: np.ndarray, direction: dict) -> int:
    """Nodes that are +inf while both line neighbours are finite (a hole in the finite region)."""
    _, _, plus, minus = _second_differences(v, direction)
    hole = ~np.isfinite(v) & np.isfinite(plus) & np.isfinite(minus)
    return int(hole.sum())


def _run_breaks(v: np.ndarray, dims) -> int:
    """Count lines (along each axis in ``dims``) whose finite nodes are not contiguous."""
    fin = np.isfinite(v)
    breaks = 0
    for d in dims:
        f = np.moveaxis(fin, d, -1)
        starts = np.sum(np.diff(f.astype(np.int8), axis=-1) == 1, axis=-1) + f[..., 0]
        breaks += int(np.sum(starts > 1))
    return breaks


def is_convex(f: GridFn, tol: float = 1e-9, dims=None) -> CheckReport:
    """Axis and diagonal divided second differences >= -tol * scale on the finite region.

    The finite region must be contiguous along every axis line and free of
    one-node holes along diagonals.  ``dims`` restricts the check to a subset
    of variables (the others index independent slices).
    """
    dims = tuple(range(f.ndim)) if dims is None else tuple(dims)
    return _convexity(f.values, f.spacing, dims, tol, "convex")


def _convexity(v: np.ndarray, spacing, dims, tol: float, name: str) -> CheckReport:
    h = np.asarray(spacing, dtype=float)
    scale = _scale(v, h[list(dims)])
    worst, witness, checked = np.inf, None, np.zeros(v.shape, dtype=bool)
    directions = _line_directions(v.ndim, dims)
    for direction in directions:
        d2, valid, _, _ = _second_differences(v, direction)
        length2 = sum(h[k] ** 2 for k in direction)
        checked |= valid
        w, wit = _worst(d2 / length2, valid)
        if w < worst:
            worst, witness = w, wit
    holes = _run_breaks(v, dims) + sum(_gaps(v, d) for d in directions[len(dims):])
    if holes:
        worst = -np.inf
    elif worst == np.inf:
        worst = 0.0
    excluded = int(np.sum(np.isfinite(v)) - np.sum(checked))
    return CheckReport(name, True, worst, tol * scale, witness, int(checked.sum()), excluded,
                       {"scale": scale, "region_breaks": holes})


def _snap(gamma: np.ndarray, hx, hy) -> np.ndarray:
    """Round slope entries so that one x-step moves an integer number of y-steps."""
    ratio = np.asarray(hy)[:, None] / np.asarray(hx)[None, :]
    return np.round(gamma / ratio) * ratio


def default_slopes(psi: GridFn, n_random: int = 8, seed: int = 0, scales=(0.25, 1.0, 4.0)) -> list[np.ndarray]:
    """Zero, signed axis slopes at each scale times (y-range / x-range), and seeded random slopes."""
    nx, ny = psi.split
    xr = np.array([a.hi - a.lo for a in psi.x_axes])
    yr = np.array([a.hi - a.lo for a in psi.y_axes])
    unit = yr[:, None] / xr[None, :]
    out = [np.zeros((ny, nx))]
    for s in scales:
        for i in range(ny):
            for j in range(nx):
                for sign in (1.0, -1.0):
                    g = np.zeros((ny, nx))
                    g[i, j] = sign * s * unit[i, j]
                    out.append(g)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        out.append(rng.uniform(-1, 1, size=(ny, nx)) * unit)
    return out


def restrict_to_graphs(psi: GridFn, gamma: np.ndarray) -> np.ndarray:
    """Values of psi(x, y0 + Gamma (x - x_c)) for every base node x and fibre node y0.

    Multilinear interpolation in y; nodes whose graph point leaves the fibre
    grid are +inf.  Shape equals psi.shape, indexed by (x, y0).
    """
    nx, ny = psi.split
    xc = np.array([0.5 * (a.lo + a.hi) for a in psi.x_axes])
    hy = np.array([a.step for a in psi.y_axes])
    idx = np.indices(psi.shape, dtype=float)
    xmesh = [a.lo + idx[k] * a.step for k, a in enumerate(psi.x_axes)]
    coords = [idx[k] for k in range(nx)]
    for i in range(ny):
        shift = sum(gamma[i, j] * (xmesh[j] - xc[j]) for j in range(nx)) / hy[i]
        c = idx[nx + i] + shift
        rc = np.round(c)
        c = np.where(np.abs(c - rc) < 1e-9, rc, c)
        coords.append(c)
    vals = np.where(np.isfinite(psi.values), psi.values, np.nan)
    out = ndimage.map_coordinates(vals, coords, order=1, mode="constant", cval=np.nan)
    outside = np.zeros(psi.shape, dtype=bool)
    for i in range(ny):
        c = coords[nx + i]
        outside |= (c < -1e-9) | (c > psi.shape[nx + i] - 1 + 1e-9)
    return np.where(outside | np.isnan(out), np.inf, out)


def _critical_slopes(H: np.ndarray, valid: np.ndarray, margins: np.ndarray, nx: int) -> list[np.ndarray]:
    """-D^+ C^T at the worst full-Hessian node and at the median node."""
    if not np.any(valid):
        return []
    flat_valid = np.flatnonzero(valid)
    order = flat_valid[np.argsort(margins.flat[flat_valid])]
    picks = {int(order[0]), int(order[len(order) // 2])}
    out = []
    for p in sorted(picks):
        Hp = H.reshape(-1, *H.shape[-2:])[p]
        C, D = Hp[:nx, nx:], Hp[nx:, nx:]
        out.append(-pseudo_inverse(D) @ C.T)
    return out


def is_product_subharmonic(
    psi: GridFn,
    F: DirichletSet,
    gammas=None,
    tol: float = 1e-6,
    n_random: int = 8,
    seed: int = 0,
    snap: bool = True,
    full_hessian: bool = True,
) -> CheckReport:
    """Slice test for F * P: convex fibres, F-subharmonic graph restrictions, full-Hessian cross-check.

    Slopes default to :func:`default_slopes` plus the critical slopes
    -D^+ C^T read off the fd Hessians.  In the full-Hessian route fibre
    curvatures below the pass threshold count as zero.  With ``snap`` every slope is rounded
    so graphs pass through grid nodes and the interpolation is exact.
    ``full_hessian=False`` keeps only the two slice routes, which is the right
    test for piecewise-smooth inputs such as discrete sup-convolutions.
    """
    if not psi.split:
        raise ValueError("psi needs a (base; fibre) split")
    nx, ny = psi.split
    if F.dim != nx:
        raise ValueError("F dimension must equal the number of base variables")
    spacing = psi.spacing
    scale = _scale(psi.values, spacing)
    threshold = tol * scale

    fib = _convexity(psi.values, spacing, tuple(range(nx, nx + ny)), tol, "fibre convexity")
    fib.threshold = threshold
    fib.passed = fib.worst_margin >= -threshold

    H, valid = fd_hessians(psi.values, spacing)
    margins = np.full(psi.shape, np.inf)
    if F.is_convex:
        if np.any(valid):
            margins[valid] = product_margin(F, H[valid], nx, abs_tol=threshold)
        w, wit = _worst(margins, valid)
        full = CheckReport("full Hessian", True, w if np.isfinite(w) else 0.0, threshold, wit,
                           int(valid.sum()), int(np.sum(psi.finite()) - valid.sum()))
    else:
        full = CheckReport("full Hessian", True, 0.0, threshold, details={"note": "skipped for nonconvex F"})

    slopes = list(default_slopes(psi, n_random, seed) if gammas is None else gammas)
    if gammas is None:
        slopes += _critical_slopes(H, valid, margins, nx)
    hx = spacing[:nx]
    hy = spacing[nx:]
    worst, witness, worst_gamma = np.inf, None, None
    checked = skipped = 0
    x_dims = tuple(range(nx))
    for g in slopes:
        g = np.asarray(g, dtype=float).reshape(ny, nx)
        if snap:
            g = _snap(g, hx, hy)
        r = restrict_to_graphs(psi, g)
        Hr, vr = fd_hessians(r, spacing, dims=x_dims)
        if not np.any(vr):
            skipped += 1
            continue
        m = signed_margin(F, Hr[vr])
        checked += int(vr.sum())
        k = int(np.argmin(m))
        if m[k] < worst:
            worst = float(m[k])
            witness = tuple(int(c[k]) for c in np.nonzero(vr))
            worst_gamma = g.tolist()
    graphs = CheckReport("graph restrictions", True, worst if np.isfinite(worst) else 0.0, threshold, witness,
                         checked, 0, {"slopes": len(slopes), "skipped_slopes": skipped, "worst_slope": worst_gamma})

    parts = [fib, graphs, full] if full_hessian else [fib, graphs]
    rep = _combine("product-subharmonic", parts, threshold)
    rep.details["scale"] = scale
    return rep


# ---------------------------------------------------------------------------
# structural properties


def random_subharmonic(F: DirichletSet, axes, rng: np.random.Generator) -> GridFn:
    """A random F-subharmonic function on a planar grid (F a PosCone or TraceCone).

    PosCone: psd quadratic plus a convex kink.  TraceCone: quadratic with
    nonnegative trace plus the real part of a random cubic polynomial in x1 + i x2.
    """
    if F.dim != 2 or F.kind not in ("pos", "trace"):
        raise NotImplementedError("random samples exist for planar PosCone and TraceCone")
    g = rng.normal(size=(2, 2))
    Q = g @ g.T
    if F.kind == "trace":
        # indefinite, trace kept at a tenth of the psd draw
        Q = Q - 0.45 * np.trace(Q) * np.eye(2)
        Q[0, 1] = Q[1, 0] = rng.normal()
    c = rng.normal(size=2)
    v = rng.normal(size=2)
    k0 = rng.normal()
    coeff = rng.normal(size=2) + 1j * rng.normal(size=2)

    def f(x1, x2):
        out = 0.5 * (Q[0, 0] * x1**2 + 2 * Q[0, 1] * x1 * x2 + Q[1, 1] * x2**2) + c[0] * x1 + c[1] * x2
        out = out + 0.5 * np.abs(v[0] * x1 + v[1] * x2 - 0.3 * k0)
        if F.kind == "trace":
            z = x1 + 1j * x2
            out = out + np.real(coeff[0] * z**2 + coeff[1] * z**3) / 3
        return out

    return GridFn.from_function(axes, f)


def _passes(f: GridFn, F: DirichletSet, tol: float) -> CheckReport:
    return is_convex(f, tol) if F.kind == "pos" else is_F_subharmonic(f, F, tol)


def structural_suite(F: DirichletSet, n_pairs: int = 50, seed: int = 0, count: int = 33, tol: float = 1e-6) -> dict:
    """Maximum property, convex combinations and decreasing limits on seeded random pairs.

    Returns {property name: CheckReport}; each report's worst margin is the
    minimum over all pairs, and ``details["inputs_failed"]`` counts pairs whose
    inputs did not pass (which would make the property vacuous).
    """
    from .grid import Axis

    rng = np.random.default_rng(seed)
    axes = (Axis(-1.0, 1.0, count), Axis(-1.0, 1.0, count))
    sq = GridFn.from_function(axes, lambda x1, x2: x1**2 + x2**2)
    worst = {"maximum": np.inf, "convex combination": np.inf, "decreasing limit": np.inf}
    thresholds = dict.fromkeys(worst, 0.0)
    inputs_failed = 0
    for _ in range(n_pairs):
        f, g = random_subharmonic(F, axes, rng), random_subharmonic(F, axes, rng)
        if not (_passes(f, F, tol).passed and _passes(g, F, tol).passed):
            inputs_failed += 1
        t = rng.uniform()
        top = f.with_values(np.maximum(f.values, g.values))
        cases = {
            "maximum": top,
            "convex combination": f.with_values(t * f.values + (1 - t) * g.values),
        }
        for name, h in cases.items():
            rep = _passes(h, F, tol)
            worst[name] = min(worst[name], rep.worst_margin)
            thresholds[name] = max(thresholds[name], rep.threshold)
        # max(f, g) + |x|^2 / k decreases to max(f, g); every term passes, so must the limit
        seq = [_passes(top.with_values(top.values + sq.values / k), F, tol) for k in (1, 4, 16, 64)]
        limit = _passes(top, F, tol)
        if all(r.passed for r in seq):
            worst["decreasing limit"] = min(worst["decreasing limit"], limit.worst_margin)
            thresholds["decreasing limit"] = max(thresholds["decreasing limit"], limit.threshold)
        else:
            inputs_failed += 1
    out = {}
    for name in worst:
        rep = CheckReport(name, True, float(worst[name]), thresholds[name], checked=n_pairs,
                          details={"inputs_failed": inputs_failed})
        rep.passed = rep.passed and inputs_failed == 0
        out[name] = rep
    return out
