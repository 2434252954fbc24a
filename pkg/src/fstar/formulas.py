"""Named closed-form inputs for scenarios.

Every formula takes a plain parameter dict (as read from a JSON config) and
returns numpy-level objects: vectorised callables, GridFns or boundary
families.  Random formulas draw from a ``numpy.random.Generator`` passed in
by the caller so that the scenario seed controls them.
"""
from __future__ import annotations

import math

import numpy as np

from .blockprod import BlockSym, pseudo_inverse
from .convex import ConvexBody
from .grid import Axis, GridFn
from .harmonic import Domain
from .interpolate import BoundaryBodyFamily, BoundaryFunctionFamily

# formula id -> kind of object it produces
FORMULAS = {
    "quad8": "psi",
    "gauss_shift": "psi",
    "quadratic": "psi",
    "random_quadratic": "psi suite",
    "convex_1d": "function suite",
    "indicator_family": "body family",
    "cos_interval_family": "body family",
    "quad_family": "function family",
    "custom_csv": "table",
}


# ---------------------------------------------------------------------------
# psi(x, y) formulas


def quad8(lam=1.0, mu=1.0, tau=0.0, a=0.0, b=0.0):
    """psi = lam x1^2 + mu x2^2 + 2 tau x1 x2 + 2 (a x1 + b x2) y + y^2."""

    def psi(x1, x2, y):
        return lam * x1**2 + mu * x2**2 + 2 * tau * x1 * x2 + 2 * (a * x1 + b * x2) * y + y**2

    return psi


def quad8_W(x1, x2, lam=1.0, mu=1.0, tau=0.0, a=0.0, b=0.0, kappa=1.0):
    """Discriminant of the section {psi <= kappa}; the section has length 2 sqrt(W)."""
    return (a * x1 + b * x2) ** 2 - (lam * x1**2 + mu * x2**2 + 2 * tau * x1 * x2 - kappa)


def quad8_bk(x1, x2, lam=1.0, mu=1.0, tau=0.0, a=0.0, b=0.0, kappa=1.0):
    """Closed-form -log length of the section: -log 2 - log(W) / 2, +inf where W <= 0."""
    W = quad8_W(x1, x2, lam, mu, tau, a, b, kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(W > 0, -math.log(2.0) - 0.5 * np.log(np.where(W > 0, W, 1.0)), np.inf)


def quad8_laplacian(x1, x2, lam=1.0, mu=1.0, tau=0.0, a=0.0, b=0.0, kappa=1.0):
    """Exact Laplacian of the closed-form B_K (differentiated symbolically)."""
    W = quad8_W(x1, x2, lam, mu, tau, a, b, kappa)
    s = a * x1 + b * x2
    w1 = 2 * a * s - 2 * (lam * x1 + tau * x2)
    w2 = 2 * b * s - 2 * (mu * x2 + tau * x1)
    lap_w = 2 * (a * a + b * b) - 2 * (lam + mu)
    return -0.5 * (lap_w / W - (w1**2 + w2**2) / W**2)


def gauss_shift(n=1, weight=1.0, shift="sin", slope=None):
    """psi = weight |x|^2 + (y - s(x))^2 with s(x) = sin(x1) or slope . x."""
    if shift not in ("sin", "linear"):
        raise ValueError(f"unknown shift {shift!r}")
    v = np.zeros(n) if slope is None else np.asarray(slope, dtype=float)

    def psi(*z):
        x, y = z[:-1], z[-1]
        s = np.sin(x[0]) if shift == "sin" else sum(c * xi for c, xi in zip(v, x))
        return weight * sum(xi**2 for xi in x) + (y - s) ** 2

    return psi


def quadratic(A: BlockSym):
    """psi(z) = z^T A z / 2 for a block matrix over (x; y)."""
    M = A.A

    def psi(*z):
        Z = np.stack(np.broadcast_arrays(*z))
        return 0.5 * np.einsum("i...,ij,j...->...", Z, M, Z)

    return psi


def random_quadratic(rng: np.random.Generator, kind: str = "trace", n: int = 2) -> BlockSym:
    """Quadratic on (x in R^n, y in R) whose Hessian lies in F * P with room to spare.

    The fibre entry D is in [0.5, 2]; the Schur complement S = B - C C^T / D
    has trace >= 0.05 (kind "trace", S indefinite in general) or is positive
    definite (kind "pos").
    """
    D = rng.uniform(0.5, 2.0)
    C = rng.uniform(-1.0, 1.0, size=(n, 1))
    if kind == "trace":
        e = rng.uniform(-1.0, 1.0, size=n - 1)
        ev = np.append(e, -e.sum() + rng.uniform(0.05, 1.0))
    elif kind == "pos":
        ev = rng.uniform(0.05, 1.0, size=n)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    S = (Q * ev) @ Q.T
    B = S + C @ C.T / D
    return BlockSym.from_blocks(B, C, np.array([[D]]))


def random_block(rng: np.random.Generator, max_dim: int = 4) -> BlockSym:
    """Block matrix with n, m <= max_dim, well separated fibre spectrum and mixed membership.

    Fibre eigenvalues are 0 or in [0.25, 2] so that any violating slope has
    moderate size; C lies in range(D) with probability 0.6.
    """
    n = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(1, max_dim + 1))
    lam = rng.uniform(0.25, 2.0, size=m) * (rng.random(m) > 0.25)
    Q = np.linalg.qr(rng.normal(size=(m, m)))[0]
    D = (Q * lam) @ Q.T
    D = 0.5 * (D + D.T)
    C = rng.normal(size=(n, m))
    if rng.random() < 0.6:
        C = C @ (Q * (lam > 0)) @ Q.T
    g = rng.normal(size=(n, n)) * 0.5
    S = 0.5 * (g + g.T) + rng.uniform(-1.0, 1.5) * np.eye(n)
    B = C @ pseudo_inverse(D) @ C.T + S
    return BlockSym.from_blocks(0.5 * (B + B.T), C, D)


def convex_1d(rng: np.random.Generator):
    """Random convex function of one variable: quadratic + kink + linear + exponential."""
    a, b = rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0)
    c, s = rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)

    def f(y):
        return a * y**2 + b * np.abs(y - s) + c * y + 0.3 * np.exp(0.5 * y)

    return f


# ---------------------------------------------------------------------------
# boundary families


def _ellipse_at(theta, a, b, turn, center, wobble, n_dir):
    c = np.asarray(center, dtype=float) + wobble * np.array([math.cos(theta), math.sin(2 * theta)])
    return ConvexBody.ellipse(a, b, turn * theta, c, n_dir)


def indicator_family(domain: Domain, bodies=None, ellipse=None, n_dir: int = 256) -> BoundaryBodyFamily:
    """Body family: explicit intervals per node (interval domain) or a rotating ellipse (disk).

    ``ellipse`` holds {a, b, turn, center, wobble}: the body at angle theta is
    the ellipse with semi-axes a, b rotated by turn * theta (turn a multiple of
    1/2 keeps the family continuous) and centred at center + wobble (cos theta, sin 2 theta).
    """
    if bodies is not None:
        out = [ConvexBody.interval(float(lo), float(hi)) for lo, hi in bodies]
        return BoundaryBodyFamily(domain, out)
    if ellipse is None or domain.kind != "disk":
        raise ValueError("disk families need an 'ellipse' spec; interval families need 'bodies'")
    e = {"turn": 0.0, "center": (0.0, 0.0), "wobble": 0.0, **ellipse}
    if abs(2 * e["turn"] - round(2 * e["turn"])) > 1e-12:
        raise ValueError("turn must be a multiple of 1/2 for a continuous family")
    th = domain.boundary_angles
    return BoundaryBodyFamily(
        domain, [_ellipse_at(t, e["a"], e["b"], e["turn"], e["center"], e["wobble"], n_dir) for t in th]
    )


def cos_interval_family(domain: Domain, amplitude: float = 1.0, half_width: float = 0.5) -> BoundaryBodyFamily:
    """Intervals [amplitude cos theta - half_width, amplitude cos theta + half_width] on the disk."""
    if domain.kind != "disk":
        raise ValueError("cos_interval_family lives on a disk")
    c = amplitude * np.cos(domain.boundary_angles)
    return BoundaryBodyFamily(domain, [ConvexBody.interval(v - half_width, v + half_width) for v in c])


def cos_interval_exact(x1, amplitude: float = 1.0, half_width: float = 0.5):
    """Harmonic extension of the cosine family: [amplitude x1 - w, amplitude x1 + w]."""
    return amplitude * x1 - half_width, amplitude * x1 + half_width


def quad_family(domain: Domain, y_axes, curvature=(1.5, 0.5), linear=1.0, endpoints=None) -> BoundaryFunctionFamily:
    """phi_theta(y) = c(theta) y^2 / 2 + l(theta) y on one y-axis.

    Disk: c = curvature[0] + curvature[1] sin theta, l = linear cos theta.
    Interval: ``endpoints`` = [[c0, l0], [c1, l1]].
    """
    if domain.kind == "interval":
        if endpoints is None:
            raise ValueError("interval quad families need 'endpoints'")
        coef = np.asarray(endpoints, dtype=float)
    else:
        th = domain.boundary_angles
        coef = np.stack([curvature[0] + curvature[1] * np.sin(th), linear * np.cos(th)], axis=1)
    if np.any(coef[:, 0] <= 0):
        raise ValueError("curvatures must be positive")
    return BoundaryFunctionFamily.from_function(
        domain, y_axes, lambda i, p, y: 0.5 * coef[i, 0] * y**2 + coef[i, 1] * y
    )


def quad_family_dual(domain: Domain, x, u, curvature=(1.5, 0.5), linear=1.0):
    """Exact Phi*(x, u) of the disk quad family: harmonic extension of (u - l)^2 / (2 c)."""
    if domain.kind != "disk":
        raise ValueError("closed form implemented for the disk")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    th = domain.boundary_angles
    c = curvature[0] + curvature[1] * np.sin(th)
    l = linear * np.cos(th)
    from .harmonic import harmonic_weights

    W = harmonic_weights(domain, x, closed=True)
    # (u - l)^2 / (2c) = u^2/(2c) - u l / c + l^2/(2c), each term integrated separately
    terms = np.stack([0.5 / c, -l / c, 0.5 * l**2 / c], axis=1)
    coeffs = W @ terms
    u = np.asarray(u, dtype=float)
    return coeffs[:, :1] * u**2 + coeffs[:, 1:2] * u + coeffs[:, 2:3]


def indicator_function_family(family: BoundaryBodyFamily, y_axes) -> BoundaryFunctionFamily:
    """Indicator functions (0 on the body, +inf off it) of a one-dimensional body family."""
    y = Axis(*y_axes[0]).nodes if not isinstance(y_axes[0], Axis) else y_axes[0].nodes
    rows = []
    for body in family.bodies:
        inside = (y >= body.lo - 1e-12) & (y <= body.hi + 1e-12)
        rows.append(np.where(inside, 0.0, np.inf))
    return BoundaryFunctionFamily(family.domain, y_axes, np.array(rows))


# ---------------------------------------------------------------------------
# CSV inputs


def read_family_csv(path, domain: Domain) -> BoundaryFunctionFamily:
    """Family from a CSV with columns node, y1[, y2], value (header row mandatory)."""
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array([[float(c) for c in r] for r in rows[1:]])
    m = body.shape[1] - 2
    axes = []
    for k in range(m):
        u = np.unique(body[:, 1 + k])
        axes.append(Axis(float(u[0]), float(u[-1]), len(u)))
    nodes = np.unique(body[:, 0]).astype(int)
    shape = (nodes.size,) + tuple(a.count for a in axes)
    values = np.full(shape, np.nan)
    idx = [np.searchsorted(nodes, body[:, 0].astype(int))]
    idx += [np.rint((body[:, 1 + k] - axes[k].lo) / axes[k].step).astype(int) for k in range(m)]
    values[tuple(idx)] = body[:, -1]
    if np.any(np.isnan(values)):
        raise ValueError("family CSV does not cover every (node, y) pair")
    return BoundaryFunctionFamily(domain, tuple(axes), values)


def read_psi_csv(path, split) -> GridFn:
    return GridFn.read_csv(path, tuple(split))
