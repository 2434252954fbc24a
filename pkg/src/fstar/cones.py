"""Dirichlet sets in the space of symmetric matrices.

A Dirichlet set F is closed, proper, nonempty and stable under adding
positive semidefinite matrices.  Four finitely presented kinds are supported:

``pos``         the positive semidefinite cone
``trace``       {A : tr A >= 0}, whose subharmonic functions are the classical ones
``halfspaces``  finite intersections {A : tr(U_i A) >= c_i} with U_i psd, nonzero
``eigen``       {A : eig(A) in E} for a permutation-invariant, upward-closed
                polyhedron E = {x : w_i . x_sigma >= c_i for all sigma}

Every query goes through :func:`signed_margin`, a scalar that is >= 0 exactly
on F and > 0 exactly on its interior.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SYM_TOL = 1e-12


class Classification(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"

    @property
    def is_member(self) -> bool:
        return self is not Classification.EXTERIOR


def classify(margin: float, band: float = 0.0) -> Classification:
    """Three-valued reading of a signed margin with boundary band ``band``."""
    if margin > band:
        return Classification.INTERIOR
    if margin < -band:
        return Classification.EXTERIOR
    return Classification.BOUNDARY


def as_sym(a, dim: int | None = None) -> np.ndarray:
    """Validate and return ``a`` as a float symmetric matrix."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {a.shape[0]}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_TOL * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def random_sym(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (g + g.T)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    k = n if rank is None else rank
    g = rng.normal(size=(n, k))
    return g @ g.T


@dataclass(frozen=True)
class DirichletSet:
    """A finitely presented Dirichlet set in Sym^2(R^dim).

    ``halfspaces`` holds pairs ``(U, c)`` meaning tr(U A) >= c.
    ``functionals`` holds pairs ``(w, c)`` meaning min_sigma w . lambda_sigma >= c,
    where lambda is the eigenvalue vector of A; w must be entrywise >= 0.
    """

    dim: int
    kind: str
    halfspaces: tuple = field(default=(), compare=False)
    functionals: tuple = field(default=(), compare=False)
    is_convex: bool = True
    is_cone: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind not in ("pos", "trace", "halfspaces", "eigen"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "halfspaces":
            if not self.halfspaces:
                raise ValueError("empty half-space list")
            for u, _ in self.halfspaces:
                if u.shape != (self.dim, self.dim):
                    raise ValueError("half-space normal has wrong shape")
                if np.linalg.eigvalsh(u)[0] < -1e-10 * max(1.0, np.abs(u).max()):
                    raise ValueError("half-space normals must be positive semidefinite")
                if not np.any(u):
                    raise ValueError("half-space normals must be nonzero")
        if self.kind == "eigen":
            if not self.functionals:
                raise ValueError("empty functional list")
            for w, _ in self.functionals:
                if w.shape != (self.dim,):
                    raise ValueError("functional has wrong length")
                if np.any(w < 0) or not np.any(w):
                    raise ValueError("eigenvalue functionals must be nonnegative and nonzero")

    def __eq__(self, other):
        if not isinstance(other, DirichletSet):
            return NotImplemented
        if (self.dim, self.kind, self.is_convex, self.is_cone) != (
            other.dim, other.kind, other.is_convex, other.is_cone
        ):
            return False
        pairs = (self.halfspaces, other.halfspaces), (self.functionals, other.functionals)
        for mine, theirs in pairs:
            if len(mine) != len(theirs):
                return False
            for (a, c), (b, d) in zip(mine, theirs):
                if c != d or not np.array_equal(a, b):
                    return False
        return True

    __hash__ = None

    def __repr__(self):
        extra = ""
        if self.kind == "halfspaces":
            extra = f", {len(self.halfspaces)} half-spaces"
        elif self.kind == "eigen":
            extra = f", {len(self.functionals)} functionals"
        return f"DirichletSet({self.kind}, dim={self.dim}{extra})"

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "kind": self.kind,
            "halfspaces": [{"U": u.tolist(), "c": float(c)} for u, c in self.halfspaces],
            "functionals": [{"w": w.tolist(), "c": float(c)} for w, c in self.functionals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DirichletSet":
        dim, kind = int(d["dim"]), d["kind"]
        if kind == "pos":
            return pos_cone(dim)
        if kind == "trace":
            return trace_cone(dim)
        if kind == "halfspaces":
            return half_spaces(dim, [(h["U"], h["c"]) for h in d.get("halfspaces", [])])
        if kind == "eigen":
            return eigen_cone(dim, [(f["w"], f["c"]) for f in d.get("functionals", [])])
        raise ValueError(f"unknown kind {kind!r}")


def pos_cone(n: int) -> DirichletSet:
    return DirichletSet(n, "pos")


def trace_cone(n: int) -> DirichletSet:
    return DirichletSet(n, "trace")


def half_spaces(n: int, pairs) -> DirichletSet:
    hs = tuple((as_sym(u, n), float(c)) for u, c in pairs)
    return DirichletSet(n, "halfspaces", halfspaces=hs, is_cone=all(c == 0 for _, c in hs))


def eigen_cone(n: int, pairs) -> DirichletSet:
    fs = tuple((np.asarray(w, dtype=float).reshape(-1), float(c)) for w, c in pairs)
    return DirichletSet(n, "eigen", functionals=fs, is_cone=all(c == 0 for _, c in fs))


def _check_dim(F: DirichletSet, a: np.ndarray):
    if a.shape[-2:] != (F.dim, F.dim):
        raise ValueError(f"dimension mismatch: set has dim {F.dim}, matrix shape {a.shape[-2:]}")


def signed_margin(F: DirichletSet, a) -> np.ndarray | float:
    """Signed distance-like margin of ``a`` (shape (..., n, n)) to the boundary of F.

    Nonnegative iff ``a`` is in F; positive iff in its interior.
    """
    a = np.asarray(a, dtype=float)
    _check_dim(F, a)
    if F.kind == "pos":
        out = np.linalg.eigvalsh(a)[..., 0]
    elif F.kind == "trace":
        out = np.trace(a, axis1=-2, axis2=-1)
    elif F.kind == "halfspaces":
        vals = [np.einsum("ij,...ji->...", u, a) - c for u, c in F.halfspaces]
        out = np.min(np.stack(vals, axis=0), axis=0)
    else:
        # min over permutations of w . lambda_sigma pairs ascending w with descending lambda
        lam_desc = np.linalg.eigvalsh(a)[..., ::-1]
        vals = [lam_desc @ np.sort(w) - c for w, c in F.functionals]
        out = np.min(np.stack(vals, axis=0), axis=0)
    return float(out) if np.ndim(out) == 0 else out


def contains(F: DirichletSet, a, margin: float = 0.0) -> Classification:
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return classify(signed_margin(F, as_sym(a, F.dim)), margin)


def dual_margin(F: DirichletSet, a):
    """Margin for the Dirichlet dual ~(-Int F): >= 0 iff -a is not interior to F."""
    if F.kind == "eigen":
        raise NotImplementedError("Dirichlet dual of an eigenvalue set needs a half-space presentation")
    return -signed_margin(F, -np.asarray(a, dtype=float))


def dual_contains(F: DirichletSet, a) -> bool:
    return bool(dual_margin(F, as_sym(a, F.dim)) >= 0)


def dual_classify(F: DirichletSet, a, margin: float = 0.0) -> Classification:
    return classify(dual_margin(F, as_sym(a, F.dim)), margin)


def ray_set(F: DirichletSet) -> DirichletSet:
    """Asymptotic (ray) set of F.

    Cones over the origin are their own ray set.  For a finite intersection of
    half-spaces the ray set is the recession cone, obtained by zeroing offsets.
    """
    if F.is_cone:
        return F
    if F.kind == "halfspaces":
        return half_spaces(F.dim, [(u, 0.0) for u, _ in F.halfspaces])
    raise NotImplementedError(f"ray set not available for kind {F.kind!r} with offsets")


@dataclass
class DomainConvexityReport:
    domain_kind: str
    supported: bool
    ray_class: Classification | None = None
    dual_ray_class: Classification | None = None
    strictly_convex: bool = False
    note: str = ""


def check_strict_domain_convexity(F: DirichletSet, domain, margin: float = 1e-9) -> DomainConvexityReport:
    """Strict ray-set and dual-ray-set convexity of an interval or disk.

    Both domains have the defining function |x - c|^2 - R^2 whose Hessian is 2I.
    """
    kind = domain.kind
    if kind == "interval":
        return DomainConvexityReport(
            kind, True, strictly_convex=True,
            note="boundary is two points; tangent space is trivial",
        )
    if kind != "disk":
        return DomainConvexityReport(kind, False, note="boundary convexity is not certified for grid masks")
    if F.dim != 2:
        raise ValueError("disk domain needs a Dirichlet set on 2x2 matrices")
    hess = 2.0 * np.eye(2)
    rays = ray_set(F)
    rc = contains(rays, hess, margin)
    dc = dual_classify(rays, hess, margin)
    ok = rc is Classification.INTERIOR and dc is Classification.INTERIOR
    return DomainConvexityReport(kind, True, rc, dc, ok)
