"""Block matrices on R^{n+m} and the product Dirichlet set F * P.

A symmetric matrix on R^{n+m} is written in block form

    A = [[B, C], [C^T, D]],   B: n x n,  C: n x m,  D: m x m.

For a slope Gamma (m x n) the graph restriction is the congruence
(I; Gamma)^T A (I; Gamma) = B + C Gamma + Gamma^T C^T + Gamma^T D Gamma.
A lies in F * P when D is psd and every graph restriction lies in F.  For
convex F this is equivalent to a pseudo-inverse Schur test, implemented in
:func:`product_contains`; :func:`product_contains_sampled` searches over
slopes directly and serves as an independent oracle.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cones import Classification, DirichletSet, as_sym, classify, signed_margin

PINV_TOL = 1e-10
NULL_TOL = 1e-10
DEFAULT_SCALES = (1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class BlockSym:
    n: int
    m: int
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_sym(self.A, self.n + self.m))

    @classmethod
    def from_blocks(cls, B, C, D) -> "BlockSym":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        n, m = B.shape[0], D.shape[0]
        C = np.asarray(C, dtype=float).reshape(n, m)
        return cls(n, m, np.block([[B, C], [C.T, D]]))

    @property
    def B(self) -> np.ndarray:
        return self.A[: self.n, : self.n]

    @property
    def C(self) -> np.ndarray:
        return self.A[: self.n, self.n:]

    @property
    def D(self) -> np.ndarray:
        return self.A[self.n:, self.n:]

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "entries": self.A.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockSym":
        return cls(int(d["n"]), int(d["m"]), np.asarray(d["entries"], dtype=float))


def quad8_matrix(lam, mu, tau, a, b) -> BlockSym:
    """Coefficient matrix of the explicit quadratic in (x1, x2; y)."""
    return BlockSym(2, 1, np.array([[lam, tau, a], [tau, mu, b], [a, b, 1.0]]))


def restrict_graph(A: BlockSym, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim == 1 and A.m == 1:
        gamma = gamma.reshape(1, -1)
    if gamma.shape[-2:] != (A.m, A.n):
        raise ValueError(f"slope must have shape ({A.m}, {A.n}), got {gamma.shape}")
    B, C, D = A.B, A.C, A.D
    cg = C @ gamma
    gt = np.swapaxes(gamma, -1, -2)
    return B + cg + np.swapaxes(cg, -1, -2) + gt @ D @ gamma


def project_fiber(A: BlockSym) -> np.ndarray:
    return A.D.copy()


def pseudo_inverse(D, tol: float = PINV_TOL, abs_tol: float = 0.0) -> np.ndarray:
    """Eigenvalue pseudo-inverse with cutoff max(``tol * max|eig|``, ``abs_tol``).

    Works on stacks (..., m, m).
    """
    D = np.asarray(D, dtype=float)
    w, v = np.linalg.eigh(D)
    big = np.max(np.abs(w), axis=-1, keepdims=True)
    keep = np.abs(w) > np.maximum(tol * big, abs_tol)
    winv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return (v * winv[..., None, :]) @ np.swapaxes(v, -1, -2)


@dataclass(frozen=True)
class NullSpace:
    """nul(F) as {C in M_{n x m} : every column of C lies in span(vectors)}.

    ``vectors`` is an orthonormal n x r basis of the common kernel of the
    supporting-hyperplane normals.  ``generator_based`` is set when the answer
    comes from a user-listed half-space presentation rather than exact knowledge.
    """

    n: int
    m: int
    vectors: np.ndarray
    generator_based: bool = False

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] * self.m

    @property
    def basis(self) -> np.ndarray:
        """Basis matrices, shape (r * m, n, m)."""
        out = []
        for k in range(self.vectors.shape[1]):
            for j in range(self.m):
                c = np.zeros((self.n, self.m))
                c[:, j] = self.vectors[:, k]
                out.append(c)
        return np.array(out).reshape(-1, self.n, self.m)

    def residual(self, C) -> np.ndarray | float:
        """Norm of the component of C (shape (..., n, m)) outside nul(F)."""
        C = np.asarray(C, dtype=float)
        v = self.vectors
        off = C - v @ (v.T @ C)
        out = np.sqrt(np.sum(off**2, axis=(-2, -1)))
        return float(out) if np.ndim(out) == 0 else out


def null_space(F: DirichletSet, m: int, tol: float = 1e-10) -> NullSpace:
    n = F.dim
    if F.kind in ("pos", "trace"):
        return NullSpace(n, m, np.zeros((n, 0)))
    if F.kind != "halfspaces":
        raise NotImplementedError("null space needs a half-space presentation")
    stacked = np.vstack([u for u, _ in F.halfspaces])
    _, s, vt = np.linalg.svd(stacked)
    rank = int(np.sum(s > tol * max(s.max(), 1.0)))
    warnings.warn(
        "null space computed from the listed half-spaces only; supporting hyperplanes "
        "not in the presentation are ignored",
        stacklevel=2,
    )
    return NullSpace(n, m, vt[rank:].T.copy(), generator_based=True)


def schur_parts(F: DirichletSet, H, n: int, tol: float = PINV_TOL, nul: NullSpace | None = None,
                abs_tol: float = 0.0):
    """Margins of the three conditions of the Schur test for stacked matrices H.

    Returns ``(fiber, null_residual, schur)``: the smallest eigenvalue of D, the
    norm of C(I - D^+ D) outside nul(F), and the F-margin of B - C D^+ C^T.
    Eigenvalues of D below ``abs_tol`` count as zero.
    """
    H = np.asarray(H, dtype=float)
    N = H.shape[-1]
    m = N - n
    B, C, D = H[..., :n, :n], H[..., :n, n:], H[..., n:, n:]
    Dp = pseudo_inverse(D, tol, abs_tol)
    fiber = np.linalg.eigvalsh(D)[..., 0]
    proj = np.eye(m) - Dp @ D
    if nul is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nul = null_space(F, m)
    null_res = nul.residual(C @ proj)
    S = B - C @ Dp @ np.swapaxes(C, -1, -2)
    schur = signed_margin(F, 0.5 * (S + np.swapaxes(S, -1, -2)))
    return fiber, null_res, schur


def product_margin(F: DirichletSet, H, n: int, tol: float = PINV_TOL, abs_tol: float = 0.0) -> np.ndarray | float:
    """Single signed margin for membership of H in F * P (vectorised).

    min(smallest eigenvalue of D, F-margin of the Schur complement), lowered to
    -null residual where the range condition fails.
    """
    if not F.is_convex:
        raise NotImplementedError("the Schur characterisation requires a convex Dirichlet set")
    fiber, null_res, schur = schur_parts(F, H, n, tol, abs_tol=abs_tol)
    out = np.minimum(fiber, schur)
    # the range condition is an equality: it can only lower the margin
    size = 1.0 + np.sqrt(np.sum(np.asarray(H, dtype=float) ** 2, axis=(-2, -1)))
    out = np.where(null_res > NULL_TOL * size, np.minimum(out, -null_res), out)
    return float(out) if np.ndim(out) == 0 else out


def schur_margin(F: DirichletSet, A: BlockSym, tol: float = PINV_TOL) -> float:
    return product_margin(F, A.A, A.n, tol)


def product_contains(F: DirichletSet, A: BlockSym, margin: float = 0.0, tol: float = PINV_TOL) -> Classification:
    if F.dim != A.n:
        raise ValueError(f"set has dim {F.dim}, block has n={A.n}")
    if not F.is_convex:
        raise NotImplementedError("the Schur characterisation requires a convex Dirichlet set")
    return classify(product_margin(F, A.A, A.n, tol), margin)


@dataclass
class SampledProduct:
    classification: Classification
    margin: float
    witness: np.ndarray
    fiber_margin: float
    n_evaluated: int


def _probe_slopes(m: int, n: int, scales) -> list[np.ndarray]:
    out = [np.zeros((m, n))]
    for s in (1.0, *scales):
        for i in range(m):
            for j in range(n):
                for sign in (1.0, -1.0):
                    g = np.zeros((m, n))
                    g[i, j] = sign * s
                    out.append(g)
    return out


def product_contains_sampled(
    F: DirichletSet,
    A: BlockSym,
    n_samples: int = 200,
    scale_max: float = 1e3,
    rng_seed: int = 0,
    margin: float = 0.0,
    refine: int = 4,
) -> SampledProduct:
    """Search over slopes Gamma for a graph restriction leaving F.

    Deterministic probes (zero and signed unit matrices at each scale up to
    ``scale_max``) and ``n_samples`` seeded random slopes are evaluated; the
    ``refine`` best are then locally minimised inside the box |Gamma_ij| <= scale_max.
    The fibre block is tested against the psd cone as the definition requires.
    """
    if F.dim != A.n:
        raise ValueError(f"set has dim {F.dim}, block has n={A.n}")
    rng = np.random.default_rng(rng_seed)
    m, n = A.m, A.n
    scales = [s for s in DEFAULT_SCALES if s < scale_max] + [scale_max]
    slopes = _probe_slopes(m, n, scales)
    levels = np.asarray(scales)[rng.integers(len(scales), size=n_samples)]
    rand = rng.uniform(-1, 1, size=(n_samples, m, n)) * levels[:, None, None]
    gammas = np.concatenate([np.array(slopes), rand], axis=0)
    margins = np.asarray(signed_margin(F, restrict_graph(A, gammas)))
    evaluated = len(gammas)

    best = float(margins.min())
    witness = gammas[int(margins.argmin())]

    def objective(flat):
        return float(signed_margin(F, restrict_graph(A, flat.reshape(m, n))))

    bounds = [(-scale_max, scale_max)] * (m * n)
    for idx in np.argsort(margins)[:refine]:
        res = minimize(objective, gammas[idx].ravel(), method="L-BFGS-B", bounds=bounds)
        evaluated += int(res.nfev)
        if res.fun < best:
            best, witness = float(res.fun), res.x.reshape(m, n)

    fiber = float(np.linalg.eigvalsh(A.D)[0])
    cls = classify(min(best, fiber), margin)
    return SampledProduct(cls, min(best, fiber), witness, fiber, evaluated)
