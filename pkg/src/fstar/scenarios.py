"""Scenario runners behind the CLI subcommands.

Each runner takes a validated :class:`~fstar.config.Scenario` and returns a
:class:`RunResult`: named checks, tables to write and a JSON-ready report.
Numerical failures inside a check become failed checks, never crashes.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import formulas
from .blockprod import BlockSym, product_contains, product_contains_sampled, quad8_matrix, schur_margin
from .cones import Classification, DirichletSet, pos_cone, trace_cone
from .config import ConfigError, Scenario
from .convex import (
    ConvexBody, body_integral, legendre, suggest_dual_axes, sup_convolution, support_area, volume,
)
from .grid import Axis, GridFn
from .harmonic import DiskSolver, harmonic_weights
from .interpolate import (
    convex_hull_interpolation, dual_by_grid_solve, envelope_property_check, interior_points,
    interpolate_functions, interpolate_supports,
)
from .prekopa import hessian_decomposition, marginal, min_principle, section_volume
from .tables import BodyMap, Table
from .verify import CheckReport, discrete_laplacian, is_convex, is_F_subharmonic, is_product_subharmonic


@dataclass
class Check:
    """One pass/fail line.  ``margin`` is signed slack: >= 0 exactly when the check passes."""

    name: str
    passed: bool
    margin: float
    value: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"name": self.name, "pass": bool(self.passed), "margin": _num(self.margin)}
        if self.value is not None:
            d["value"] = _num(self.value)
        if self.note:
            d["note"] = self.note
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        val = "" if self.value is None else f" value={self.value:.6g}"
        note = f" ({self.note})" if self.note else ""
        return f"{tag} {self.name}: margin={self.margin:.6g}{val}{note}"


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def bound_check(name: str, value: float, limit: float, note: str = "") -> Check:
    """Pass when value <= limit."""
    value = float(value)
    return Check(name, bool(value <= limit), limit - value, value, note)


def report_check(name: str, rep: CheckReport, note: str = "") -> Check:
    return Check(name, rep.passed, rep.worst_margin + rep.threshold, rep.worst_margin, note)


@dataclass
class RunResult:
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def guarded(self, name: str, fn, *args, **kwargs):
        """Run ``fn``; an exception becomes a failed check named ``name``."""
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return fn(*args, **kwargs)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError, NotImplementedError) as exc:
            self.checks.append(Check(name, False, -math.inf, note=f"{type(exc).__name__}: {exc}"))
            return None
        finally:
            self.timings[name] = time.perf_counter() - t0


def f_check(f: GridFn, F: DirichletSet, tol: float) -> CheckReport:
    """Convexity for PosCone (the classical case), the Hessian classification otherwise."""
    if F.kind == "pos":
        return is_convex(f, tol)
    return is_F_subharmonic(f, F, tol)


# ---------------------------------------------------------------------------
# inputs


def _psi_callable(scn: Scenario, n: int):
    p = scn.params
    name = scn.formula
    if name == "quad8":
        p.pop("kappa", None)
        return formulas.quad8(**p)
    if name == "gauss_shift":
        return formulas.gauss_shift(n=n, **p)
    if name == "quadratic":
        try:
            return formulas.quadratic(BlockSym.from_dict(p["matrix"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("/data/params/matrix", str(exc)) from None
    raise ConfigError("/data/formula", f"{name} does not define a single psi for {scn.command}")


def psi_grid(scn: Scenario) -> GridFn:
    """psi on the (x; y) grid from a formula id or a CSV table."""
    if scn.formula == "custom_csv":
        split = scn.params.get("split")
        if split is None:
            raise ConfigError("/data/params/split", "custom_csv psi needs a [n_x, n_y] split")
        try:
            return formulas.read_psi_csv(scn.path(scn.doc["data"]["path"]), split)
        except (OSError, ValueError) as exc:
            raise ConfigError("/data/path", str(exc)) from None
    xa, ya = scn.axes("x"), scn.axes("y")
    f = _psi_callable(scn, len(xa))
    if scn.formula == "quad8" and (len(xa) != 2 or len(ya) != 1):
        raise ConfigError("/grid", "quad8 lives on x in R^2, y in R")
    return GridFn.from_function(xa + ya, f, split=(len(xa), len(ya)))


def psi_suite(scn: Scenario) -> list:
    """(label, psi GridFn) pairs: a random suite or a single formula."""
    if scn.formula != "random_quadratic":
        return [("psi", psi_grid(scn))]
    xa, ya = scn.axes("x"), scn.axes("y")
    if len(ya) != 1:
        raise ConfigError("/grid/y", "random quadratics have one fibre variable")
    p = scn.params
    rng = np.random.default_rng(scn.seed)
    out = []
    for k in range(int(p.get("count", 10))):
        A = formulas.random_quadratic(rng, p.get("kind", "trace"), len(xa))
        out.append((f"psi{k}", GridFn.from_function(xa + ya, formulas.quadratic(A), split=(len(xa), 1))))
    return out


def _F_for(scn: Scenario, n: int) -> DirichletSet:
    F = scn.F() if "F" in scn.doc else trace_cone(n)
    if F.dim != n:
        raise ConfigError("/F/dim", f"F acts on {F.dim}x{F.dim} matrices but the base has {n} variables")
    return F


# ---------------------------------------------------------------------------
# runners


def run_check_product(scn: Scenario) -> RunResult:
    res = RunResult()
    opts = scn.doc.get("options", {})
    n_samples = int(opts.get("n_samples", 200))
    scale_max = float(opts.get("scale_max", 1e3))
    band = scn.tol("band", 1e-6)
    if "random" in opts:
        spec = opts["random"]
        rng = np.random.default_rng(scn.seed)
        kinds = spec.get("cones", ["pos", "trace"])
        rows, disagree, decided = [], 0, 0
        for k in range(int(spec.get("count", 500))):
            A = formulas.random_block(rng, int(spec.get("max_dim", 4)))
            for kind in kinds:
                F = pos_cone(A.n) if kind == "pos" else trace_cone(A.n)
                margin = schur_margin(F, A)
                if abs(margin) <= band:
                    rows.append([k, kind, A.n, A.m, margin, "skipped", "skipped", 0.0])
                    continue
                exact = product_contains(F, A)
                sampled = product_contains_sampled(F, A, n_samples, scale_max, rng_seed=k)
                agree = (exact == Classification.EXTERIOR) == (sampled.classification == Classification.EXTERIOR)
                decided += 1
                disagree += not agree
                rows.append([k, kind, A.n, A.m, margin, exact.name, sampled.classification.name, sampled.margin])
        res.tables["instances"] = Table(
            ["instance", "cone", "n", "m", "schur_margin", "exact", "sampled", "sampled_margin"], rows)
        res.checks.append(Check("exact and sampled routes agree", disagree == 0, -float(disagree), float(disagree),
                                f"{decided} decided instances"))
        res.report = {"decided": decided, "disagreements": disagree}
        return res

    if "matrix" in scn.doc:
        try:
            A = BlockSym.from_dict(scn.doc["matrix"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("/matrix", str(exc)) from None
    elif scn.doc.get("data", {}).get("formula") == "quad8":
        p = scn.params
        A = quad8_matrix(p.get("lam", 1.0), p.get("mu", 1.0), p.get("tau", 0.0), p.get("a", 0.0), p.get("b", 0.0))
    else:
        raise ConfigError("/matrix", "check-product needs a matrix, a quad8 formula or options.random")
    F = _F_for(scn, A.n)
    exact = product_contains(F, A)
    margin = schur_margin(F, A)
    sampled = product_contains_sampled(F, A, n_samples, scale_max, rng_seed=scn.seed)
    res.checks.append(Check("in F*P (Schur test)", exact != Classification.EXTERIOR, margin, margin, exact.name))
    agree = (exact == Classification.EXTERIOR) == (sampled.classification == Classification.EXTERIOR)
    res.checks.append(Check("sampled graph restrictions agree", agree, 0.0 if agree else -1.0, sampled.margin,
                            sampled.classification.name))
    res.report = {
        "classification": exact.name,
        "schur_margin": margin,
        "sampled": {"classification": sampled.classification.name, "margin": sampled.margin,
                    "witness_gamma": sampled.witness.tolist(), "evaluated": sampled.n_evaluated},
    }
    res.tables["classification"] = Table(
        ["route", "classification", "margin"],
        [["schur", exact.name, margin], ["sampled", sampled.classification.name, sampled.margin]])
    return res


def run_prekopa(scn: Scenario) -> RunResult:
    res = RunResult()
    suite = psi_suite(scn)
    F = _F_for(scn, suite[0][1].split[0])
    tol_in = scn.tol("product", 1e-6)
    tol_out = scn.tol("marginal", 1e-5)
    rows = []
    worst_in, worst_out = math.inf, math.inf
    for label, psi in suite:
        rep_in = res.guarded(f"{label}: product check", is_product_subharmonic, psi, F, None, tol_in)
        mres = res.guarded(f"{label}: marginal", marginal, psi)
        if rep_in is None or mres is None:
            continue
        phi = mres.phi
        rep_out = f_check(phi, F, tol_out)
        worst_in = min(worst_in, rep_in.worst_margin + rep_in.threshold)
        worst_out = min(worst_out, rep_out.worst_margin + rep_out.threshold)
        rows.append([label, rep_in.worst_margin, rep_in.threshold, rep_out.worst_margin, rep_out.threshold,
                     int(np.sum(mres.truncated))])
        if len(suite) == 1:
            lap = discrete_laplacian(phi)
            pts = phi.points().reshape(-1, phi.ndim)
            cols = [f"x{k + 1}" for k in range(phi.ndim)] + ["phi", "laplacian"]
            res.tables["marginal"] = Table(cols, [[*p, v, l] for p, v, l in
                                                  zip(pts, phi.values.ravel(), lap.ravel())])
            res.checks.append(Check("no tail truncation", not np.any(mres.truncated),
                                    -float(np.sum(mres.truncated)), float(np.sum(mres.truncated))))
    res.tables["suite"] = Table(["psi", "product_margin", "product_threshold", "marginal_margin",
                                 "marginal_threshold", "truncated_nodes"], rows)
    if scn.option("check_inputs", True):
        res.checks.append(Check("inputs are product-subharmonic", worst_in >= 0, worst_in))
    res.checks.append(Check("marginals are F-subharmonic" if F.kind != "pos" else "marginals are convex",
                            worst_out >= 0, worst_out))

    for x0 in scn.option("decomposition_at", []):
        psi = suite[0][1]
        dec = res.guarded(f"Hessian decomposition at {x0}", hessian_decomposition, psi, x0)
        if dec is None:
            continue
        tol = scn.tol("decomposition", 1e-3)
        res.checks.append(bound_check(f"Hessian decomposition at {x0}", dec.residual, tol))
        expected = scn.option("expected_hessian")
        if expected is not None:
            err = float(np.max(np.abs(dec.lhs - np.asarray(expected, dtype=float))))
            res.checks.append(bound_check(f"Hess phi at {x0} matches expected", err, tol))
        res.report.setdefault("decomposition", []).append(
            {"x0": list(np.atleast_1d(x0)), "lhs": dec.lhs.tolist(), "rhs": dec.rhs.tolist(),
             "residual": dec.residual, "warnings": dec.warnings})
    return res


def run_min_principle(scn: Scenario) -> RunResult:
    res = RunResult()
    suite = psi_suite(scn)
    F = _F_for(scn, suite[0][1].split[0])
    p_values = tuple(float(p) for p in scn.option("p_values", [1, 4, 16, 64]))
    tol = scn.tol("minimum", 1e-6)
    rows = []
    worst, monotone = math.inf, True
    for label, psi in suite:
        mp = res.guarded(f"{label}: minimum principle", min_principle, psi, p_values)
        if mp is None:
            continue
        rep = f_check(mp.minimum, F, tol)
        worst = min(worst, rep.worst_margin + rep.threshold)
        monotone &= mp.decreasing
        rows.append([label, rep.worst_margin, rep.threshold, *mp.sup_errors])
        if len(suite) == 1:
            m = mp.minimum
            pts = m.points().reshape(-1, m.ndim)
            cols = [f"x{k + 1}" for k in range(m.ndim)] + ["inf_y"] + [f"phi_p{p:g}" for p in p_values]
            vals = [m.values.ravel()] + [f.values.ravel() for f in mp.p_family]
            res.tables["minimum"] = Table(cols, [[*p, *v] for p, v in zip(pts, zip(*vals))])
    res.tables["suite"] = Table(["psi", "margin", "threshold"] + [f"sup_err_p{p:g}" for p in p_values], rows)
    res.checks.append(Check("fibre minimum is F-subharmonic", worst >= 0, worst))
    res.checks.append(Check("p-family sup error decreases in p", monotone, 0.0 if monotone else -1.0))
    return res


def run_example8(scn: Scenario) -> RunResult:
    res = RunResult()
    if scn.formula != "quad8":
        raise ConfigError("/data/formula", "example8 needs the quad8 formula")
    p = {"lam": 1.0, "mu": 1.0, "tau": 0.0, "a": 0.0, "b": 0.0, "kappa": 1.0, **scn.params}
    kappa = p.pop("kappa")
    xa = scn.axes("x")
    if len(xa) != 2:
        raise ConfigError("/grid/x", "example8 has two base variables")
    w_min = float(scn.option("w_min", 0.05))
    bracket = tuple(scn.option("y_bracket", [-1e3, 1e3]))
    t0 = time.perf_counter()
    sec = res.guarded("section volume", section_volume, formulas.quad8(**p), kappa, xa, bracket)
    res.timings["pipeline"] = time.perf_counter() - t0
    if sec is None:
        return res
    B = sec.BK
    x1, x2 = B.mesh()
    W = formulas.quad8_W(x1, x2, kappa=kappa, **p)
    closed = formulas.quad8_bk(x1, x2, kappa=kappa, **p)
    core = W > w_min
    with np.errstate(invalid="ignore"):
        gap = np.abs(B.values - closed)
    err = float(np.max(gap[core])) if core.any() else math.inf
    res.checks.append(bound_check("closed-form match on {W > w_min}", err, scn.tol("closed_form", 1e-6)))
    limit = scn.option("max_seconds")
    if limit is not None:
        res.checks.append(bound_check("pipeline runtime (s)", res.timings["pipeline"], float(limit)))

    g = GridFn(xa, np.where(core, B.values, np.inf))
    lap = discrete_laplacian(g)
    deficit = p["lam"] + p["mu"] - p["a"] ** 2 - p["b"] ** 2
    F = _F_for(scn, 2)
    if deficit >= 0:
        rep = f_check(g, F, scn.tol("laplacian", 1e-6))
        res.checks.append(report_check("B_K is F-subharmonic", rep))
    else:
        try:
            origin = B.index_of((0.0, 0.0))
        except ValueError:
            raise ConfigError("/grid/x", "the deficit case needs the origin on the grid") from None
        l0 = float(lap[origin])
        exact = float(formulas.quad8_laplacian(0.0, 0.0, kappa=kappa, **p))
        res.checks.append(Check("Laplacian of B_K negative at origin", l0 < 0, -l0, l0))
        res.checks.append(bound_check("Laplacian at origin matches exact oracle", abs(l0 - exact),
                                      scn.tol("origin_laplacian", 5e-3), f"exact {exact:.6g}"))
        res.report["laplacian_origin"] = {"discrete": l0, "exact": exact}
    res.report["deficit"] = deficit
    pts = B.points().reshape(-1, 2)
    res.tables["bk"] = Table(["x1", "x2", "B_K", "closed_form", "laplacian"],
                             [[*q, b, c, l] for q, b, c, l in
                              zip(pts, B.values.ravel(), closed.ravel(), lap.ravel())])
    return res


def _body_family(scn: Scenario):
    dom = scn.domain()
    p = scn.params
    if scn.formula == "indicator_family":
        return dom, formulas.indicator_family(dom, p.get("bodies"), p.get("ellipse"), int(p.get("n_dir", 256)))
    if scn.formula == "cos_interval_family":
        return dom, formulas.cos_interval_family(dom, **p)
    raise ConfigError("/data/formula", f"{scn.formula} is not a body family")


def run_bm(scn: Scenario) -> RunResult:
    res = RunResult()
    try:
        dom, fam = _body_family(scn)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("/data/params", str(exc)) from None
    xa = scn.axes("x")
    pts, mask = interior_points(dom, xa)
    P = pts[mask]
    H = interpolate_supports(fam, P)
    dim = fam.bodies[0].dim
    res.tables["supports"] = BodyMap(P, H, dim)
    if dim == 1:
        vols = H[:, 0] + H[:, 1]
    else:
        vols = support_area(H)
    with np.errstate(divide="ignore"):
        nlv = np.full(mask.shape, np.inf)
        nlv[mask] = -np.log(vols)
    g = GridFn(xa, nlv)
    res.tables["neg_log_volume"] = g

    if dom.kind == "interval":
        t = P[:, 0]
        w = (t - dom.a) / (dom.b - dom.a)
        mink = np.array([body_integral([(1 - s, fam.bodies[0]), (s, fam.bodies[1])]).support for s in w])
        res.checks.append(bound_check("interpolation equals Minkowski combination",
                                      float(np.max(np.abs(H - mink))), scn.tol("minkowski", 1e-9)))
        d2 = nlv[2:] - 2 * nlv[1:-1] + nlv[:-2]
        res.checks.append(Check("-log vol has nonnegative second differences",
                                bool(d2.min() >= -scn.tol("second_difference", 1e-8)),
                                float(d2.min()) + scn.tol("second_difference", 1e-8), float(d2.min())))
        return res

    F = _F_for(scn, 2)
    if scn.option("expect_constant", False):
        err = float(np.max(np.abs(H - fam.bodies[0].support)))
        res.checks.append(bound_check("constant family reproduced", err, scn.tol("constant", 1e-6)))
    if scn.formula == "cos_interval_family":
        lo, hi = formulas.cos_interval_exact(P[:, 0], **scn.params)
        err = float(np.max(np.abs(np.stack([hi, -lo], axis=1) - H)))
        res.checks.append(bound_check("matches exact harmonic extension", err, scn.tol("harmonic", 1e-3)))
    rep = f_check(g, F, scn.tol("subharmonic", 1e-5))
    res.checks.append(report_check("-log vol is F-subharmonic", rep))
    if dim == 2:
        # the polygon route of the volume agrees with the support-sum formula
        sample = np.linspace(0, len(P) - 1, min(16, len(P))).astype(int)
        gap = max(abs(volume(ConvexBody(2, H[i])) - vols[i]) for i in sample)
        res.checks.append(bound_check("volume routes agree", gap, 1e-9 * max(1.0, float(vols.max()))))
    return res


def _function_family(scn: Scenario, dom):
    ya = scn.axes("y")
    p = scn.params
    if scn.formula == "quad_family":
        return formulas.quad_family(dom, ya, **p)
    if scn.formula == "indicator_family":
        bodies = formulas.indicator_family(dom, p.get("bodies"), p.get("ellipse"))
        if bodies.bodies[0].dim != 1:
            raise ConfigError("/data/params", "function interpolation of indicators needs intervals")
        return formulas.indicator_function_family(bodies, ya)
    if scn.formula == "custom_csv":
        try:
            return formulas.read_family_csv(scn.path(scn.doc["data"]["path"]), dom)
        except (OSError, ValueError) as exc:
            raise ConfigError("/data/path", str(exc)) from None
    raise ConfigError("/data/formula", f"{scn.formula} is not a function family")


def run_interp(scn: Scenario) -> RunResult:
    res = RunResult()
    dom = scn.domain()
    try:
        fam = _function_family(scn, dom)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("/data/params", str(exc)) from None
    xa, ua = scn.axes("x"), scn.axes("u")
    indicator = scn.formula == "indicator_family"
    out = res.guarded("interpolation", interpolate_functions, fam, xa, ua, None, indicator)
    if out is None:
        return res
    res.tables["Phi"] = out.Phi
    res.checks.append(Check("family locally comparable", out.comparability.passed, 0.0 if out.comparability.passed
                            else -1.0, out.comparability.worst_constant))
    fib = is_convex(out.Phi, 1e-9, dims=tuple(range(len(xa), len(xa) + fam.m)))
    res.checks.append(report_check("Phi fibres convex", fib))

    if indicator:
        bodies = formulas.indicator_family(dom, scn.params.get("bodies"))
        pts, mask = interior_points(dom, xa)
        P = pts[mask]
        H = interpolate_supports(bodies, P)
        res.tables["supports"] = BodyMap(P, H, 1)
        w = (P[:, 0] - dom.a) / (dom.b - dom.a)
        mink = np.array([body_integral([(1 - s, bodies.bodies[0]), (s, bodies.bodies[1])]).support for s in w])
        res.checks.append(bound_check("endpoints equal Minkowski combination", float(np.max(np.abs(H - mink))),
                                      scn.tol("endpoints", 1e-9)))
        # the finite region of Phi(t, .) is the interpolated interval up to one y-cell
        y = fam.y_axes[0].nodes
        h = fam.y_axes[0].step
        gap = 0.0
        for k, row in enumerate(out.Phi.values[mask]):
            fin = y[np.isfinite(row)]
            if fin.size:
                gap = max(gap, abs(fin.min() + H[k, 1]), abs(fin.max() - H[k, 0]))
        res.checks.append(bound_check("Phi is the indicator of the interpolated body", gap, h * (1 + 1e-9)))
        hull = res.guarded("convex hull route", convex_hull_interpolation, fam, xa)
        if hull is not None:
            hull_gap = 0.0
            for k, row in enumerate(hull.values[mask]):
                fin = y[np.isfinite(row)]
                hull_gap = max(hull_gap, abs(fin.min() + H[k, 1]), abs(fin.max() - H[k, 0])) if fin.size else math.inf
            res.checks.append(bound_check("hull route finite region matches the body", hull_gap, h * (1 + 1e-9)))
        return res

    if dom.kind == "disk" and scn.option("cross_check", True):
        count = int(scn.option("solver_count", 129))
        r_max = float(scn.option("cross_check_radius", 0.95))
        grid_star = res.guarded("grid-solve dual", dual_by_grid_solve, fam, ua, count)
        if grid_star is not None:
            pts = grid_star.x_axes
            mesh = np.stack(np.meshgrid(*[a.nodes for a in pts], indexing="ij"), axis=-1)
            r = np.linalg.norm(mesh - np.asarray(dom.center), axis=-1)
            sel = r <= r_max * dom.radius
            W = harmonic_weights(dom, mesh[sel], closed=True)
            conj = out.conjugates.reshape(out.conjugates.shape[0], -1)
            poisson = W @ conj
            solved = grid_star.values[sel].reshape(poisson.shape)
            err = float(np.max(np.abs(poisson - solved)))
            res.checks.append(bound_check(f"Poisson vs grid-solve Phi* (r <= {r_max:g})", err,
                                          scn.tol("cross_check", 5e-3)))
    if scn.option("envelope", True):
        F = _F_for(scn, len(xa))
        env = res.guarded("envelope check", envelope_property_check, out, fam, F, None,
                          scn.tol("envelope_margin", 1e-4), scn.option("collar"), 5, 8,
                          scn.option("mollify_eps"))
        if env is not None:
            res.checks.append(bound_check("boundary attainment", env.boundary_error, scn.tol("boundary", 1e-2)))
            res.checks.append(report_check("Phi is F*P-subharmonic", env.product))
            res.checks.append(bound_check("duality boundary residual", env.duality_residual,
                                          scn.tol("duality", 1e-3)))
            res.checks.append(Check("-Phi*(., u) is F-subharmonic", env.duality_subharmonic,
                                    min(r.worst_margin + r.threshold for r in env.duality_reports)))
            res.report["envelope"] = env.to_dict()
    return res


def run_supconv(scn: Scenario) -> RunResult:
    res = RunResult()
    psi = psi_grid(scn)
    eps_list = sorted(float(e) for e in scn.option("eps", [1e-4, 1e-3, 1e-2, 5e-2]))
    shrink = float(scn.option("shrink", 0.5))
    F = _F_for(scn, psi.split[0]) if psi.split else None
    base = sup_convolution(psi, eps_list[0], shrink)  # for axes only
    sl = tuple(slice(psi.axes[k].index(a.lo), psi.axes[k].index(a.lo) + a.count) for k, a in enumerate(base.axes))
    inner = GridFn(base.axes, psi.values[sl], psi.split)
    rows = []
    prev = inner.values
    above, mono = math.inf, math.inf
    margin0 = None
    if F is not None:
        margin0 = is_product_subharmonic(inner, F, full_hessian=False).worst_margin
    drop = math.inf
    slope = scn.tol("margin_per_eps", 1.0)
    scale = max(1.0, float(np.max(np.abs(inner.values))))
    for eps in eps_list:
        s = sup_convolution(psi, eps, shrink)
        d = s.values - inner.values
        above = min(above, float(d.min()))
        mono = min(mono, float((s.values - prev).min()))
        prev = s.values
        row = [eps, float(d.min()), float(d.max())]
        if F is not None:
            m = is_product_subharmonic(s, F, full_hessian=False).worst_margin
            drop = min(drop, m - (margin0 - slope * eps))
            row.append(m)
        rows.append(row)
    cols = ["eps", "min_increase", "max_increase"] + (["product_margin"] if F is not None else [])
    res.tables["supconv"] = Table(cols, rows)
    res.checks.append(Check("psi_eps >= psi", above >= 0, above, above))
    mono_tol = scn.tol("monotone", 1e-10) * scale
    res.checks.append(Check("monotone in eps", mono >= -mono_tol, mono + mono_tol, mono))
    res.checks.append(bound_check(f"converged at eps={eps_list[0]:g}", rows[0][2], scn.tol("convergence", 1e-3)))
    if F is not None:
        res.checks.append(Check("product margin kept up to O(eps)", drop >= 0, drop, note=f"margin {margin0:.6g}"))
    return res


def run_legendre(scn: Scenario) -> RunResult:
    res = RunResult()
    if scn.formula != "convex_1d":
        raise ConfigError("/data/formula", "legendre runs the convex_1d suite")
    ya = scn.axes("y")
    if len(ya) != 1:
        raise ConfigError("/grid/y", "legendre suite is one-dimensional")
    rng = np.random.default_rng(scn.seed)
    n_dual = int(scn.option("dual_count", 401))
    rows, worst_inv, worst_fy = [], math.inf, math.inf
    y = ya[0].nodes
    for k in range(int(scn.params.get("count", 10))):
        f = GridFn.from_function(ya, formulas.convex_1d(rng))
        L = float(np.max(np.abs(np.diff(f.values))) / ya[0].step)
        ua = suggest_dual_axes(f, n_dual)
        fs = legendre(f, ua)
        fss = legendre(fs, ya)
        err = float(np.max(np.abs(fss.values - f.values)[1:-1]))
        bound = 2 * L * ya[0].step
        u = ua[0].nodes
        gap = f.values[:, None] + fs.values[None, :] - y[:, None] * u[None, :]
        size = np.abs(f.values[:, None]) + np.abs(fs.values[None, :]) + np.abs(y[:, None] * u[None, :])
        fy = float(np.min(gap + 4 * np.finfo(float).eps * size))
        worst_inv = min(worst_inv, bound - err)
        worst_fy = min(worst_fy, fy)
        rows.append([k, L, err, bound, float(gap.min())])
    res.tables["involution"] = Table(["function", "lipschitz", "biconjugate_error", "bound", "fenchel_young_min"], rows)
    res.checks.append(Check("|f** - f| <= 2 L dy on the interior", worst_inv >= 0, worst_inv))
    res.checks.append(Check("Fenchel-Young at every node pair", worst_fy >= 0, worst_fy,
                            note="up to 4 ulp of the terms"))
    return res


def run_structural(scn: Scenario) -> RunResult:
    from .verify import structural_suite

    res = RunResult()
    F = _F_for(scn, 2)
    reps = structural_suite(F, int(scn.option("n_pairs", 50)), scn.seed, int(scn.option("count", 33)),
                            scn.tol("subharmonic", 1e-6))
    rows = []
    for name, rep in reps.items():
        res.checks.append(report_check(f"{name} property", rep))
        rows.append([name, rep.worst_margin, rep.threshold, rep.details["inputs_failed"]])
    res.tables["structural"] = Table(["property", "worst_margin", "threshold", "inputs_failed"], rows)
    return res


RUNNERS = {
    "check-product": run_check_product,
    "prekopa": run_prekopa,
    "bm": run_bm,
    "min-principle": run_min_principle,
    "interp": run_interp,
    "supconv": run_supconv,
    "example8": run_example8,
    "legendre": run_legendre,
    "structural": run_structural,
}


def run(scn: Scenario) -> RunResult:
    t0 = time.perf_counter()
    res = RUNNERS[scn.command](scn)
    res.timings["total"] = time.perf_counter() - t0
    return res
