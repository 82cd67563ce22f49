"""Benchmark cases and convergence studies for the assimilation solver.

All built-in cases share the manufactured solution

    u(x, y) = 30 x (1 - x) y (1 - y),

which has unit L2 norm on the unit square, with the source derived as
f = -mu*laplace(u) + beta.grad(u).  Three measurement/evaluation geometry
pairs are combined with a constant advection field and a strong rotational
one.  Tables record relative errors over the evaluation region, the
stabilizer norms of the discrete error pair and optionally the condition
number, and fit log-log rates against the mesh size.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import Mesh, Region, UNIT_SQUARE, build_unit_square_mesh, mesh_size
from .fem import FeFunction, interpolate, l2_project, norms, quad_points, \
    triangle_geometry, triangle_rule
from .forms import ProblemSpec, assemble_all, constant_field, swirl_field
from .saddle import build_system, solve, condition_number

__all__ = [
    "ExactSolution",
    "polynomial_bump",
    "derive_source",
    "NoiseModel",
    "apply_noise",
    "CaseDefinition",
    "builtin_cases",
    "get_case",
    "RateFit",
    "estimate_rate",
    "ConvergenceRow",
    "ConvergenceTable",
    "run_case",
    "error_norms",
    "CSV_HEADER",
    "DEFAULT_LADDER",
]

DEFAULT_LADDER = (8, 16, 32, 64, 128)
CSV_HEADER = ("N", "h", "err_l2_B", "err_h1_B", "s_norm", "sstar_norm", "cond")


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution with gradient and Laplacian callables."""

    value: Callable
    gradient: Callable
    laplacian: Callable


def polynomial_bump() -> ExactSolution:
    """The quartic bump 30 x(1-x) y(1-y) with unit L2 norm on the square."""

    def value(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return 30.0 * x * (1 - x) * y * (1 - y)

    def gradient(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return 30.0 * np.column_stack([(1 - 2 * x) * y * (1 - y),
                                       x * (1 - x) * (1 - 2 * y)])

    def laplacian(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return -60.0 * (x * (1 - x) + y * (1 - y))

    return ExactSolution(value, gradient, laplacian)


def derive_source(exact: ExactSolution, mu: float, beta: Callable) -> Callable:
    """Source f = -mu*laplace(u) + beta.grad(u) matching an exact solution."""

    def f(pts):
        pts = np.atleast_2d(pts)
        adv = np.einsum("nd,nd->n", np.asarray(beta(pts), dtype=float),
                        np.asarray(exact.gradient(pts), dtype=float))
        return -mu * np.asarray(exact.laplacian(pts), dtype=float) + adv

    return f


@dataclass(frozen=True)
class NoiseModel:
    """Uniform perturbation in [-h**law, h**law] on nodes inside omega.

    ``law`` = 1 keeps the perturbation below the discretization error;
    ``law`` = 0.5 makes it dominate on fine meshes.  Draws are seeded per
    mesh, so regenerating with the same seed and mesh is bit-exact.
    """

    law: float
    seed: int = 0


def apply_noise(data: FeFunction, noise: NoiseModel, omega: Region,
                h: float) -> FeFunction:
    """Perturb the nodal data inside the measurement region."""
    mask = omega.contains(data.mesh.nodes)
    rng = np.random.default_rng([noise.seed, data.mesh.cells_per_side])
    amp = h ** noise.law
    coeffs = data.coefficients.copy()
    coeffs[mask] += rng.uniform(-amp, amp, size=int(mask.sum()))
    return FeFunction(data.mesh, coeffs)


@dataclass(frozen=True)
class CaseDefinition:
    """A named benchmark: problem data, mesh ladder and optional noise."""

    name: str
    spec: ProblemSpec
    exact: ExactSolution
    ladder: tuple = DEFAULT_LADDER
    noise: Optional[NoiseModel] = None


_GEOMETRIES = {
    # (measurement region omega, evaluation region B)
    "ex1": (Region([(0.2, 0.45, 0.2, 0.45)]),
            Region([(0.2, 0.45, 0.55, 0.8)])),
    "ex2": (Region([(0.0, 0.125, 0.4, 0.6), (0.875, 1.0, 0.4, 0.6)]),
            Region([(0.25, 0.75, 0.4, 0.6)])),
    "ex3": (Region([(0.0, 1.0, 0.0, 1.0)], holes=[(0.0, 0.875, 0.125, 0.875)]),
            Region([(0.0, 1.0, 0.0, 1.0)], holes=[(0.0, 0.125, 0.125, 0.875)])),
}

_FIELDS = {
    # (field, exact sup of |beta| on the square)
    "const": (constant_field(1.0, 0.0), 1.0),
    "swirl": (swirl_field(100.0), 200.0),
}


def _make_case(geom: str, fld: str, noise: Optional[NoiseModel] = None,
               suffix: str = "") -> CaseDefinition:
    exact = polynomial_bump()
    beta, sup = _FIELDS[fld]
    omega, target = _GEOMETRIES[geom]
    spec = ProblemSpec(mu=1.0, beta=beta, omega=omega, target=target,
                       f=derive_source(exact, 1.0, beta), beta_sup=sup,
                       gamma=1e-5, gamma_star=1.0, boundary_factor=50.0)
    return CaseDefinition(f"{geom}-{fld}{suffix}", spec, exact, DEFAULT_LADDER,
                          noise)


def builtin_cases() -> list[CaseDefinition]:
    """The six noiseless benchmarks plus two noisy variants of ex1-const."""
    cases = [_make_case(g, f) for g in ("ex1", "ex2", "ex3")
             for f in ("const", "swirl")]
    cases.append(_make_case("ex1", "const", NoiseModel(law=1.0),
                            "-noise-h"))
    cases.append(_make_case("ex1", "const", NoiseModel(law=0.5),
                            "-noise-sqrt"))
    return cases


def get_case(name: str) -> CaseDefinition:
    for case in builtin_cases():
        if case.name == name:
            return case
    known = ", ".join(c.name for c in builtin_cases())
    raise KeyError(f"unknown case {name!r}; known cases: {known}")


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(value) against log(h), plus the
    per-step slopes between consecutive ladder entries."""

    slope: float
    per_step: tuple


def estimate_rate(pairs) -> RateFit:
    """Fit a rate from (h, value) pairs; values must be positive."""
    pairs = [(float(h), float(v)) for h, v in pairs]
    if len(pairs) < 2:
        raise ValueError("need at least two (h, value) pairs")
    if any(v <= 0 for _, v in pairs):
        raise ValueError("rate fits need positive values")
    lh = np.log([h for h, _ in pairs])
    lv = np.log([v for _, v in pairs])
    slope = float(np.polyfit(lh, lv, 1)[0])
    steps = tuple(float((lv[i + 1] - lv[i]) / (lh[i + 1] - lh[i]))
                  for i in range(len(pairs) - 1))
    return RateFit(slope, steps)


@dataclass
class ConvergenceRow:
    N: int
    h: float
    err_l2_B: float
    err_h1_B: float
    s_norm: float
    sstar_norm: float
    cond: Optional[float] = None
    peclet: Optional[float] = None


@dataclass
class ConvergenceTable:
    """Ladder results for one case, with fitted rates per column."""

    case_name: str
    rows: list
    rates: dict

    def column(self, name: str):
        return [getattr(r, name) for r in self.rows]

    def to_csv(self, path_or_buf):
        if hasattr(path_or_buf, "write"):
            self._write_csv(path_or_buf)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                self._write_csv(fh)

    def _write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            cond = "" if r.cond is None else repr(float(r.cond))
            writer.writerow([r.N, repr(float(r.h)), repr(float(r.err_l2_B)),
                             repr(float(r.err_h1_B)), repr(float(r.s_norm)),
                             repr(float(r.sstar_norm)), cond])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self._write_csv(buf)
        return buf.getvalue()

    def rates_dict(self) -> dict:
        return {name: {"slope": fit.slope, "per_step": list(fit.per_step)}
                for name, fit in self.rates.items()}


def error_norms(exact: ExactSolution, fe: FeFunction, region,
                degree: int = 4):
    """Absolute and reference norms of (exact - fe) over a region.

    Returns (err_l2, err_h1, ref_l2, ref_h1) where the reference norms are
    those of the exact solution; the H1 entries are full norms.
    """
    mesh = fe.mesh
    rule = triangle_rule(degree)
    grads, areas = triangle_geometry(mesh)
    pts = quad_points(mesh, rule)
    flat = pts.reshape(-1, 2)

    uex = np.asarray(exact.value(flat), dtype=float).reshape(pts.shape[:2])
    gex = np.asarray(exact.gradient(flat),
                     dtype=float).reshape(*pts.shape[:2], 2)
    cf = fe.coefficients[mesh.triangles]
    uh = np.einsum("qk,tk->tq", rule.points, cf)
    gh = np.einsum("tk,tkd->td", cf, grads)

    mask = region.contains(flat).reshape(pts.shape[:2]) if region is not None \
        else np.ones(pts.shape[:2], dtype=bool)
    w = rule.weights[None, :] * areas[:, None] * mask

    diff = uex - uh
    gdiff = gex - gh[:, None, :]
    err_l2_sq = float(np.sum(w * diff**2))
    err_semi_sq = float(np.sum(w * np.einsum("tqd,tqd->tq", gdiff, gdiff)))
    ref_l2_sq = float(np.sum(w * uex**2))
    ref_semi_sq = float(np.sum(w * np.einsum("tqd,tqd->tq", gex, gex)))
    return (np.sqrt(err_l2_sq), np.sqrt(err_l2_sq + err_semi_sq),
            np.sqrt(ref_l2_sq), np.sqrt(ref_l2_sq + ref_semi_sq))


def _seminorm_variant(exact, fe, region, degree):
    """As error_norms but with H1 seminorms in place of full H1 norms."""
    mesh = fe.mesh
    rule = triangle_rule(degree)
    grads, areas = triangle_geometry(mesh)
    pts = quad_points(mesh, rule)
    flat = pts.reshape(-1, 2)
    gex = np.asarray(exact.gradient(flat),
                     dtype=float).reshape(*pts.shape[:2], 2)
    gh = np.einsum("tk,tkd->td", fe.coefficients[mesh.triangles], grads)
    mask = region.contains(flat).reshape(pts.shape[:2]) if region is not None \
        else np.ones(pts.shape[:2], dtype=bool)
    w = rule.weights[None, :] * areas[:, None] * mask
    gdiff = gex - gh[:, None, :]
    err = np.sqrt(float(np.sum(w * np.einsum("tqd,tqd->tq", gdiff, gdiff))))
    ref = np.sqrt(float(np.sum(w * np.einsum("tqd,tqd->tq", gex, gex))))
    return err, ref


def run_case(case: CaseDefinition, cond: str = "none",
             projection: str = "l2", quad_degree: int = 4,
             h1: str = "full", ladder: Optional[Sequence[int]] = None,
             cond_tol: float = 1e-3, cond_max_iter: int = 5000,
             solution_hook: Optional[Callable] = None) -> ConvergenceTable:
    """Run a case over its mesh ladder and collect the convergence table.

    ``cond`` selects condition-number reporting ('none', 'exact' or
    'estimate'); ``projection`` chooses the comparison function for the
    stabilizer norm of the error ('l2' projection or 'nodal' interpolant);
    ``h1`` switches the H1 error column between the full norm and the
    seminorm.  ``solution_hook(N, mesh, solution)`` is called per ladder
    entry when given.
    """
    if cond not in ("none", "exact", "estimate"):
        raise ValueError(f"unknown cond mode {cond!r}")
    if projection not in ("l2", "nodal"):
        raise ValueError(f"unknown projection {projection!r}")
    if h1 not in ("full", "semi"):
        raise ValueError(f"unknown h1 mode {h1!r}")

    rows = []
    for n_cells in (ladder if ladder is not None else case.ladder):
        mesh = build_unit_square_mesh(n_cells)
        h = mesh_size(mesh)
        data = interpolate(case.exact.value, mesh)
        if case.noise is not None:
            data = apply_noise(data, case.noise, case.spec.omega, h)

        blocks = assemble_all(case.spec, mesh, data, quad_degree)
        system = build_system(blocks.pde, blocks.primal, blocks.dual,
                              blocks.b_data, blocks.b_source)
        sol = solve(system, mesh)
        if solution_hook is not None:
            solution_hook(n_cells, mesh, sol)

        if projection == "l2":
            compare = l2_project(case.exact.value, mesh, quad_degree)
        else:
            compare = interpolate(case.exact.value, mesh)
        e = compare.coefficients - sol.u.coefficients
        s_norm = float(np.sqrt(e @ (blocks.primal @ e)))
        zc = sol.z.coefficients
        sstar_norm = float(np.sqrt(zc @ (blocks.dual @ zc)))

        err_l2, err_h1, ref_l2, ref_h1 = error_norms(
            case.exact, sol.u, case.spec.target, quad_degree)
        if h1 == "semi":
            err_h1, ref_h1 = _seminorm_variant(case.exact, sol.u,
                                               case.spec.target, quad_degree)

        kappa = None
        if cond != "none":
            kappa = condition_number(system, mode=cond, tol=cond_tol,
                                     max_iter=cond_max_iter)
        rows.append(ConvergenceRow(n_cells, h, err_l2 / ref_l2,
                                   err_h1 / ref_h1, s_norm, sstar_norm,
                                   kappa, blocks.peclet))

    rates = {}
    if len(rows) >= 2:
        hs = [r.h for r in rows]
        for col in ("err_l2_B", "err_h1_B", "s_norm", "sstar_norm"):
            vals = [getattr(r, col) for r in rows]
            if all(v > 0 for v in vals):
                rates[col] = estimate_rate(zip(hs, vals))
        if all(r.cond is not None and r.cond > 0 for r in rows):
            rates["cond"] = estimate_rate([(r.h, r.cond) for r in rows])
    return ConvergenceTable(case.name, rows, rates)
