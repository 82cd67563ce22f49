"""Assembly and direct solution of the coupled saddle-point system.

Stacking the primal unknown u and the dual variable z, the discrete
optimality system reads

    [ S   A^T ] [u]   [b_data  ]
    [ A  -S_* ] [z] = [b_source]

with S the primal stabilizer (data mass + jump penalty), A the PDE form
and S_* the dual stabilizer.  The matrix is symmetric (indefinite) and is
factorized directly.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import FeFunction
from .mesh import Mesh

__all__ = [
    "SaddleSystem",
    "Solution",
    "build_system",
    "solve",
    "condition_number",
    "exact_condition_number",
    "estimate_condition_number",
    "CondEstimate",
    "NumericalFailure",
]


class NumericalFailure(RuntimeError):
    """Raised when factorization or residual checks fail."""


@dataclass
class SaddleSystem:
    """Symmetric block system; unknowns are stacked as (u, z)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    n: int

    def symmetry_defect(self) -> float:
        """Relative max-norm asymmetry of the assembled matrix."""
        diff = (self.matrix - self.matrix.T).tocoo()
        num = np.abs(diff.data).max() if diff.nnz else 0.0
        den = np.abs(self.matrix.data).max() if self.matrix.nnz else 1.0
        return float(num / den)


def build_system(pde, primal, dual, b_data, b_source) -> SaddleSystem:
    """Assemble the symmetric arrangement from the individual blocks."""
    n = pde.shape[0]
    for name, block in (("pde", pde), ("primal", primal), ("dual", dual)):
        if block.shape != (n, n):
            raise ValueError(f"{name} block has shape {block.shape}, "
                             f"expected {(n, n)}")
    if len(b_data) != n or len(b_source) != n:
        raise ValueError("right-hand side length mismatch")
    mat = sp.bmat([[primal, pde.T], [pde, -dual]], format="csr")
    rhs = np.concatenate([b_data, b_source])
    return SaddleSystem(mat, rhs, n)


@dataclass
class Solution:
    """Primal/dual pair with solver diagnostics."""

    u: FeFunction
    z: FeFunction
    diagnostics: dict


def solve(system: SaddleSystem, mesh: Mesh) -> Solution:
    """Direct sparse LU solve with one step of iterative refinement.

    The relative algebraic residual is checked against 1e-8; failure to
    reach it raises NumericalFailure.
    """
    t0 = time.perf_counter()
    try:
        lu = spla.splu(system.matrix.tocsc())
    except RuntimeError as exc:
        raise NumericalFailure(f"factorization failed: {exc}") from exc
    t_factor = time.perf_counter() - t0

    t0 = time.perf_counter()
    x = lu.solve(system.rhs)
    bnorm = np.linalg.norm(system.rhs)
    rel = 0.0
    if bnorm > 0:
        for _ in range(2):
            r = system.rhs - system.matrix @ x
            rel = np.linalg.norm(r) / bnorm
            if rel <= 1e-12:
                break
            x = x + lu.solve(r)
        r = system.rhs - system.matrix @ x
        rel = np.linalg.norm(r) / bnorm
        if rel > 1e-8:
            raise NumericalFailure(f"relative residual {rel:.3e} exceeds 1e-8")
    t_solve = time.perf_counter() - t0

    n = system.n
    diagnostics = {
        "dimension": 2 * n,
        "nnz": int(system.matrix.nnz),
        "relative_residual": float(rel),
        "symmetry_defect": system.symmetry_defect(),
        "factor_seconds": t_factor,
        "solve_seconds": t_solve,
    }
    return Solution(FeFunction(mesh, x[:n]), FeFunction(mesh, x[n:]),
                    diagnostics)


def exact_condition_number(system: SaddleSystem) -> float:
    """Two-norm condition number by dense SVD; guarded to dimension 2000."""
    dim = system.matrix.shape[0]
    if dim > 2000:
        raise ValueError(f"dense SVD guarded to dimension 2000, got {dim}")
    svals = np.linalg.svd(system.matrix.toarray(), compute_uv=False)
    if svals[-1] == 0:
        raise NumericalFailure("system matrix is singular")
    return float(svals[0] / svals[-1])


@dataclass
class CondEstimate:
    """Iterative condition-number estimate with convergence metadata.

    ``bracket`` holds the last two iterates of the condition estimate; it
    tracks progress, it is not a rigorous enclosure.
    """

    value: float
    sigma_max: float
    sigma_min: float
    converged: bool
    bracket: tuple
    iterations: tuple

    def __float__(self):
        return self.value


def _power_sigma_max(mat, tol, max_iter, rng):
    """Power iteration on M^T M; returns (estimate, previous, its, converged)."""
    v = rng.standard_normal(mat.shape[0])
    v /= np.linalg.norm(v)
    est = prev = 0.0
    for it in range(1, max_iter + 1):
        w = mat @ v
        s = np.linalg.norm(w)
        w = mat.T @ w
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0, 0.0, it, True
        v = w / nw
        prev, est = est, s
        if prev > 0 and abs(est - prev) <= tol * est:
            return est, prev, it, True
    return est, prev, max_iter, False


def _inverse_sigma_min(lu, dim, tol, max_iter, rng):
    """Inverse iteration on M^T M through the LU factors."""
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = prev = np.inf
    for it in range(1, max_iter + 1):
        y = lu.solve(v, trans="T")
        s = 1.0 / np.linalg.norm(y)
        w = lu.solve(y)
        v = w / np.linalg.norm(w)
        prev, est = est, s
        if np.isfinite(prev) and abs(est - prev) <= tol * est:
            return est, prev, it, True
    return est, prev, max_iter, False


def estimate_condition_number(system: SaddleSystem, tol: float = 1e-3,
                              max_iter: int = 5000,
                              seed: int = 0) -> CondEstimate:
    """Estimate the two-norm condition number without dense linear algebra.

    The largest singular value comes from power iteration on M^T M, the
    smallest from inverse iteration through the sparse LU factorization.
    Hitting the iteration cap emits a warning and marks the estimate as
    unconverged.
    """
    mat = system.matrix.tocsc()
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:
        raise NumericalFailure(f"factorization failed: {exc}") from exc

    rng = np.random.default_rng(seed)
    smax, smax_prev, it_max, ok_max = _power_sigma_max(mat, tol, max_iter, rng)
    smin, smin_prev, it_min, ok_min = _inverse_sigma_min(lu, mat.shape[0], tol,
                                                         max_iter, rng)
    converged = ok_max and ok_min
    value = smax / smin
    lo = (smax_prev if np.isfinite(smax_prev) else smax) \
        / (smin_prev if np.isfinite(smin_prev) else smin)
    bracket = (min(lo, value), max(lo, value))
    if not converged:
        warnings.warn(
            f"condition estimate hit the iteration cap ({max_iter}); "
            f"best bracket {bracket}", stacklevel=2)
    return CondEstimate(float(value), float(smax), float(smin), converged,
                        bracket, (it_max, it_min))


def condition_number(system: SaddleSystem, mode: str = "exact",
                     tol: float = 1e-3, max_iter: int = 5000) -> float:
    """Condition number in the requested mode ('exact' or 'estimate')."""
    if mode == "exact":
        return exact_condition_number(system)
    if mode == "estimate":
        return estimate_condition_number(system, tol, max_iter).value
    raise ValueError(f"unknown mode {mode!r}")
