"""Piecewise-linear (P1) finite element machinery on triangulations.

Quadrature rules, hat-function gradients, nodal interpolation, consistent
L2 projection and region-restricted norms.  All assembly downstream builds
on the cached per-triangle geometry computed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, locate_points

__all__ = [
    "QuadratureRule",
    "triangle_rule",
    "edge_rule",
    "p1_gradients",
    "triangle_geometry",
    "FeFunction",
    "interpolate",
    "mass_matrix",
    "l2_project",
    "norms",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points and weights on a reference element.

    Triangle rules store barycentric points of shape (q, 3); edge rules
    store parameters in [0, 1] of shape (q,).  Weights sum to one so that
    physical integrals are weight-sums scaled by area or length.
    """

    points: np.ndarray
    weights: np.ndarray
    kind: str
    degree: int


# 3-point midpoint rule, exact through degree 2
_TRI_P2 = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
_TRI_W2 = np.full(3, 1.0 / 3.0)

# 6-point rule, exact through degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
_TRI_P4 = np.array([
    [1 - 2 * _A1, _A1, _A1], [_A1, 1 - 2 * _A1, _A1], [_A1, _A1, 1 - 2 * _A1],
    [1 - 2 * _A2, _A2, _A2], [_A2, 1 - 2 * _A2, _A2], [_A2, _A2, 1 - 2 * _A2],
])
_TRI_W4 = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


def triangle_rule(degree: int = 4, refine: int = 0) -> QuadratureRule:
    """Symmetric triangle rule exact at least to the requested degree.

    ``refine`` applies uniform 4-way subdivision levels to the rule; this
    keeps the polynomial exactness while sampling discontinuous weights
    (region indicators) on a finer grid.
    """
    if degree <= 2:
        pts, wts, deg = _TRI_P2, _TRI_W2, 2
    elif degree <= 4:
        pts, wts, deg = _TRI_P4, _TRI_W4, 4
    else:
        raise ValueError(f"no triangle rule of degree {degree} available")
    for _ in range(refine):
        pts, wts = _subdivide(pts, wts)
    return QuadratureRule(pts, wts, "triangle", deg)


def _subdivide(pts, wts):
    m = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    e = np.eye(3)
    corners = [
        np.array([e[0], m[0], m[2]]),
        np.array([m[0], e[1], m[1]]),
        np.array([m[2], m[1], e[2]]),
        np.array([m[0], m[1], m[2]]),
    ]
    new_pts = np.vstack([pts @ c for c in corners])
    new_wts = np.tile(wts / 4.0, 4)
    return new_pts, new_wts


def edge_rule(degree: int = 4) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact at least to the given degree."""
    if degree < 1:
        raise ValueError("degree must be positive")
    npts = (degree + 2) // 2
    t, w = np.polynomial.legendre.leggauss(npts)
    return QuadratureRule((t + 1.0) / 2.0, w / 2.0, "edge", 2 * npts - 1)


def p1_gradients(vertices) -> np.ndarray:
    """Constant gradients of the three hat functions on one triangle.

    ``vertices`` is a (3, 2) array; rows of the result follow the vertex
    order.  Degenerate (zero-area) triangles are rejected.
    """
    v = np.asarray(vertices, dtype=float)
    det = (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) \
        - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0])
    if abs(det) < 1e-14:
        raise ValueError("degenerate triangle")
    g = np.empty((3, 2))
    for i in range(3):
        d = v[(i + 2) % 3] - v[(i + 1) % 3]
        g[i, 0] = -d[1] / det
        g[i, 1] = d[0] / det
    return g


def triangle_geometry(mesh: Mesh):
    """Cached per-triangle hat gradients (t, 3, 2) and areas (t,)."""
    cached = mesh._cache.get("p1geom")
    if cached is None:
        v = mesh.nodes[mesh.triangles]
        det = 2.0 * mesh.tri_areas
        grads = np.empty((mesh.n_triangles, 3, 2))
        for i in range(3):
            d = v[:, (i + 2) % 3] - v[:, (i + 1) % 3]
            grads[:, i, 0] = -d[:, 1] / det
            grads[:, i, 1] = d[:, 0] / det
        cached = (grads, mesh.tri_areas)
        mesh._cache["p1geom"] = cached
    return cached


def quad_points(mesh: Mesh, rule: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape (n_tri, q, 2)."""
    key = ("qpts", rule.points.tobytes())
    pts = mesh._cache.get(key)
    if pts is None:
        pts = np.einsum("qk,tkd->tqd", rule.points, mesh.nodes[mesh.triangles])
        mesh._cache[key] = pts
    return pts


class FeFunction:
    """Piecewise-linear function given by nodal coefficients on a mesh."""

    def __init__(self, mesh: Mesh, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (mesh.n_nodes,):
            raise ValueError(
                f"expected {mesh.n_nodes} coefficients, got {coefficients.shape}")
        self.mesh = mesh
        self.coefficients = coefficients

    def __call__(self, points) -> np.ndarray:
        tri, bary = locate_points(self.mesh, points)
        return np.einsum("nk,nk->n", bary,
                         self.coefficients[self.mesh.triangles[tri]])

    def gradient(self, points) -> np.ndarray:
        """Piecewise-constant gradient evaluated pointwise, shape (n, 2)."""
        tri, _ = locate_points(self.mesh, points)
        grads, _ = triangle_geometry(self.mesh)
        return np.einsum("nk,nkd->nd", self.coefficients[self.mesh.triangles[tri]],
                         grads[tri])

    def __sub__(self, other):
        if not isinstance(other, FeFunction) or other.mesh is not self.mesh:
            return NotImplemented
        return FeFunction(self.mesh, self.coefficients - other.coefficients)

    def to_csv(self, path):
        """Write node index, coordinates and value, one row per node."""
        with open(path, "w") as fh:
            fh.write("node,x,y,value\n")
            for k, ((x, y), c) in enumerate(zip(self.mesh.nodes,
                                                self.coefficients)):
                fh.write(f"{k},{float(x)!r},{float(y)!r},{float(c)!r}\n")


def interpolate(u, mesh: Mesh) -> FeFunction:
    """Nodal interpolant of a callable; exact for affine inputs."""
    return FeFunction(mesh, np.asarray(u(mesh.nodes), dtype=float))


def mass_matrix(mesh: Mesh, degree: int = 4) -> sp.csr_matrix:
    """Consistent P1 mass matrix assembled with the given quadrature degree."""
    rule = triangle_rule(degree)
    _, areas = triangle_geometry(mesh)
    local = np.einsum("q,qi,qj->ij", rule.weights, rule.points, rule.points)
    vals = areas[:, None, None] * local[None, :, :]
    return _scatter(mesh, vals)


def _scatter(mesh: Mesh, local_blocks) -> sp.csr_matrix:
    """Accumulate (t, 3, 3) local blocks into a global sparse matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.coo_matrix((local_blocks.ravel(), (rows, cols)),
                        shape=(mesh.n_nodes, mesh.n_nodes))
    return mat.tocsr()


def l2_project(u, mesh: Mesh, degree: int = 4) -> FeFunction:
    """L2 projection onto the P1 space via a consistent mass-matrix solve."""
    rule = triangle_rule(degree)
    _, areas = triangle_geometry(mesh)
    pts = quad_points(mesh, rule)
    uvals = np.asarray(u(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    rhs_local = np.einsum("q,tq,qi->ti", rule.weights, uvals, rule.points)
    rhs = np.zeros(mesh.n_nodes)
    np.add.at(rhs, mesh.triangles.ravel(), (areas[:, None] * rhs_local).ravel())

    mm = mass_matrix(mesh, degree)
    coeffs = spla.spsolve(mm.tocsc(), rhs)
    scale = np.linalg.norm(rhs)
    if scale > 0:
        rel = np.linalg.norm(mm @ coeffs - rhs) / scale
        if rel > 1e-12:
            raise RuntimeError(f"mass solve residual {rel:.3e} exceeds 1e-12")
    return FeFunction(mesh, coeffs)


def norms(v, mesh: Mesh | None = None, region=None, gradient=None,
          degree: int = 4):
    """L2 norm, H1 seminorm and full H1 norm, optionally region-restricted.

    ``v`` is an FeFunction (its mesh is used) or a callable on (n, 2) point
    arrays, in which case ``mesh`` is required and ``gradient`` must supply
    the (n, 2)-valued derivative.  ``region`` restricts the quadrature to
    points inside the region.
    """
    if isinstance(v, FeFunction):
        mesh = v.mesh
    elif mesh is None:
        raise ValueError("a mesh is required for callable inputs")
    elif gradient is None:
        raise ValueError("callable inputs need a gradient callable")

    rule = triangle_rule(degree)
    grads, areas = triangle_geometry(mesh)
    pts = quad_points(mesh, rule)
    flat = pts.reshape(-1, 2)

    if isinstance(v, FeFunction):
        cf = v.coefficients[mesh.triangles]
        vals = np.einsum("qk,tk->tq", rule.points, cf)
        gr = np.einsum("tk,tkd->td", cf, grads)
        gsq = np.broadcast_to(np.einsum("td,td->t", gr, gr)[:, None],
                              vals.shape)
    else:
        vals = np.asarray(v(flat), dtype=float).reshape(pts.shape[:2])
        gv = np.asarray(gradient(flat), dtype=float).reshape(*pts.shape[:2], 2)
        gsq = np.einsum("tqd,tqd->tq", gv, gv)

    if region is not None:
        mask = region.contains(flat).reshape(pts.shape[:2])
    else:
        mask = np.ones(pts.shape[:2], dtype=bool)

    w = rule.weights[None, :] * areas[:, None] * mask
    l2_sq = float(np.sum(w * vals**2))
    semi_sq = float(np.sum(w * gsq))
    l2 = np.sqrt(l2_sq)
    semi = np.sqrt(semi_sq)
    return l2, semi, np.sqrt(l2_sq + semi_sq)
