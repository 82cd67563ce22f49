"""Structured triangulations of the unit square and axis-aligned box regions.

A mesh with ``n`` cells per side carries ``(n+1)**2`` nodes and ``2*n**2``
triangles.  Each square cell is cut along one diagonal, and the diagonal
direction alternates in a checkerboard pattern so that no two neighbouring
cells share the same split.  Face and boundary-edge connectivity is built
once at construction for use in interior-penalty and boundary assembly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Face",
    "Mesh",
    "Region",
    "UNIT_SQUARE",
    "build_unit_square_mesh",
    "mesh_size",
    "locate_region",
    "locate_points",
]


@dataclass(frozen=True)
class Face:
    """Interior face shared by two triangles.

    ``normal`` is the unit vector pointing from ``left_tri`` into
    ``right_tri``.  Swapping the two triangles while negating the normal
    leaves every assembled jump product unchanged.
    """

    nodes: tuple[int, int]
    normal: np.ndarray
    length: float
    left_tri: int
    right_tri: int


class Mesh:
    """Conforming triangulation of the unit square.

    Attributes
    ----------
    nodes : (n_nodes, 2) array of vertex coordinates.
    triangles : (n_tri, 3) int array, counterclockwise vertex indices.
    tri_areas : (n_tri,) array of (positive) triangle areas.
    face_nodes, face_normals, face_lengths, face_tris :
        interior-face connectivity; ``face_tris[:, 0]`` is the triangle the
        normal points away from, ``face_tris[:, 1]`` the one it points into.
    bnd_nodes, bnd_normals, bnd_lengths, bnd_tris :
        boundary edges with outward unit normals and the owning triangle.
    """

    def __init__(self, cells_per_side: int):
        n = int(cells_per_side)
        if n < 1:
            raise ValueError(f"cells_per_side must be >= 1, got {cells_per_side}")
        self.cells_per_side = n

        side = np.linspace(0.0, 1.0, n + 1)
        xx, yy = np.meshgrid(side, side, indexing="xy")
        # node index = j*(n+1) + i for coordinate (i/n, j/n)
        self.nodes = np.column_stack([xx.ravel(), yy.ravel()])

        tris = np.empty((2 * n * n, 3), dtype=np.int64)
        for j in range(n):
            for i in range(n):
                ll = j * (n + 1) + i
                lr = ll + 1
                ul = ll + (n + 1)
                ur = ul + 1
                c = 2 * (j * n + i)
                if (i + j) % 2 == 0:
                    # diagonal from lower-left to upper-right
                    tris[c] = (ll, lr, ur)
                    tris[c + 1] = (ll, ur, ul)
                else:
                    # diagonal from lower-right to upper-left
                    tris[c] = (ll, lr, ul)
                    tris[c + 1] = (lr, ur, ul)
        self.triangles = tris

        v = self.nodes[tris]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise RuntimeError("mesh construction produced a non-CCW triangle")
        self.tri_areas = 0.5 * det

        self._build_connectivity()
        self._cache: dict = {}

    def _build_connectivity(self):
        owners: dict[tuple[int, int], list[int]] = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (a, b) if a < b else (b, a)
                owners.setdefault(key, []).append(t)

        centroids = self.nodes[self.triangles].mean(axis=1)

        f_nodes, f_norm, f_len, f_tris = [], [], [], []
        b_nodes, b_norm, b_len, b_tris = [], [], [], []
        for (a, b), tris in sorted(owners.items()):
            d = self.nodes[b] - self.nodes[a]
            length = float(np.hypot(d[0], d[1]))
            nrm = np.array([d[1], -d[0]]) / length
            mid = 0.5 * (self.nodes[a] + self.nodes[b])
            if len(tris) == 2:
                t0, t1 = tris
                # orient the normal from t_left into t_right
                if nrm @ (centroids[t1] - mid) > 0:
                    left, right = t0, t1
                else:
                    left, right = t1, t0
                f_nodes.append((a, b))
                f_norm.append(nrm)
                f_len.append(length)
                f_tris.append((left, right))
            elif len(tris) == 1:
                t0 = tris[0]
                if nrm @ (centroids[t0] - mid) > 0:
                    nrm = -nrm
                b_nodes.append((a, b))
                b_norm.append(nrm)
                b_len.append(length)
                b_tris.append(t0)
            else:
                raise RuntimeError(f"edge {(a, b)} owned by {len(tris)} triangles")

        self.face_nodes = np.array(f_nodes, dtype=np.int64)
        self.face_normals = np.array(f_norm)
        self.face_lengths = np.array(f_len)
        self.face_tris = np.array(f_tris, dtype=np.int64)
        self.bnd_nodes = np.array(b_nodes, dtype=np.int64)
        self.bnd_normals = np.array(b_norm)
        self.bnd_lengths = np.array(b_len)
        self.bnd_tris = np.array(b_tris, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def interior_faces(self) -> list[Face]:
        faces = self._cache.get("faces")
        if faces is None:
            faces = [
                Face((int(a), int(b)), nrm, float(ln), int(tl), int(tr))
                for (a, b), nrm, ln, (tl, tr) in zip(
                    self.face_nodes, self.face_normals,
                    self.face_lengths, self.face_tris)
            ]
            self._cache["faces"] = faces
        return faces

    @property
    def boundary_edges(self) -> list[tuple[tuple[int, int], np.ndarray]]:
        return [((int(a), int(b)), nrm)
                for (a, b), nrm in zip(self.bnd_nodes, self.bnd_normals)]

    def summary(self) -> dict:
        """Counts and mesh size, JSON-ready."""
        return {
            "cells_per_side": self.cells_per_side,
            "nodes": self.n_nodes,
            "triangles": self.n_triangles,
            "interior_faces": len(self.face_nodes),
            "boundary_edges": len(self.bnd_nodes),
            "h": mesh_size(self),
        }


def build_unit_square_mesh(cells_per_side: int) -> Mesh:
    """Build the alternating-diagonal triangulation with the given resolution."""
    return Mesh(cells_per_side)


def mesh_size(mesh: Mesh) -> float:
    """Mesh size parameter: inverse square root of the node count.

    For n cells per side this equals 1/(n+1).  The same value enters every
    stabilization weight, the noise amplitude and the convergence plots.
    """
    return 1.0 / np.sqrt(mesh.n_nodes)


class Region:
    """Finite union of closed axis-aligned boxes, minus optional open holes.

    Boxes are given as ``(x0, x1, y0, y1)``.  A point belongs to the region
    when it lies in some box (boundaries included) and strictly inside no
    hole, so the region is a closed subset of the plane.
    """

    def __init__(self, boxes, holes=()):
        self.boxes = tuple(tuple(float(c) for c in b) for b in boxes)
        self.holes = tuple(tuple(float(c) for c in b) for b in holes)
        for x0, x1, y0, y1 in self.boxes + self.holes:
            if x1 < x0 or y1 < y0:
                raise ValueError(f"malformed box ({x0}, {x1}, {y0}, {y1})")
        self.area = self._exact_area()
        if self.area == 0.0:
            warnings.warn("region has zero area", stacklevel=2)

    @property
    def is_empty(self) -> bool:
        return self.area == 0.0

    def contains(self, points) -> np.ndarray:
        """Vectorized membership test; points is an (n, 2) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        for x0, x1, y0, y1 in self.boxes:
            inside |= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        for x0, x1, y0, y1 in self.holes:
            inside &= ~((x > x0) & (x < x1) & (y > y0) & (y < y1))
        return inside

    def _exact_area(self) -> float:
        if not self.boxes:
            return 0.0
        xs = np.unique([b[i] for b in self.boxes + self.holes for i in (0, 1)])
        ys = np.unique([b[i] for b in self.boxes + self.holes for i in (2, 3)])
        if len(xs) < 2 or len(ys) < 2:
            return 0.0
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        wx = np.diff(xs)
        wy = np.diff(ys)
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        centers = np.column_stack([gx.ravel(), gy.ravel()])
        mask = self.contains(centers).reshape(len(cx), len(cy))
        return float(np.einsum("i,j,ij->", wx, wy, mask))

    def __repr__(self):
        return f"Region(boxes={self.boxes}, holes={self.holes})"


UNIT_SQUARE = Region([(0.0, 1.0, 0.0, 1.0)])


def locate_region(mesh: Mesh, region: Region):
    """Return the membership predicate of ``region`` for quadrature points.

    Warns when the region is invisible on this mesh (zero area, hence no
    quadrature point can fall inside it).
    """
    if region.is_empty:
        warnings.warn("region has zero measure on this mesh", stacklevel=2)
    return region.contains


def locate_points(mesh: Mesh, points):
    """Locate points in the structured mesh.

    Returns ``(tri, bary)`` where ``tri`` holds containing-triangle indices
    and ``bary`` the barycentric coordinates with respect to the triangle's
    own vertex order.  Points on shared edges resolve to one of the owners;
    coordinates are clipped to the unit square first.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = mesh.cells_per_side
    x = np.clip(pts[:, 0], 0.0, 1.0)
    y = np.clip(pts[:, 1], 0.0, 1.0)
    i = np.minimum((x * n).astype(np.int64), n - 1)
    j = np.minimum((y * n).astype(np.int64), n - 1)
    xi = x * n - i
    eta = y * n - j
    even = (i + j) % 2 == 0
    # second triangle of the cell lies above its diagonal
    upper = np.where(even, eta > xi, xi + eta > 1.0)
    tri = 2 * (j * n + i) + upper

    v = mesh.nodes[mesh.triangles[tri]]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    r = pts - v[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    bary = np.column_stack([1.0 - l1 - l2, l1, l2])
    return tri, bary
