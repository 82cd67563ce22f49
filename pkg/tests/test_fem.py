"""Quadrature, P1 basis machinery, interpolation, projection, norms."""

import math

import numpy as np
import pytest

from ucfem.fem import (FeFunction, edge_rule, interpolate, l2_project,
                       mass_matrix, norms, p1_gradients, quad_points,
                       triangle_geometry, triangle_rule)
from ucfem.mesh import Region, build_unit_square_mesh


def reference_monomial_integral(a, b):
    """Exact integral of x^a y^b over the unit reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", [2, 4])
def test_triangle_rule_monomial_exactness(degree):
    rule = triangle_rule(degree)
    assert np.isclose(rule.weights.sum(), 1.0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = 0.5 * np.sum(rule.weights * rule.points[:, 1] ** a
                               * rule.points[:, 2] ** b)
            assert np.isclose(got, reference_monomial_integral(a, b),
                              atol=1e-14), (a, b)


def test_refined_rule_improves_high_degree():
    # degree-6 monomial: the plain degree-4 rule misses it, one barycentric
    # refinement cuts the error by roughly 2^6
    exact = reference_monomial_integral(6, 0)
    coarse = triangle_rule(4)
    fine = triangle_rule(4, refine=1)
    assert np.isclose(fine.weights.sum(), 1.0)
    err_c = abs(0.5 * np.sum(coarse.weights * coarse.points[:, 1] ** 6)
                - exact)
    err_f = abs(0.5 * np.sum(fine.weights * fine.points[:, 1] ** 6) - exact)
    assert err_f < err_c / 30


@pytest.mark.parametrize("degree", [1, 3, 5])
def test_edge_rule_exactness(degree):
    rule = edge_rule(degree)
    for k in range(degree + 1):
        assert np.isclose(np.sum(rule.weights * rule.points ** k),
                          1.0 / (k + 1), atol=1e-14)


def test_p1_gradients_partition_of_unity():
    rng = np.random.default_rng(11)
    for _ in range(20):
        verts = rng.uniform(0, 1, size=(3, 2))
        try:
            g = p1_gradients(verts)
        except ValueError:
            continue
        assert np.allclose(g.sum(axis=0), 0.0, atol=1e-10)


def test_p1_gradients_exact_for_affine():
    mesh = build_unit_square_mesh(4)
    grads, _ = triangle_geometry(mesh)
    assert grads.shape == (mesh.n_triangles, 3, 2)
    coeffs = 2.0 + 3.0 * mesh.nodes[:, 0] - 0.5 * mesh.nodes[:, 1]
    per_tri = np.einsum("tk,tkd->td", coeffs[mesh.triangles], grads)
    assert np.allclose(per_tri, [3.0, -0.5])
    single = p1_gradients(mesh.nodes[mesh.triangles[0]])
    assert np.allclose(single, grads[0])


def test_quad_points_cover_domain():
    mesh = build_unit_square_mesh(3)
    rule = triangle_rule(2)
    pts = quad_points(mesh, rule)
    assert pts.shape == (mesh.n_triangles, len(rule.weights), 2)
    assert pts.min() >= 0.0 and pts.max() <= 1.0
    # integrating 1 with the mapped rule gives the area
    _, areas = triangle_geometry(mesh)
    total = np.sum(areas[:, None] * rule.weights[None, :])
    assert np.isclose(total, 1.0)


def test_interpolate_exact_for_affine():
    mesh = build_unit_square_mesh(6)
    f = lambda p: 1.0 + 2.0 * p[:, 0] - p[:, 1]
    fh = interpolate(f, mesh)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, size=(200, 2))
    assert np.allclose(fh(pts), f(pts), atol=1e-13)


def test_fe_function_gradient_matches_difference_quotient():
    mesh = build_unit_square_mesh(9)
    f = lambda p: p[:, 0] ** 2 + 0.5 * p[:, 1]
    fh = interpolate(f, mesh)
    pts = np.array([[0.345, 0.551]])
    g = fh.gradient(pts)[0]
    eps = 1e-7
    for d in range(2):
        q = pts.copy()
        q[0, d] += eps
        fd = (fh(q)[0] - fh(pts)[0]) / eps
        assert abs(g[d] - fd) < 1e-5


def test_l2_projection_is_projection_and_orthogonal():
    mesh = build_unit_square_mesh(5)
    u = lambda p: np.sin(2 * p[:, 0]) * p[:, 1]
    ph = l2_project(u, mesh, degree=4)
    again = l2_project(ph, mesh, degree=4)
    assert np.allclose(ph.coefficients, again.coefficients, atol=1e-10)
    # residual u - ph is L2-orthogonal to V_h: M-weighted coefficients of
    # the projection equal the load of u itself
    mass = mass_matrix(mesh)
    rule = triangle_rule(4)
    pts = quad_points(mesh, rule)
    _, areas = triangle_geometry(mesh)
    uvals = u(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    load = np.zeros(mesh.n_nodes)
    local = np.einsum("q,tq,qi,t->ti", rule.weights, uvals, rule.points,
                      areas)
    np.add.at(load, mesh.triangles.ravel(), local.ravel())
    assert np.allclose(mass @ ph.coefficients, load, atol=1e-12)


def test_l2_projection_rate_two_for_smooth_field():
    u = lambda p: 30.0 * p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1])
    errs, hs = [], []
    for n in (8, 16, 32, 64):
        mesh = build_unit_square_mesh(n)
        ph = l2_project(u, mesh, degree=4)
        diff = lambda p, ph=ph: u(p) - ph(p)
        rule = triangle_rule(4, refine=1)
        pts = quad_points(mesh, rule)
        _, areas = triangle_geometry(mesh)
        vals = diff(pts.reshape(-1, 2)).reshape(pts.shape[:2])
        err = np.sqrt(np.sum(areas[:, None] * rule.weights[None, :]
                             * vals ** 2))
        errs.append(err)
        hs.append(1.0 / (n + 1))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_mass_matrix_row_sums_give_areas():
    mesh = build_unit_square_mesh(4)
    mass = mass_matrix(mesh)
    ones = np.ones(mesh.n_nodes)
    assert np.isclose(ones @ (mass @ ones), 1.0)
    assert np.all(mass.diagonal() > 0)


def test_norms_of_known_function_on_subregion():
    mesh = build_unit_square_mesh(64)
    fh = interpolate(lambda p: p[:, 0], mesh)
    box = Region([(0.0, 0.5, 0.0, 1.0)])
    l2, semi, h1 = norms(fh, mesh, region=box, degree=4)
    # integral of x^2 over [0,.5]x[0,1] = 1/24; gradient (1,0) on area 1/2
    assert np.isclose(l2, np.sqrt(1.0 / 24.0), atol=1e-12)
    assert np.isclose(semi, np.sqrt(0.5), atol=1e-12)
    assert np.isclose(h1, np.sqrt(1.0 / 24.0 + 0.5), atol=1e-12)


def test_fe_function_subtraction_and_validation():
    mesh = build_unit_square_mesh(3)
    a = interpolate(lambda p: p[:, 0], mesh)
    b = interpolate(lambda p: p[:, 1], mesh)
    d = a - b
    assert np.allclose(d.coefficients,
                       mesh.nodes[:, 0] - mesh.nodes[:, 1])
    with pytest.raises(ValueError):
        FeFunction(mesh, np.zeros(3))


def test_fe_function_csv_round_trip(tmp_path):
    mesh = build_unit_square_mesh(2)
    fh = interpolate(lambda p: p[:, 0] + 2 * p[:, 1], mesh)
    path = tmp_path / "u.csv"
    fh.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "node,x,y,value"
    assert len(lines) == mesh.n_nodes + 1
    row = lines[4].split(",")
    k = int(row[0])
    assert float(row[3]) == pytest.approx(
        mesh.nodes[k, 0] + 2 * mesh.nodes[k, 1])
    assert "np.float64" not in lines[4]
