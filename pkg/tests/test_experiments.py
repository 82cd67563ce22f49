"""Benchmark definitions, noise model, rate fitting, and ladder runs."""

import io

import numpy as np
import pytest

from ucfem.experiments import (CSV_HEADER, DEFAULT_LADDER, NoiseModel,
                               apply_noise, builtin_cases, derive_source,
                               error_norms, estimate_rate, get_case,
                               polynomial_bump, run_case, ExactSolution)
from ucfem.fem import interpolate
from ucfem.forms import constant_field, swirl_field
from ucfem.mesh import Region, build_unit_square_mesh, mesh_size


def gauss_grid(n=40):
    """Tensor Gauss-Legendre rule on the unit square."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w).ravel()
    return np.column_stack([xx.ravel(), yy.ravel()]), ww


def test_bump_has_unit_l2_norm_and_vanishes_on_boundary():
    bump = polynomial_bump()
    pts, w = gauss_grid()
    assert np.isclose(w @ bump.value(pts) ** 2, 1.0, atol=1e-12)
    edge = np.linspace(0.0, 1.0, 17)
    for boundary in (np.column_stack([edge, np.zeros_like(edge)]),
                     np.column_stack([edge, np.ones_like(edge)]),
                     np.column_stack([np.zeros_like(edge), edge]),
                     np.column_stack([np.ones_like(edge), edge])):
        assert np.abs(bump.value(boundary)).max() < 1e-14


def test_bump_gradient_and_laplacian_match_finite_differences():
    bump = polynomial_bump()
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.1, 0.9, size=(40, 2))
    eps = 1e-5
    ex = np.array([eps, 0.0])
    ey = np.array([0.0, eps])
    gx = (bump.value(pts + ex) - bump.value(pts - ex)) / (2 * eps)
    gy = (bump.value(pts + ey) - bump.value(pts - ey)) / (2 * eps)
    grad = bump.gradient(pts)
    assert np.abs(grad[:, 0] - gx).max() < 1e-7
    assert np.abs(grad[:, 1] - gy).max() < 1e-7
    lap_fd = (bump.value(pts + ex) + bump.value(pts - ex)
              + bump.value(pts + ey) + bump.value(pts - ey)
              - 4 * bump.value(pts)) / eps ** 2
    assert np.abs(bump.laplacian(pts) - lap_fd).max() < 1e-4


@pytest.mark.parametrize("beta", [constant_field(1.0, 0.0), swirl_field()])
def test_derive_source_matches_operator_applied_to_exact(beta):
    bump = polynomial_bump()
    source = derive_source(bump, 2.5, beta)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.05, 0.95, size=(30, 2))
    adv = np.einsum("nd,nd->n", np.asarray(beta(pts), dtype=float),
                    bump.gradient(pts))
    expected = -2.5 * bump.laplacian(pts) + adv
    assert np.allclose(source(pts), expected, atol=1e-13)


def test_noise_respects_amplitude_support_and_seed():
    case = get_case("ex1-const")
    mesh = build_unit_square_mesh(16)
    h = mesh_size(mesh)
    data = interpolate(case.exact.value, mesh)
    omega = case.spec.omega
    inside = omega.contains(mesh.nodes)
    assert inside.any() and not inside.all()

    for law in (1.0, 0.5):
        noisy = apply_noise(data, NoiseModel(law=law, seed=3), omega, h)
        delta = noisy.coefficients - data.coefficients
        assert np.abs(delta[~inside]).max() == 0.0
        assert np.abs(delta[inside]).max() <= h ** law
        assert np.abs(delta[inside]).max() > 0.0
        again = apply_noise(data, NoiseModel(law=law, seed=3), omega, h)
        assert np.array_equal(noisy.coefficients, again.coefficients)

    a = apply_noise(data, NoiseModel(law=1.0, seed=3), omega, h)
    b = apply_noise(data, NoiseModel(law=1.0, seed=4), omega, h)
    assert not np.array_equal(a.coefficients, b.coefficients)


def test_noise_draws_differ_across_meshes_with_same_seed():
    case = get_case("ex1-const")
    noise = NoiseModel(law=1.0, seed=0)
    deltas = []
    for n in (16, 32):
        mesh = build_unit_square_mesh(n)
        data = interpolate(case.exact.value, mesh)
        noisy = apply_noise(data, noise, case.spec.omega, mesh_size(mesh))
        deltas.append(noisy.coefficients - data.coefficients)
    inside16 = case.spec.omega.contains(build_unit_square_mesh(16).nodes)
    # same nodes exist on both meshes, but draws are independent per mesh
    assert deltas[0].shape != deltas[1].shape
    assert np.abs(deltas[0]).max() > 0 and np.abs(deltas[1]).max() > 0


def test_builtin_case_registry():
    cases = builtin_cases()
    names = [c.name for c in cases]
    assert names == ["ex1-const", "ex1-swirl", "ex2-const", "ex2-swirl",
                     "ex3-const", "ex3-swirl", "ex1-const-noise-h",
                     "ex1-const-noise-sqrt"]
    for case in cases:
        assert case.spec.mu == 1.0
        assert case.spec.gamma == 1e-5
        assert case.spec.gamma_star == 1.0
        assert case.spec.boundary_factor == 50.0
        assert case.ladder == DEFAULT_LADDER == (8, 16, 32, 64, 128)
        assert case.spec.beta_sup in (1.0, 200.0)
    assert get_case("ex1-const-noise-h").noise.law == 1.0
    assert get_case("ex1-const-noise-sqrt").noise.law == 0.5
    with pytest.raises(KeyError):
        get_case("not-a-case")


def test_case_geometries_have_expected_areas():
    ex1 = get_case("ex1-const").spec
    assert ex1.omega.area == pytest.approx(0.25 * 0.25)
    assert ex1.target.area == pytest.approx(0.25 * 0.25)
    ex2 = get_case("ex2-const").spec
    assert ex2.omega.area == pytest.approx(2 * 0.125 * 0.2)
    assert ex2.target.area == pytest.approx(0.5 * 0.2)
    ex3 = get_case("ex3-const").spec
    assert ex3.omega.area == pytest.approx(1.0 - 0.875 * 0.75)
    assert ex3.target.area == pytest.approx(1.0 - 0.125 * 0.75)
    # measurement and evaluation regions are disjoint in the first pair
    rng = np.random.default_rng(9)
    pts = rng.uniform(size=(2000, 2))
    both = ex1.omega.contains(pts) & ex1.target.contains(pts)
    assert not both.any()


def test_estimate_rate_recovers_exact_power_laws():
    hs = [1.0 / (n + 1) for n in (8, 16, 32, 64)]
    for p in (0.5, 1.0, 2.0):
        fit = estimate_rate([(h, 3.7 * h ** p) for h in hs])
        assert fit.slope == pytest.approx(p, abs=1e-12)
        assert len(fit.per_step) == 3
        assert all(s == pytest.approx(p, abs=1e-12) for s in fit.per_step)
    with pytest.raises(ValueError):
        estimate_rate([(0.1, 1.0)])
    with pytest.raises(ValueError):
        estimate_rate([(0.1, 1.0), (0.05, 0.0)])


def test_error_norms_affine_oracle():
    mesh = build_unit_square_mesh(12)
    affine = ExactSolution(
        value=lambda p: np.atleast_2d(p)[:, 0],
        gradient=lambda p: np.broadcast_to(
            np.array([1.0, 0.0]), (len(np.atleast_2d(p)), 2)),
        laplacian=lambda p: np.zeros(len(np.atleast_2d(p))))
    fe = interpolate(affine.value, mesh)
    err_l2, err_h1, ref_l2, ref_h1 = error_norms(affine, fe, None)
    assert err_l2 < 1e-14 and err_h1 < 1e-13
    assert ref_l2 == pytest.approx(np.sqrt(1.0 / 3.0), abs=1e-12)
    assert ref_h1 == pytest.approx(np.sqrt(1.0 / 3.0 + 1.0), abs=1e-12)
    # restriction to an aligned half square halves the squared norms
    half = Region([(0.0, 0.5, 0.0, 1.0)])
    _, _, ref_l2_half, _ = error_norms(affine, fe, half)
    assert ref_l2_half == pytest.approx(np.sqrt(1.0 / 24.0), abs=1e-12)


def test_run_case_argument_validation():
    case = get_case("ex1-const")
    with pytest.raises(ValueError):
        run_case(case, cond="sometimes")
    with pytest.raises(ValueError):
        run_case(case, projection="h1")
    with pytest.raises(ValueError):
        run_case(case, h1="broken")


def test_run_case_short_ladder_basics():
    case = get_case("ex1-const")
    seen = []
    table = run_case(case, ladder=(8, 16), cond="exact",
                     solution_hook=lambda n, mesh, sol: seen.append(n))
    assert seen == [8, 16]
    assert [r.N for r in table.rows] == [8, 16]
    assert table.rows[0].h == pytest.approx(1.0 / 9.0)
    assert table.rows[1].err_l2_B < table.rows[0].err_l2_B
    for row in table.rows:
        assert row.err_l2_B > 0 and row.err_h1_B > 0
        assert row.s_norm > 0 and row.sstar_norm > 0
        assert row.cond > 1.0
        assert row.peclet == pytest.approx(case.spec.beta_sup * row.h)
    assert set(table.rates) == {"err_l2_B", "err_h1_B", "s_norm",
                                "sstar_norm", "cond"}
    rd = table.rates_dict()
    assert isinstance(rd["err_l2_B"]["slope"], float)
    assert len(rd["err_l2_B"]["per_step"]) == 1


def test_run_case_noisy_is_deterministic():
    case = get_case("ex1-const-noise-sqrt")
    t1 = run_case(case, ladder=(8,))
    t2 = run_case(case, ladder=(8,))
    r1, r2 = t1.rows[0], t2.rows[0]
    assert (r1.err_l2_B, r1.err_h1_B, r1.s_norm, r1.sstar_norm) == \
        (r2.err_l2_B, r2.err_h1_B, r2.s_norm, r2.sstar_norm)


def test_convergence_table_csv_format():
    case = get_case("ex1-const")
    table = run_case(case, ladder=(8, 16))
    text = table.to_csv_string()
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert "np.float64" not in text
    first = lines[1].split(",")
    assert int(first[0]) == 8
    assert float(first[1]) == pytest.approx(1.0 / 9.0)
    # cond column stays empty when not requested
    assert first[6] == ""
    buf = io.StringIO()
    table.to_csv(buf)
    assert buf.getvalue() == text
