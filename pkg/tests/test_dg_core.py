"""Modal basis, projection, residual (against an independent mean-update
oracle), SSP stepping, and the step controller."""

import math

import numpy as np
import pytest

from bpdg.decomposition import SpeedRatios, optimal_2d
from bpdg.dg_core import (
    Basis2D,
    DGField,
    InflowSegment,
    Mesh2D,
    OUTFLOW,
    PERIODIC,
    SSPRK3,
    SSPRK4,
    error_norms,
    evaluate,
    global_max_speeds,
    project,
    semidiscrete_residual,
    ssp_step,
    step_controller,
)
from bpdg.limiters import LimiterChain, build_node_set
from bpdg.physics import AdvectionModel, BoxScalar, BurgersModel, EulerModel
from bpdg.quadrature import gauss_rule


def _periodic_mesh(n, lo=-1.0, hi=1.0):
    return Mesh2D(lo, hi, lo, hi, n, n)


def _sine(x, y):
    return np.sin(np.pi * (x + y))[..., None]


# ------------------------------------------------------------------- basis


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_gram_matrix_is_identity(k):
    basis = Basis2D(k)
    g = gauss_rule(k + 2)
    xi, eta = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    offsets = np.column_stack([xi.ravel(), eta.ravel()])
    weights = np.outer(g.weights, g.weights).ravel()
    phi = basis.eval_modes(offsets)
    gram = np.einsum("ag,bg,g->ab", phi, phi, weights)
    np.testing.assert_allclose(gram, np.eye(basis.n_modes), atol=1e-13)


def test_mode_zero_is_constant_one():
    basis = Basis2D(3)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, (20, 2))
    np.testing.assert_allclose(basis.eval_modes(pts)[0], 1.0, atol=1e-15)


# -------------------------------------------------------------- projection


def test_project_constant():
    mesh = _periodic_mesh(4)
    basis = Basis2D(2)
    model = AdvectionModel()
    field = project(lambda x, y: np.ones(np.broadcast_shapes(x.shape, y.shape))[..., None],
                    mesh, basis, model)
    np.testing.assert_allclose(field.coeffs[:, :, 0, 0], 1.0, atol=1e-14)
    np.testing.assert_allclose(field.coeffs[:, :, 1:, 0], 0.0, atol=1e-14)


def test_project_polynomial_round_trip():
    # any total-degree-3 polynomial is reproduced exactly by the k=3 space
    rng = np.random.default_rng(5)
    coefs = rng.normal(size=10)
    exps = [(a, b) for d in range(4) for a in range(d + 1) for b in [d - a]]

    def poly(x, y):
        out = sum(c * x**a * y**b for c, (a, b) in zip(coefs, exps))
        return out[..., None]

    mesh = _periodic_mesh(3)
    field = project(poly, mesh, Basis2D(3), AdvectionModel())
    for i, j, xi, eta in [(0, 0, 0.13, -0.41), (2, 1, -0.5, 0.5), (1, 2, 0.0, 0.27)]:
        x = mesh.x_centers[i] + xi * mesh.dx
        y = mesh.y_centers[j] + eta * mesh.dy
        got = evaluate(field, i, j, (xi, eta))[0]
        assert got == pytest.approx(poly(np.array(x), np.array(y))[0], abs=1e-12)


def test_project_sine_averages_in_bounds():
    mesh = _periodic_mesh(50)
    field = project(_sine, mesh, Basis2D(2), AdvectionModel())
    means = field.cell_averages
    assert means.min() >= -1.0 and means.max() <= 1.0


def test_evaluate_affine_reproduction_and_bounds_check():
    mesh = _periodic_mesh(5, 0.0, 1.0)
    field = project(lambda x, y: (x + 0.0 * y)[..., None], mesh, Basis2D(2), AdvectionModel())
    val = evaluate(field, 2, 3, (0.25, -0.1))[0]
    assert val == pytest.approx(mesh.x_centers[2] + 0.25 * mesh.dx, abs=1e-13)
    with pytest.raises(IndexError):
        evaluate(field, 5, 0, (0.0, 0.0))


# ---------------------------------------------- residual vs mean-update oracle


def _mean_rate_oracle(field, alphas):
    """Flux-difference evolution of the cell averages, built only from
    evaluate() and the face Gauss rule: an independent check on the mode-0
    row of the weak-form residual."""
    from bpdg.physics import lax_friedrichs_flux

    mesh, basis, model = field.mesh, field.basis, field.model
    g = gauss_rule(basis.k + 1)
    nx, ny, m = mesh.nx, mesh.ny, model.m
    rate = np.zeros((nx, ny, m))
    for i in range(nx):
        for j in range(ny):
            for q, (node, w) in enumerate(zip(g.nodes, g.weights)):
                # x faces (periodic neighbors)
                u_m = evaluate(field, i, j, (0.5, node))
                u_p = evaluate(field, (i + 1) % nx, j, (-0.5, node))
                f_right = lax_friedrichs_flux(model, u_m, u_p, 0, alphas[0])
                u_m = evaluate(field, (i - 1) % nx, j, (0.5, node))
                u_p = evaluate(field, i, j, (-0.5, node))
                f_left = lax_friedrichs_flux(model, u_m, u_p, 0, alphas[0])
                rate[i, j] -= w * (f_right - f_left) / mesh.dx
                # y faces
                u_m = evaluate(field, i, j, (node, 0.5))
                u_p = evaluate(field, i, (j + 1) % ny, (node, -0.5))
                f_top = lax_friedrichs_flux(model, u_m, u_p, 1, alphas[1])
                u_m = evaluate(field, i, (j - 1) % ny, (node, 0.5))
                u_p = evaluate(field, i, j, (node, -0.5))
                f_bot = lax_friedrichs_flux(model, u_m, u_p, 1, alphas[1])
                rate[i, j] -= w * (f_top - f_bot) / mesh.dy
    return rate


def test_mean_equation_equivalence_advection():
    mesh = _periodic_mesh(10)
    field = project(_sine, mesh, Basis2D(2), AdvectionModel())
    alphas = global_max_speeds(field)
    rate = semidiscrete_residual(field, alphas)
    oracle = _mean_rate_oracle(field, alphas)
    np.testing.assert_allclose(rate[:, :, 0, :], oracle, atol=1e-13)


def test_mean_equation_equivalence_random_burgers():
    mesh = _periodic_mesh(6)
    basis = Basis2D(3)
    model = BurgersModel(BoxScalar(-2.0, 2.0))
    rng = np.random.default_rng(9)
    coeffs = 0.2 * rng.normal(size=(6, 6, basis.n_modes, 1))
    field = DGField(coeffs, basis, mesh, model)
    alphas = global_max_speeds(field)
    rate = semidiscrete_residual(field, alphas)
    oracle = _mean_rate_oracle(field, alphas)
    np.testing.assert_allclose(rate[:, :, 0, :], oracle, atol=1e-13)


def test_constant_field_zero_rate():
    mesh = _periodic_mesh(8)
    basis = Basis2D(2)
    model = AdvectionModel()
    coeffs = np.zeros((8, 8, basis.n_modes, 1))
    coeffs[:, :, 0, 0] = 0.37
    field = DGField(coeffs, basis, mesh, model)
    rate = semidiscrete_residual(field, (1.0, 1.0))
    np.testing.assert_allclose(rate, 0.0, atol=1e-13)


def test_burgers_shock_field_finite_rates():
    mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, 10, 10,
                  bc_left=OUTFLOW, bc_right=OUTFLOW, bc_bottom=OUTFLOW, bc_top=OUTFLOW)
    model = BurgersModel(BoxScalar(-1.0, 0.8))

    def step_data(x, y):
        return np.where(np.broadcast_to(x, np.broadcast_shapes(x.shape, y.shape)) < 0.5,
                        0.8, -1.0)[..., None]

    field = project(step_data, mesh, Basis2D(2), model)
    alphas = global_max_speeds(field)
    rate = semidiscrete_residual(field, alphas)
    assert np.all(np.isfinite(rate))


def test_conservation_over_a_step():
    mesh = _periodic_mesh(12)
    model = BurgersModel(BoxScalar(-2.0, 2.0))
    field = project(lambda x, y: (0.5 * np.sin(np.pi * (x + y)))[..., None],
                    mesh, Basis2D(2), model)
    total0 = field.cell_averages.sum()
    stepped = ssp_step(field, SSPRK3, 1e-3)
    total1 = stepped.cell_averages.sum()
    assert abs(total1 - total0) <= 1e-12 * max(1.0, abs(total0))


# ----------------------------------------------------------- time stepping


def test_ssp_coefficients():
    assert SSPRK3.ssp_coefficient == pytest.approx(1.0, abs=1e-14)
    assert SSPRK4.ssp_coefficient == pytest.approx(1.508, abs=1e-3)


def test_ssp_step_constant_identity():
    mesh = _periodic_mesh(6)
    basis = Basis2D(2)
    coeffs = np.zeros((6, 6, basis.n_modes, 1))
    coeffs[:, :, 0, 0] = -0.2
    field = DGField(coeffs, basis, mesh, AdvectionModel())
    for scheme in (SSPRK3, SSPRK4):
        out = ssp_step(field, scheme, 0.01)
        np.testing.assert_allclose(out.coeffs, field.coeffs, atol=1e-13)


def test_ssp_step_rejects_nonpositive_dt():
    mesh = _periodic_mesh(4)
    field = project(_sine, mesh, Basis2D(2), AdvectionModel())
    with pytest.raises(ValueError):
        ssp_step(field, SSPRK3, 0.0)


def test_bp_means_stay_in_box_under_optimal_policy():
    mesh = _periodic_mesh(20)
    model = AdvectionModel(region=BoxScalar(-1.0, 1.0))
    field = project(_sine, mesh, Basis2D(2), model)
    ratios = SpeedRatios((1.0 / mesh.dx, 1.0 / mesh.dy))
    chain = LimiterChain(region=model.region,
                         node_set=build_node_set(optimal_2d(2, ratios), 2))
    field = chain(field)
    for _ in range(20):
        dt = step_controller("optimal", field, SSPRK3)
        field = ssp_step(field, SSPRK3, dt, chain)
        means = field.cell_averages
        assert means.min() >= -1.0 - 1e-12 and means.max() <= 1.0 + 1e-12


# ---------------------------------------------------------- step controller


def _unit_advection_field(n=10):
    mesh = Mesh2D(0.0, 1.0, 0.0, 1.0, n, n)
    return project(_sine, mesh, Basis2D(2), AdvectionModel(c=(1.0, 1.0)))


def test_step_controller_policies_match_table():
    field = _unit_advection_field(10)
    h = 0.1
    assert step_controller("optimal", field, SSPRK3) == pytest.approx(h / 8, rel=1e-13)
    assert step_controller("classic", field, SSPRK3) == pytest.approx(h / 12, rel=1e-13)
    assert step_controller("jiangliu", field, SSPRK3) == pytest.approx(h / 12, rel=1e-13)
    assert step_controller("linear", field, SSPRK3) == pytest.approx(h / 10, rel=1e-13)


def test_step_controller_scales_with_ssp_coefficient_and_safety():
    field = _unit_advection_field(10)
    base = step_controller("optimal", field, SSPRK3)
    assert step_controller("optimal", field, SSPRK4) == pytest.approx(
        SSPRK4.ssp_coefficient * base, rel=1e-13
    )
    assert step_controller("optimal", field, SSPRK3, safety=0.5) == pytest.approx(
        0.5 * base, rel=1e-13
    )


def test_step_controller_zero_speed_fallback():
    mesh = _periodic_mesh(4)
    basis = Basis2D(2)
    coeffs = np.zeros((4, 4, basis.n_modes, 1))
    field = DGField(coeffs, basis, mesh, BurgersModel(BoxScalar(-1.0, 1.0)))
    assert step_controller("optimal", field, SSPRK3, fallback_dt=0.01) == 0.01
    with pytest.raises(ValueError):
        step_controller("optimal", field, SSPRK3)


def test_step_controller_unknown_policy():
    field = _unit_advection_field(4)
    with pytest.raises(ValueError):
        step_controller("bogus", field, SSPRK3)


# ------------------------------------------------------ boundary conditions


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh2D(0.0, 1.0, 0.0, 1.0, 0, 4)
    with pytest.raises(ValueError):
        Mesh2D(1.0, 0.0, 0.0, 1.0, 4, 4)
    with pytest.raises(ValueError):
        Mesh2D(0.0, 1.0, 0.0, 1.0, 4, 4, bc_left=PERIODIC, bc_right=OUTFLOW,
               bc_bottom=OUTFLOW, bc_top=OUTFLOW)


def test_inflow_segment_feeds_wave_speed():
    model = EulerModel()
    inflow = InflowSegment(model.conserved(5.0, 30.0, 0.0, 0.4127), -0.05, 0.05)
    mesh = Mesh2D(0.0, 2.0, -0.5, 0.5, 8, 8, bc_left=inflow, bc_right=OUTFLOW,
                  bc_bottom=OUTFLOW, bc_top=OUTFLOW)
    ambient = model.conserved(5.0, 0.0, 0.0, 0.4127)
    basis = Basis2D(2)
    coeffs = np.zeros((8, 8, basis.n_modes, 4))
    coeffs[:, :, 0, :] = ambient
    field = DGField(coeffs, basis, mesh, model)
    a1, _ = global_max_speeds(field)
    assert a1 > 30.0  # the prescribed inflow dominates the quiescent interior


# -------------------------------------------------------------- error norms


def test_error_norms_zero_field_vs_sine():
    mesh = _periodic_mesh(20)
    basis = Basis2D(2)
    model = AdvectionModel()
    field = DGField(np.zeros((20, 20, basis.n_modes, 1)), basis, mesh, model)
    exact = lambda x, y, t: np.sin(np.pi * (x + y - 2.0 * t))[..., None]
    l1, l2, linf = error_norms(field, exact, 0.3)
    assert l2 == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)
    assert linf == pytest.approx(1.0, abs=1e-3)


def test_error_norms_exact_field_is_zero():
    mesh = _periodic_mesh(5)
    basis = Basis2D(2)
    coeffs = np.zeros((5, 5, basis.n_modes, 1))
    coeffs[:, :, 0, 0] = 0.4
    field = DGField(coeffs, basis, mesh, AdvectionModel())
    exact = lambda x, y, t: np.full(np.broadcast_shapes(x.shape, y.shape), 0.4)[..., None]
    assert error_norms(field, exact, 1.0) == (0.0, 0.0, 0.0)


def test_error_norms_requires_exact():
    field = _unit_advection_field(4)
    with pytest.raises(ValueError):
        error_norms(field, None, 0.0)
