import logging
from math import pi

import numpy as np
import pytest

from src.core.cap_geometry import (
    ScalarField,
    build_grid,
    boundary_values,
    covariant_gradient,
    covariant_hessian,
    difference_operators,
    ell_field,
    embed,
    embed_nodes,
    integrate,
    integrate_boundary,
    kernel_fields,
    kernel_matrix,
    robin_ghost_weights,
    sphere_measure,
    tangent_frame,
    unit_normals,
)
from src.models.capillary_models import CapDomain, GridMode
from src.models.errors import InvalidArgumentError, InvalidDataError, UnsupportedModeError

from .conftest import THETA


def _ell_integral(theta: float) -> float:
    c = np.cos(theta)
    return 2.0 * pi * ((1.0 - c) - c * np.sin(theta) ** 2 / 2.0)


def test_sphere_measure() -> None:
    assert sphere_measure(0) == pytest.approx(2.0)
    assert sphere_measure(1) == pytest.approx(2.0 * pi)
    assert sphere_measure(2) == pytest.approx(4.0 * pi)


def test_grid_layout(full_grid) -> None:
    assert full_grid.n_nodes == 32 * 32
    assert full_grid.rho[0] == pytest.approx(0.5 * THETA / 32)
    assert full_grid.rho[-1] + 0.5 * full_grid.d_rho == pytest.approx(THETA)
    assert full_grid.node_index(3, 5) == 3 * 32 + 5
    np.testing.assert_array_equal(full_grid.boundary_nodes, np.arange(31 * 32, 32 * 32))
    with pytest.raises(ValueError):
        full_grid.weights[0] = 1.0


def test_grid_equality_by_signature(domain) -> None:
    a = build_grid(domain, 16, 16)
    b = build_grid(domain, 16, 16)
    assert a == b
    assert hash(a) == hash(b)
    assert a != build_grid(domain, 16, 8)


def test_build_grid_rejects_bad_resolutions(domain) -> None:
    with pytest.raises(InvalidArgumentError):
        build_grid(domain, 3, 16)
    with pytest.raises(InvalidArgumentError):
        build_grid(domain, 16, 9)
    with pytest.raises(InvalidArgumentError):
        build_grid(domain, 16, 6)
    with pytest.raises(UnsupportedModeError):
        build_grid(CapDomain(n=3, theta=THETA), 16, 16, GridMode.FULL)


def test_axisymmetric_grid_ignores_n_phi() -> None:
    grid = build_grid(CapDomain(n=4, theta=THETA), 20, 64, GridMode.AXISYMMETRIC)
    assert grid.n_phi == 1
    assert grid.n_nodes == 20


def test_obtuse_angle_logs_warning(caplog) -> None:
    with caplog.at_level(logging.WARNING):
        build_grid(CapDomain(n=2, theta=2.0), 8, 8)
    assert "outside the existence theorem" in caplog.text


def test_areas_are_exact(full_grid, axi_grid) -> None:
    assert full_grid.area == pytest.approx(2.0 * pi * (1.0 - np.cos(THETA)), rel=1e-13)
    expected = 4.0 * pi * (THETA / 2.0 - np.sin(2.0 * THETA) / 4.0)
    assert axi_grid.area == pytest.approx(expected, rel=1e-13)


def test_boundary_weights(full_grid, axi_grid) -> None:
    assert full_grid.boundary_weights.sum() == pytest.approx(2.0 * pi * np.sin(THETA))
    assert axi_grid.boundary_weights.sum() == pytest.approx(4.0 * pi * np.sin(THETA) ** 2)


def test_integral_of_ell_converges_at_second_order(domain) -> None:
    errors = []
    for n_rho in (16, 32, 64):
        grid = build_grid(domain, n_rho, 8)
        errors.append(abs(integrate(ell_field(grid)) - _ell_integral(THETA)))
    assert 3.5 < errors[0] / errors[1] < 4.5
    assert 3.5 < errors[1] / errors[2] < 4.5


def test_integral_of_ell_on_fine_grid(domain) -> None:
    grid = build_grid(domain, 256, 8)
    assert integrate(ell_field(grid)) == pytest.approx(0.625 * pi, abs=1e-5)


def test_integrate_with_mask(full_grid) -> None:
    ell = ell_field(full_grid)
    half = full_grid.phi_nodes < pi
    assert integrate(ell, half) == pytest.approx(0.5 * integrate(ell), rel=1e-13)
    assert integrate(ell, np.flatnonzero(half)) == pytest.approx(integrate(ell, half))


def test_integrate_checks_grid(full_grid, coarse_grid) -> None:
    with pytest.raises(InvalidArgumentError):
        integrate(ell_field(full_grid), grid=coarse_grid)


def test_boundary_extrapolation_of_ell(full_grid) -> None:
    c = np.cos(THETA)
    np.testing.assert_allclose(boundary_values(ell_field(full_grid)), 1.0 - c * c, atol=1e-5)
    expected = 2.0 * pi * np.sin(THETA) * (1.0 - c * c)
    assert integrate_boundary(ell_field(full_grid)) == pytest.approx(expected, rel=1e-5)


def test_embedding() -> None:
    omega = np.array([0.6, 0.8])
    np.testing.assert_allclose(embed(0.0, omega, THETA), [0.0, 0.0, 1.0 - np.cos(THETA)], atol=1e-15)
    on_boundary = embed(THETA, omega, THETA)
    assert on_boundary[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.linalg.norm(on_boundary[:2]) == pytest.approx(np.sin(THETA))


def test_embedded_nodes_lie_on_the_unit_sphere(full_grid) -> None:
    xi = embed_nodes(full_grid)
    shifted = xi.copy()
    shifted[:, -1] += np.cos(THETA)
    np.testing.assert_allclose(np.linalg.norm(shifted, axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(unit_normals(full_grid), shifted, atol=1e-14)


def test_tangent_frame_is_orthonormal(full_grid) -> None:
    normals = unit_normals(full_grid)
    e_rho, e_phi = tangent_frame(full_grid)
    for e in (e_rho, e_phi):
        np.testing.assert_allclose(np.linalg.norm(e, axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(np.sum(e * normals, axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(np.sum(e_rho * e_phi, axis=1), 0.0, atol=1e-14)


def test_ell_field(full_grid) -> None:
    np.testing.assert_allclose(ell_field(full_grid).values,
                               1.0 - np.cos(THETA) * np.cos(full_grid.rho_nodes))


def test_kernel_fields(full_grid, axi_grid) -> None:
    fields = kernel_fields(full_grid)
    assert len(fields) == 2
    np.testing.assert_allclose(fields[0].values,
                               np.sin(full_grid.rho_nodes) * np.cos(full_grid.phi_nodes))
    assert kernel_matrix(full_grid).shape == (full_grid.n_nodes, 2)
    assert kernel_fields(axi_grid) == []
    assert kernel_matrix(axi_grid).shape == (axi_grid.n_nodes, 0)


def test_hessian_of_ell_is_exact(full_grid, axi_grid) -> None:
    for grid in (full_grid, axi_grid):
        hess = covariant_hessian(ell_field(grid)).values
        expected = np.cos(THETA) * np.cos(grid.rho_nodes)[:, None, None] * np.eye(grid.n)
        np.testing.assert_allclose(hess, expected, atol=1e-10)


def test_hessian_of_kernel_fields_is_minus_identity(full_grid) -> None:
    for v in kernel_fields(full_grid):
        hess = covariant_hessian(v).values
        expected = -v.values[:, None, None] * np.eye(2)
        np.testing.assert_allclose(hess, expected, atol=1e-9)


def test_hessian_of_constant(full_grid) -> None:
    one = ScalarField.constant(full_grid, 1.0)
    np.testing.assert_allclose(covariant_hessian(one, boundary="free").values, 0.0, atol=1e-9)
    interior = full_grid.rho_nodes < full_grid.rho[-1]
    np.testing.assert_allclose(covariant_hessian(one).values[interior], 0.0, atol=1e-9)


def test_gradient_of_kernel_field(full_grid) -> None:
    v1 = kernel_fields(full_grid)[0]
    grad = covariant_gradient(v1)
    rho, phi = full_grid.rho_nodes, full_grid.phi_nodes
    np.testing.assert_allclose(grad[:, 0], np.cos(rho) * np.cos(phi), atol=1e-12)
    np.testing.assert_allclose(grad[:, 1], -np.sin(phi), atol=1e-10)


def test_robin_ghost_reproduces_ell() -> None:
    d = THETA / 32
    weights = robin_ghost_weights(THETA, d)
    c = np.cos(THETA)
    rings = 1.0 - c * np.cos(THETA + np.array([-0.5, -1.5, -2.5]) * d)
    assert weights @ rings == pytest.approx(1.0 - c * np.cos(THETA + 0.5 * d), abs=1e-14)


def test_unknown_boundary_mode(coarse_grid) -> None:
    with pytest.raises(InvalidArgumentError):
        difference_operators(coarse_grid, "dirichlet")


def test_scalar_field_validation(full_grid, coarse_grid) -> None:
    with pytest.raises(InvalidArgumentError):
        ScalarField(full_grid, np.ones(5))
    values = np.ones(full_grid.n_nodes)
    values[7] = np.nan
    with pytest.raises(InvalidDataError):
        ScalarField(full_grid, values)
    with pytest.raises(InvalidArgumentError):
        ell_field(full_grid) + ell_field(coarse_grid)


def test_scalar_field_arithmetic(full_grid) -> None:
    ell = ell_field(full_grid)
    np.testing.assert_allclose((2.0 * ell - ell).values, ell.values)
    np.testing.assert_allclose((1.0 - ell).values, np.cos(THETA) * np.cos(full_grid.rho_nodes))
    assert ell.as_array().shape == (32, 32)
    assert ell.norm_inf() == pytest.approx(ell.max())
