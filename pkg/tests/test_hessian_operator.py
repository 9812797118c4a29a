import numpy as np
import pytest

from src.core.cap_geometry import ScalarField, build_grid, ell_field, integrate, kernel_fields
from src.core.hessian_operator import (
    SupportField,
    build_W,
    cone_margin,
    integral_identity,
    jacobian,
    linearize,
    node_sigma_k,
    orthogonality_defect,
    resolve_threads,
    residual,
    robin_compatible_field,
    robin_defect,
)
from src.models.capillary_models import CapDomain, GridMode
from src.models.errors import EllipticityLostError, InvalidArgumentError, InvalidDataError

from .conftest import THETA


def test_W_of_ell_is_identity(full_grid, axi_grid) -> None:
    for grid in (full_grid, axi_grid):
        W = build_W(ell_field(grid))
        np.testing.assert_allclose(W.values, np.broadcast_to(np.eye(grid.n), W.values.shape), atol=1e-10)


def test_W_annihilates_translations(full_grid) -> None:
    for v in kernel_fields(full_grid):
        np.testing.assert_allclose(build_W(v).values, 0.0, atol=1e-9)


def test_residual_vanishes_for_ell(full_grid, axi_grid) -> None:
    two = ScalarField.constant(full_grid, 2.0)
    assert residual(ell_field(full_grid), two, 1).norm_inf() < 1e-10
    three = ScalarField.constant(axi_grid, 3.0)
    assert residual(ell_field(axi_grid), three, 2).norm_inf() < 1e-9
    assert residual(ell_field(axi_grid), three, 2, normalized=True).norm_inf() < 1e-9


def test_residual_is_invariant_under_translation(full_grid) -> None:
    f = ScalarField.constant(full_grid, 1.0)
    ell = ell_field(full_grid)
    v1, v2 = kernel_fields(full_grid)
    moved = ell + 0.3 * v1 - 0.2 * v2
    np.testing.assert_allclose(residual(moved, f, 2).values, residual(ell, f, 2).values, atol=1e-9)


def test_residual_rejects_bad_input(full_grid, coarse_grid) -> None:
    ell = ell_field(full_grid)
    with pytest.raises(InvalidDataError):
        residual(ell, ScalarField.constant(full_grid, 0.0), 1)
    with pytest.raises(InvalidArgumentError):
        residual(ell, ScalarField.constant(full_grid, 1.0), 3)
    with pytest.raises(InvalidArgumentError):
        residual(ell, ScalarField.constant(coarse_grid, 1.0), 1)


@pytest.mark.parametrize("k", [1, 2])
def test_jacobian_matches_finite_differences(coarse_grid, rng, k: int) -> None:
    h = robin_compatible_field(coarse_grid, rng)
    v = robin_compatible_field(coarse_grid, rng) - ell_field(coarse_grid)
    f = ScalarField.constant(coarse_grid, 1.0)
    eps = 1e-4
    fd = (residual(h + eps * v, f, k).values - residual(h - eps * v, f, k).values) / (2.0 * eps)
    Jv = jacobian(h, k) @ v.values
    np.testing.assert_allclose(Jv, fd, rtol=1e-6, atol=1e-7 * np.max(np.abs(fd)))


def test_normalized_jacobian_matches_finite_differences(coarse_grid, rng) -> None:
    h = robin_compatible_field(coarse_grid, rng)
    v = robin_compatible_field(coarse_grid, rng) - ell_field(coarse_grid)
    f = ScalarField.constant(coarse_grid, 1.0)
    eps = 1e-6
    plus = residual(h + eps * v, f, 2, normalized=True).values
    minus = residual(h - eps * v, f, 2, normalized=True).values
    fd = (plus - minus) / (2.0 * eps)
    Jv = jacobian(h, 2, normalized=True) @ v.values
    np.testing.assert_allclose(Jv, fd, rtol=1e-5, atol=1e-6 * np.max(np.abs(fd)))


def test_bordered_system_sizes(full_grid, axi_grid) -> None:
    system = linearize(ell_field(full_grid), 1)
    assert system.matrix.shape == (full_grid.n_nodes + 2, full_grid.n_nodes + 2)
    assert system.n_multipliers == 2
    axi = linearize(ell_field(axi_grid), 2)
    assert axi.matrix.shape == (axi_grid.n_nodes, axi_grid.n_nodes)
    assert axi.n_multipliers == 0


def test_linearize_rhs_is_negative_residual(full_grid) -> None:
    h = 0.5 * ell_field(full_grid)
    f = ScalarField.constant(full_grid, 2.0)
    system = linearize(h, 1, target=f)
    np.testing.assert_allclose(system.rhs[system.node_slice], 1.0, atol=1e-10)
    np.testing.assert_array_equal(system.rhs[system.multiplier_slice], 0.0)


def test_one_newton_step_solves_the_linear_case(full_grid) -> None:
    h = 0.5 * ell_field(full_grid)
    system = linearize(h, 1, target=ScalarField.constant(full_grid, 2.0))
    delta, multipliers = system.solve()
    np.testing.assert_allclose(h.values + delta, ell_field(full_grid).values, atol=1e-10)
    np.testing.assert_allclose(multipliers, 0.0, atol=1e-10)


def test_linearize_requires_ellipticity(full_grid) -> None:
    with pytest.raises(EllipticityLostError) as info:
        linearize(-1.0 * ell_field(full_grid), 1)
    assert len(info.value.spectrum) == 2
    assert 0 <= info.value.worst_node < full_grid.n_nodes


def test_cone_margin() -> None:
    eig = np.array([[1.0, 1.0], [1.0, -0.5], [0.0, 0.0]])
    margin = cone_margin(eig, 2)
    assert margin[0] == pytest.approx(1.0)
    assert margin[1] < 0.0
    assert margin[2] == -np.inf


def test_linearized_operator_becomes_self_adjoint(domain) -> None:
    asymmetry = []
    for n in (16, 32, 64):
        grid = build_grid(domain, n, n)
        rng = np.random.default_rng(7)
        v = robin_compatible_field(grid, rng)
        w = robin_compatible_field(grid, rng)
        system = linearize(ell_field(grid), 1)
        asymmetry.append(system.weighted_asymmetry(v.values, w.values))
    assert asymmetry[2] < asymmetry[0]
    assert asymmetry[1] < 5e-2


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2])
def test_self_adjointness_defect_is_second_order(domain, k) -> None:
    sizes = (16, 32, 64, 128)
    steps = np.log([domain.theta / n for n in sizes])
    for seed in range(10):
        asymmetry = []
        for n in sizes:
            grid = build_grid(domain, n, n)
            rng = np.random.default_rng(seed)
            h = robin_compatible_field(grid, rng)
            v = robin_compatible_field(grid, rng)
            w = robin_compatible_field(grid, rng)
            asymmetry.append(linearize(h, k).weighted_asymmetry(v.values, w.values))
        order = np.polyfit(steps, np.log(asymmetry), 1)[0]
        assert order >= 1.8, f"seed {seed}: fitted order {order:.2f}"


def test_robin_defect(full_grid) -> None:
    ell = ell_field(full_grid)
    assert robin_defect(ell) < 1e-3
    assert SupportField(ell).robin_defect == pytest.approx(robin_defect(ell))
    shifted = ell + 0.1
    assert robin_defect(shifted) == pytest.approx(0.1 / np.tan(THETA), abs=1e-3)
    with pytest.raises(InvalidArgumentError):
        robin_defect(ell, theta=1.0)


def test_robin_compatible_fields_satisfy_the_boundary_condition(full_grid, axi_grid, rng) -> None:
    for grid in (full_grid, axi_grid):
        g = robin_compatible_field(grid, rng)
        assert robin_defect(g) < 5e-3
        assert np.all(g.values > 0.0)


def test_orthogonality_defect(full_grid, axi_grid) -> None:
    v1 = kernel_fields(full_grid)[0]
    defect = orthogonality_defect(v1)
    assert defect[0] == pytest.approx(integrate(v1 * v1))
    assert defect[1] == pytest.approx(0.0, abs=1e-14)
    assert orthogonality_defect(ell_field(axi_grid)) == [0.0, 0.0, 0.0]


def test_integral_identity_for_ell(full_grid, axi_grid) -> None:
    for value in integral_identity(ell_field(full_grid), 2):
        assert value == pytest.approx(0.0, abs=1e-9)
    assert integral_identity(ell_field(axi_grid), 2) == []


def test_resolve_threads(monkeypatch) -> None:
    monkeypatch.delenv("CAPCMK_THREADS", raising=False)
    assert resolve_threads() == 1
    assert resolve_threads(3) == 3
    monkeypatch.setenv("CAPCMK_THREADS", "2")
    assert resolve_threads() == 2
    assert resolve_threads(8) == 2
    monkeypatch.setenv("CAPCMK_THREADS", "many")
    assert resolve_threads(4) == 4


def test_threaded_assembly_matches_serial(rng) -> None:
    grid = build_grid(CapDomain(n=2, theta=THETA), 64, 64, GridMode.FULL)
    W = build_W(robin_compatible_field(grid, rng))
    np.testing.assert_array_equal(node_sigma_k(W, 2, threads=2), node_sigma_k(W, 2, threads=1))
