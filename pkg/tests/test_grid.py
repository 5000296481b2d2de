import math

import numpy as np
import pytest

from nellsys import (ConfigError, Domain, GridMismatchError,
                     PointOutsideDomainError, ScalarField, SystemState,
                     build_grid, eval_at_point, quadrature_integral, sup_norm)


def test_rectangle_node_counts():
    grid = build_grid(Domain.rectangle(), 3)
    assert grid.n_nodes == 16
    assert int(grid.interior_mask.sum()) == 4
    assert int(grid.boundary_mask.sum()) == 12


def test_disk_node_counts():
    grid = build_grid(Domain.disk(1.0), (4, 8))
    assert grid.n_nodes == 1 + 4 * 8
    assert int(grid.boundary_mask.sum()) == 8


def test_resolution_too_small_rejected():
    with pytest.raises(ConfigError):
        build_grid(Domain.rectangle(), 2)
    with pytest.raises(ConfigError):
        build_grid(Domain.disk(1.0), (4, 2))


def test_domain_invariants():
    with pytest.raises(ConfigError):
        Domain.disk(-1.0)
    with pytest.raises(ConfigError):
        Domain.rectangle((0, 0), (0, 1))


@pytest.mark.parametrize("domain,res", [
    (Domain.disk(1.0), (16, 32)),
    (Domain.disk(2.5), (12, 20)),
    (Domain.rectangle((0, 2), (-1, 1)), (8, 10)),
])
def test_boundary_nodes_on_boundary(domain, res):
    grid = build_grid(domain, res)
    xb = grid.nodes[grid.boundary_mask]
    if domain.kind == "disk":
        err = np.abs(np.hypot(xb[:, 0], xb[:, 1]) - domain.radius)
    else:
        dx = np.minimum(np.abs(xb[:, 0] - domain.x_range[0]),
                        np.abs(xb[:, 0] - domain.x_range[1]))
        dy = np.minimum(np.abs(xb[:, 1] - domain.y_range[0]),
                        np.abs(xb[:, 1] - domain.y_range[1]))
        err = np.minimum(dx, dy)
    assert np.max(err) <= 1e-12


def test_masks_partition_and_weights_nonnegative():
    for domain, res in ((Domain.disk(1.0), (8, 12)),
                        (Domain.rectangle(), 7)):
        grid = build_grid(domain, res)
        assert np.all(grid.interior_mask ^ grid.boundary_mask)
        assert np.all(grid.quad_weights >= 0)
        lengths = np.hypot(*grid.boundary_normals[grid.boundary_mask].T)
        assert np.max(np.abs(lengths - 1.0)) <= 1e-12


def test_quadrature_constant_rectangle_exact():
    grid = build_grid(Domain.rectangle(), 9)
    assert quadrature_integral(grid, ScalarField.constant(grid, 1.0)) == \
        pytest.approx(1.0, abs=1e-12)


def test_quadrature_constant_disk():
    grid = build_grid(Domain.disk(1.0), (64, 128))
    assert quadrature_integral(grid, ScalarField.constant(grid, 1.0)) == \
        pytest.approx(math.pi, abs=2e-3)


def test_quadrature_paraboloid_disk():
    # analytic polar integral: (pi/2) * int_0^1 (r - r^3) dr = pi/8
    grid = build_grid(Domain.disk(1.0), (64, 128))
    field = ScalarField.from_function(grid, lambda x, y: (1 - x**2 - y**2) / 4)
    assert quadrature_integral(grid, field) == pytest.approx(math.pi / 8, abs=2e-3)


def test_quadrature_area_convergence_ratio():
    errors = []
    for n_r in (16, 32, 64):
        grid = build_grid(Domain.disk(1.0), (n_r, 2 * n_r))
        area = quadrature_integral(grid, ScalarField.constant(grid, 1.0))
        errors.append(abs(area - math.pi))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.0 <= coarse / fine <= 5.0


def test_quadrature_grid_mismatch():
    g1 = build_grid(Domain.rectangle(), 4)
    g2 = build_grid(Domain.rectangle(), 4)
    with pytest.raises(GridMismatchError):
        quadrature_integral(g1, ScalarField.constant(g2, 1.0))


def test_eval_nodal_exactness_rectangle():
    grid = build_grid(Domain.rectangle((0, 2), (0, 1)), (11, 7))
    field = ScalarField.from_function(grid, lambda x, y: x)
    for k in (0, 5, grid.n_nodes // 2, grid.n_nodes - 1):
        assert eval_at_point(grid, field, grid.nodes[k]) == grid.nodes[k, 0]


def test_eval_nodal_exactness_disk():
    grid = build_grid(Domain.disk(1.0), (12, 16))
    field = ScalarField.from_function(grid, lambda x, y: (1 - x**2 - y**2) / 4)
    assert eval_at_point(grid, field, (0.0, 0.0)) == pytest.approx(0.25, abs=1e-12)
    for k in (1, 30, grid.n_nodes - 1):
        assert eval_at_point(grid, field, grid.nodes[k]) == \
            pytest.approx(field.values[k], abs=1e-12)


def test_eval_reproduces_constants():
    rng = np.random.default_rng(3)
    for domain, res in ((Domain.disk(1.0), (6, 9)), (Domain.rectangle(), 5)):
        grid = build_grid(domain, res)
        field = ScalarField.constant(grid, 2.75)
        for _ in range(20):
            if domain.kind == "disk":
                r, t = rng.uniform(0, 1), rng.uniform(0, 2 * math.pi)
                p = (r * math.cos(t), r * math.sin(t))
            else:
                p = rng.uniform(0, 1, 2)
            assert eval_at_point(grid, field, p) == pytest.approx(2.75, abs=1e-12)


def test_eval_reproduces_affine_on_rectangle():
    grid = build_grid(Domain.rectangle(), 13)
    field = ScalarField.from_function(grid, lambda x, y: 2 * x - 3 * y + 0.5)
    rng = np.random.default_rng(7)
    for _ in range(50):
        x, y = rng.uniform(0.01, 0.99, 2)
        assert eval_at_point(grid, field, (x, y)) == \
            pytest.approx(2 * x - 3 * y + 0.5, abs=1e-12)


def test_eval_outside_domain_rejected():
    grid = build_grid(Domain.disk(1.0), (4, 8))
    with pytest.raises(PointOutsideDomainError):
        eval_at_point(grid, ScalarField.constant(grid, 1.0), (1.2, 0.0))
    grid2 = build_grid(Domain.rectangle(), 4)
    with pytest.raises(PointOutsideDomainError):
        eval_at_point(grid2, ScalarField.constant(grid2, 1.0), (0.5, -0.1))


def test_eval_on_boundary_allowed():
    grid = build_grid(Domain.disk(1.0), (8, 16))
    field = ScalarField.from_function(grid, lambda x, y: x)
    assert eval_at_point(grid, field, (1.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_sup_norm():
    grid = build_grid(Domain.rectangle(), 3)
    assert sup_norm(ScalarField.constant(grid, 0.0)) == 0.0
    vals = np.zeros(grid.n_nodes)
    vals[2], vals[5] = -3.0, 2.0
    assert sup_norm(ScalarField(grid, vals)) == 3.0


def test_field_immutability_and_shape_check():
    grid = build_grid(Domain.rectangle(), 3)
    field = ScalarField.constant(grid, 1.0)
    with pytest.raises(ValueError):
        field.values[0] = 2.0
    with pytest.raises(GridMismatchError):
        ScalarField(grid, np.zeros(5))


def test_system_state():
    grid = build_grid(Domain.rectangle(), 3)
    state = SystemState.constant(grid, [1.0, -2.0])
    assert state.n == 2
    assert state.norm() == 2.0
    other = build_grid(Domain.rectangle(), 3)
    with pytest.raises(GridMismatchError):
        SystemState((state[0], ScalarField.constant(other, 0.0)))
