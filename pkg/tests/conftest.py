"""Shared fixtures: default-grid discretizations are expensive, build once."""

import pytest

from nellsys import (BoundarySpec, Domain, OperatorSpec, assemble, build_grid,
                     builtin_example, discretize)


@pytest.fixture(scope="session")
def disk_grid():
    return build_grid(Domain.disk(1.0), (64, 128))


@pytest.fixture(scope="session")
def disk_laplace(disk_grid):
    return assemble(OperatorSpec.laplacian(), BoundarySpec.dirichlet(), disk_grid)


@pytest.fixture(scope="session")
def ex31_dp():
    return discretize(builtin_example("ex-3.1"))


@pytest.fixture(scope="session")
def ex32_dp():
    return discretize(builtin_example("ex-3.2"))


@pytest.fixture(scope="session")
def mean_field_dp():
    return discretize(builtin_example("mean-field"))


@pytest.fixture(scope="session")
def small_disk_laplace():
    grid = build_grid(Domain.disk(1.0), (16, 32))
    return assemble(OperatorSpec.laplacian(), BoundarySpec.dirichlet(), grid)
