import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semictrl import (  # noqa: E402
    DiagonalSpectral,
    PointwisePolynomial,
    SemilinearSystem,
    TimeGrid,
    ZeroMap,
    build_semigroup,
    dirichlet_laplacian,
)


def scalar_system(a=0.0, b=1.0, f=None):
    return SemilinearSystem(DiagonalSpectral((a,)), np.array([[b]]), f if f is not None else ZeroMap(1))


def quadratic():
    return PointwisePolynomial((1.0,), 1)


def heat_system(n_modes=16, cubic=-1.0):
    return SemilinearSystem(
        dirichlet_laplacian(n_modes), np.eye(n_modes), PointwisePolynomial((0.0, cubic), n_modes, "sine")
    )


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 1000)


@pytest.fixture
def integrator(unit_grid):
    sys = scalar_system()
    return sys, build_semigroup(sys.generator, unit_grid)


@pytest.fixture
def quad_scalar(unit_grid):
    sys = scalar_system(f=quadratic())
    return sys, build_semigroup(sys.generator, unit_grid)
