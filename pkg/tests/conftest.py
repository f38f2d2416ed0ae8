import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import magprop as mp

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def unit_grid():
    return mp.make_grid(1.0, 256)


@pytest.fixture(scope="session")
def cp_unit(unit_grid):
    """Charged-particle operators at t = 1, k = 1 on the session grid."""
    return mp.build_cp_operators(unit_grid, 1.0)


@pytest.fixture(scope="session")
def pins_unit(unit_grid):
    n = unit_grid.n
    ones, zeros = np.ones(n), np.zeros(n)
    eta1 = mp.GridFunction.stack(unit_grid, [ones, zeros, zeros, zeros])
    eta3 = mp.GridFunction.stack(unit_grid, [zeros, zeros, ones, zeros])
    return eta1, eta3
