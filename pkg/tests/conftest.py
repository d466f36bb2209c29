import numpy as np
import pytest

from wallflow.dns import ChannelEnv, EnvConfig
from wallflow.grid import build_grid


@pytest.fixture(scope="session")
def tiny_grid():
    """Near-uniform wall-normal spacing; quadratic-exact stencils apply."""
    return build_grid(8, 17, 8, 1.77, 0.89, 1e-6)


@pytest.fixture(scope="session")
def stretched_grid():
    return build_grid(8, 33, 8, 1.77, 0.89, 1.8)


@pytest.fixture()
def tiny_env(tiny_grid):
    return ChannelEnv(EnvConfig(re_b=3000.0, grid=tiny_grid, init="laminar"))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_mac_fields(grid, rng, amplitude=1.0):
    """Random velocity fields on the MAC staggering (v walls zeroed)."""
    u = amplitude * rng.standard_normal((grid.nx, grid.ncy, grid.nz))
    v = amplitude * rng.standard_normal((grid.nx, grid.ny, grid.nz))
    w = amplitude * rng.standard_normal((grid.nx, grid.ncy, grid.nz))
    v[:, 0, :] = 0.0
    v[:, -1, :] = 0.0
    return u, v, w
