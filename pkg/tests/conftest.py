import numpy as np
import pytest

from dunkl_lab.grids import build_grid
from dunkl_lab.heat import HeatKernelModel, SemigroupSampler
from dunkl_lab.reflection import generate_group, z2_root_system


@pytest.fixture(scope="session")
def z2_k1():
    return z2_root_system([1.0])


@pytest.fixture(scope="session")
def z2_k1_group(z2_k1):
    return generate_group(z2_k1)


@pytest.fixture(scope="session")
def grid_k1(z2_k1):
    # shared medium-resolution 1-d grid: big enough for operator checks,
    # small enough to keep the suite fast
    return build_grid(z2_k1, 12.0, 128)


@pytest.fixture(scope="session")
def model_k1(z2_k1):
    return HeatKernelModel(z2_k1)


@pytest.fixture(scope="session")
def sampler_k1(model_k1, grid_k1):
    return SemigroupSampler(model_k1, grid_k1)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
