import numpy as np
import pytest

from tcdm.pointcloud import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(20240317)


def random_cloud(n, rng, extent=100.0, integer_colors=True):
    positions = rng.uniform(-extent / 2, extent / 2, size=(n, 3))
    if integer_colors:
        colors = rng.integers(0, 256, size=(n, 3)).astype(np.float64)
    else:
        colors = rng.uniform(0.0, 255.0, size=(n, 3))
    return PointCloud(positions, colors)


@pytest.fixture
def small_cloud(rng):
    return random_cloud(200, rng)
