import numpy as np
import pytest

from isbm.paths import SamplePath, TimeGrid, make_grid


@pytest.fixture
def triangle():
    """Tent path 0 -> 1 -> 0 -> -1 -> 0 on unit steps."""
    return SamplePath(make_grid(0.0, 4.0, 1.0), np.array([0.0, 1.0, 0.0, -1.0, 0.0]))


@pytest.fixture
def smooth_triangle():
    """Same tent shape resolved with dt=0.01 so band estimators clear the
    resolution floor; apex 1 at t=1, trough -1 at t=3."""
    up = 0.01 * np.arange(101)
    down = 1.0 - 0.01 * np.arange(1, 201)
    back = -1.0 + 0.01 * np.arange(1, 101)
    values = np.concatenate([up, down, back])
    return SamplePath(TimeGrid(0.0, 0.01, 400), values)
