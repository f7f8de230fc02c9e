import numpy as np
import pytest

import quadtex

pytest_plugins = ['quadtex.pytest_plugin']


@pytest.fixture
def square_camera():
    """Looks straight down at the unit square of the xy plane."""
    return quadtex.Camera(0.0, np.pi / 2, 2.0, np.radians(60.0), 32)


@pytest.fixture
def cube_view():
    return quadtex.Camera.from_degrees(30.0, 25.0, 3.0, 40.0, 32)
