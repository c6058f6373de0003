import numpy as np
import pytest

from ibimpb.grid import Grid, GridField
from ibimpb.surface import SignedDistanceField


def sphere_grid(n, half_width, radius=1.0, k1=2.0, centered=True):
    """Analytic signed distance field of a sphere on a cubic grid.

    Cell-centered lattice over [-half_width, half_width]^3, the same
    convention the pipeline uses.
    """
    h = 2.0 * half_width / n
    origin = -half_width + 0.5 * h if centered else -half_width
    grid = Grid(origin=(origin, origin, origin), h=h, dims=(n, n, n))
    f = GridField.from_function(grid, lambda x, y, z:
                                np.sqrt(x * x + y * y + z * z) - radius)
    return SignedDistanceField(field=f, eps=k1 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]
