import numpy as np
import pytest

from app.schemas.experiment import ChartSettings, SpectralSettings
from app.services.charting import compute_charts, patch_operator
from app.services.precompute import prepare_shape
from app.services.synthetic import bend_mesh, grid_plane, icosphere, jitter_planar


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    """5x5 unit-spacing grid, slightly jittered."""
    return jitter_planar(grid_plane(5, 5, 1.0), 0.1, seed=3)


@pytest.fixture(scope="session")
def small_operator(small_grid):
    charts = compute_charts(small_grid, 1.8)
    return patch_operator(small_grid, charts, n_rho=3, n_theta=6)


@pytest.fixture(scope="session")
def sphere2():
    return icosphere(2)


@pytest.fixture(scope="session")
def prepared_pair():
    """Two isometric copies of a jittered 7x7 plane, preprocessed at small settings."""
    plane = jitter_planar(grid_plane(7, 7, 1.0 / 6), 0.02, seed=5)
    plane = plane.transformed(np.eye(3), np.array([-0.5, -0.5, 0.0]))
    spectral = SpectralSettings(k=30, m=8, hks_count=6, diameter_samples=8)
    charting = ChartSettings(rho0_fraction=0.25, n_rho=3, n_theta=8)
    flat = prepare_shape(plane, spectral, charting, seed=0, name="flat")
    bent = prepare_shape(bend_mesh(plane, 0.6), spectral, charting, seed=0, name="bent")
    return flat, bent


@pytest.fixture
def pair_samples(prepared_pair):
    flat, bent = prepared_pair
    identity = np.arange(flat.mesh.n_vertices)
    return [
        flat.sample("flat", ground_truth=identity, label="plane"),
        bent.sample("bent", ground_truth=identity, label="plane"),
    ]
