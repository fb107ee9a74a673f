import numpy as np
import pytest

from hybridfm.mesh import Mesh
from hybridfm.operators import elastic_basis, laplace_basis
from hybridfm.shapes import grid, icosphere


def random_spd(rng, k, low=0.5, high=2.0):
    """SPD matrix with eigenvalues in [low, high] and a random eigenbasis."""
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    return (q * rng.uniform(low, high, k)) @ q.T


def bumpy_sphere(level=2, amp=0.15, seed=0):
    """Icosphere with a smooth random radial perturbation; no symmetries."""
    m = icosphere(level)
    rng = np.random.default_rng(seed)
    u = np.array(m.vertices)
    dirs = rng.standard_normal((4, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = 1 + amp * np.exp(-(1 - u @ dirs.T) / 0.3).sum(axis=1)
    return Mesh.from_arrays(u * r[:, None], m.faces)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sphere():
    return icosphere(3)


@pytest.fixture(scope="session")
def sphere_lb(sphere):
    return laplace_basis(sphere, 50)


@pytest.fixture(scope="session")
def blob():
    return bumpy_sphere()


@pytest.fixture(scope="session")
def blob_lb(blob):
    return laplace_basis(blob, 30)


@pytest.fixture(scope="session")
def blob_elastic(blob):
    return elastic_basis(blob, 15)


@pytest.fixture(scope="session")
def flat_grid():
    return grid(6, 6)
