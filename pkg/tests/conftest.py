import numpy as np
import pytest

from geotomo import Attenuation, EuclideanMetric, GaussianMetric, Geometry


@pytest.fixture(scope="session")
def geom_e():
    """Euclidean, small grids: fast unit-test workhorse."""
    return Geometry(EuclideanMetric(), n=32, n_theta=32, n_beta=32, n_alpha=24)


@pytest.fixture(scope="session")
def geom_c():
    """Conformal Gaussian metric, small grids."""
    return Geometry(GaussianMetric(0.08, (0.1, -0.2), 0.5),
                    n=32, n_theta=32, n_beta=32, n_alpha=24)


@pytest.fixture(scope="session")
def geom_mid():
    """Euclidean, mid-size grids for the solver-heavy tests."""
    return Geometry(EuclideanMetric(), n=48, n_theta=48, n_beta=48, n_alpha=32)


@pytest.fixture(scope="session")
def att_complex():
    return Attenuation.gaussian(0.7 + 0.5j, (0.12, -0.05), 0.45)


@pytest.fixture(scope="session")
def att_real():
    return Attenuation.gaussian(0.8, (0.0, 0.1), 0.5)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def l2_rel(disk, got, true):
    w = disk.area
    denom = float(np.sum(np.abs(true) ** 2 * w))
    return float(np.sqrt(np.sum(np.abs(got - true) ** 2 * w) / max(denom, 1e-300)))
