import numpy as np
import pytest

from beamlab.mixer import MixtureSpec, build_mixture
from beamlab.rooms import ArrayGeometry, Scenario


@pytest.fixture(scope="session")
def geometry():
    return ArrayGeometry.default_linear()


@pytest.fixture(scope="session")
def anechoic_scenario():
    return Scenario(
        Lx=7.0, Ly=7.0, Lz=3.0, T60=0.0, mic_center=(3.5, 3.5, 1.0), tilt_phi=0.0,
        source_theta=350.0, noise_theta=330.0, source_R=2.0, noise_R=2.0, seed=11,
    )


@pytest.fixture(scope="session")
def anechoic_mixture(anechoic_scenario, geometry):
    return build_mixture(anechoic_scenario, geometry, MixtureSpec())


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
