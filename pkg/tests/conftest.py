import numpy as np
import pytest

from cavity_adapt.model import IlluminationPattern, SystemParams


@pytest.fixture
def fig2_params() -> SystemParams:
    """Two particles, kappa units: eta = 5/8, N U0 = -1/10, delta_c = -1.1."""
    return SystemParams(
        n_particles=2, recoil_frequency=1.0, kappa=1.0, u0=-0.05, delta_c=-1.1, friction=1.0
    )


@pytest.fixture
def fig2a_pattern() -> IlluminationPattern:
    return IlluminationPattern(((5, 0.625),))


@pytest.fixture
def fig2b_pattern() -> IlluminationPattern:
    return IlluminationPattern(tuple((n, 0.625) for n in (1, 3, 4, 5)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240911)
