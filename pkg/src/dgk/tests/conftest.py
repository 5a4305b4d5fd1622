import numpy as np
import pytest

from dgk.kinetics import GasModel


@pytest.fixture
def gas() -> GasModel:
    return GasModel(gamma=1.4)


@pytest.fixture
def viscous_gas() -> GasModel:
    return GasModel(gamma=1.4, mu_ref=1e-3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
