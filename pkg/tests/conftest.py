import numpy as np
import pytest

from bcsgap import ModelParams, constant_potential, gauss_legendre, separable_potential


@pytest.fixture(scope="session")
def model():
    return ModelParams(1e-3, 1.0)


@pytest.fixture(scope="session")
def rule64(model):
    return gauss_legendre(model.epsilon, model.debye, 64)


@pytest.fixture(scope="session")
def const_pot(model):
    return constant_potential(0.3, model)


@pytest.fixture(scope="session")
def sep_pot(model):
    # U(x, xi) = (0.5 + 0.1 x)(0.5 + 0.1 xi); corners give the exact bounds
    return separable_potential([0.5, 0.1], model)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
