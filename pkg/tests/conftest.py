import numpy as np
import pytest

from gnsmooth import (
    NHOParams,
    build_linear_problem,
    build_nho_problem,
    generate_nho_truth,
    generate_sine_truth,
    observe,
)


@pytest.fixture(scope="session")
def sine_truth():
    return generate_sine_truth(75)


@pytest.fixture(scope="session")
def sine_obs(sine_truth):
    return observe(sine_truth, np.sqrt(0.5), 1, 0)


@pytest.fixture(scope="session")
def sine_problem(sine_obs):
    return build_linear_problem(sine_obs, 0.2, 5.0)


@pytest.fixture(scope="session")
def nho_params():
    return NHOParams()


@pytest.fixture(scope="session")
def nho_truth(nho_params):
    return generate_nho_truth(nho_params, 60, 3)


@pytest.fixture(scope="session")
def nho_obs(nho_truth):
    return observe(nho_truth, np.sqrt(0.5), 2, 3)


@pytest.fixture(scope="session")
def nho_problem(nho_obs, nho_params):
    return build_nho_problem(nho_obs, nho_params, 1.0, 0.025)
