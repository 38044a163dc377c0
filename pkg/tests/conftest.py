import numpy as np
import pytest

from mixedosc.feedback import FeedbackConfig
from mixedosc.lti import TransferFunction


def first_order_load(tau_l):
    return TransferFunction.from_coeffs([1.0], [1.0, tau_l])


@pytest.fixture
def two_mass_load():
    return TransferFunction.from_coeffs([200.0], [200.0, 20.0, 1.0])


@pytest.fixture
def two_mass(two_mass_load):
    return FeedbackConfig(two_mass_load, tau_p=1.0, tau_n=10.0, beta=0.1538, k=20.0)


@pytest.fixture
def first_order():
    """First-order load, k = 10, beta = 0.4, tau_l = 0.01, tau_p = 0.1, tau_n = 1."""
    return FeedbackConfig(first_order_load(0.01), tau_p=0.1, tau_n=1.0, beta=0.4, k=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20201)
