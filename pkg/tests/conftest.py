import numpy as np
import pytest

from rankmoments import QuadratureSpec, UniformCorrelationModel


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture(scope="session")
def coarse():
    """Cheaper grid for property tests that do not probe accuracy."""
    return QuadratureSpec(m_nodes=41, x_nodes=801)


def random_model(rng, n, rho, sigma_range=None):
    mu = rng.uniform(-0.5, 0.5, n)
    sigma = np.ones(n) if sigma_range is None else rng.uniform(*sigma_range, n)
    return UniformCorrelationModel(mu, sigma, rho)


def pytest_terminal_summary(terminalreporter):
    from tests.test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(VERDICTS):
            terminalreporter.write_line(line)
