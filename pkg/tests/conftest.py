import warnings

import numpy as np
import pytest

from statuscount import (
    Dataset,
    MCMCConfig,
    PriorSpec,
    run_fit,
)


def make_dataset(n=60, n_prime=3, seed=0):
    """Small synthetic dataset on a short grid, for fast unit tests."""
    rng = np.random.default_rng(seed)
    grid = np.array([0.5, 1.0, 1.5])[:n_prime]
    u = grid[rng.integers(0, n_prime, size=n)]
    x1 = rng.binomial(1, 0.5, size=(n, 1)).astype(float)
    x2 = rng.binomial(1, 0.5, size=(n, 1)).astype(float)
    frailty = rng.gamma(1.0, 1.0, size=n)
    n_count = rng.poisson(frailty * u ** 0.9 * np.exp(0.5 * x1[:, 0]))
    p_event = -np.expm1(-frailty * u ** 1.3 * np.exp(0.5 * x2[:, 0]))
    delta = (rng.random(n) < p_event).astype(int)
    return Dataset.from_arrays(u=u, delta=delta, n_count=n_count,
                               x1=x1, x2=x2, grid=grid)


@pytest.fixture(scope="session")
def tiny_data():
    return make_dataset()


@pytest.fixture(scope="session")
def tiny_prior(tiny_data):
    return PriorSpec.vague(tiny_data.n_prime, tiny_data.p, tiny_data.q)


@pytest.fixture(scope="session")
def tiny_chain(tiny_data, tiny_prior):
    """One quick real fit shared by estimation/diagnostics/io tests."""
    config = MCMCConfig(iterations=3000, burn_in=500, thin=5,
                        adapt_start=100, adapt_interval=100, seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_fit(tiny_data, tiny_prior, config)
