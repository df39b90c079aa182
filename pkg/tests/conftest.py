import numpy as np
import pytest

from covlab.population import (
    AutocovarianceSpec,
    PopulationModel,
    build_population,
    decompose,
)


@pytest.fixture(scope="session")
def memory_spec():
    """The workhorse long-memory sequence: d = 1/8, L = 1, so gamma(h) = (1+|h|)^(-3/4)."""
    return AutocovarianceSpec(d=0.125)


@pytest.fixture(scope="session")
def toeplitz_1000(memory_spec):
    """Spectral decomposition of the N = 1000 autocovariance matrix (cached)."""
    gamma = build_population(PopulationModel.toeplitz(memory_spec, 1000))
    return decompose(gamma)


def random_psd(rng, n, complex_entries=False):
    if complex_entries:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    else:
        a = rng.standard_normal((n, n))
    return a @ a.conj().T / n


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
