import numpy as np
import pytest

from torusspec import lattice, models, pipeline


@pytest.fixture(scope="session")
def bench_eps():
    return 0.1


@pytest.fixture(scope="session")
def bench_model(bench_eps):
    return models.benchmark1(bench_eps)


@pytest.fixture(scope="session")
def bench_bundle(bench_model):
    """Reduced + normalized benchmark at eps = 0.1, N = 3 (reused broadly)."""
    return pipeline.prepare(bench_model, 3)


@pytest.fixture(scope="session")
def bench_rect():
    return lattice.SpectralRectangle(re_half_width=0.15,
                                     im_center_over_eps=0.0,
                                     im_half_width_over_eps=0.15)


@pytest.fixture(scope="session")
def bench_floquet():
    return lattice.FloquetData(S=(0.0, 0.0), alpha0=(0, 0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symbol(rng, n_terms=6, kmax=2, dmax=2, scale=1.0):
    from torusspec import FourierTaylorSymbol
    coeffs = {}
    for _ in range(n_terms):
        key = (int(rng.integers(-kmax, kmax + 1)),
               int(rng.integers(-kmax, kmax + 1)),
               int(rng.integers(0, dmax + 1)),
               int(rng.integers(0, dmax + 1)))
        coeffs[key] = scale * complex(rng.standard_normal(),
                                      rng.standard_normal())
    return FourierTaylorSymbol(coeffs)
