import numpy as np
import pytest

from infogeo.catalog import BUILTIN_CONFIGS, build
from infogeo.core import BuiltinManifoldSpec, make_manifold
from infogeo.divergences import euclidean_generator, kl_generator, qlog_generator


@pytest.fixture
def kl():
    return kl_generator()


@pytest.fixture
def euclid():
    return euclidean_generator()


@pytest.fixture
def exp3():
    return make_manifold(BuiltinManifoldSpec("exponential", 3, [[1, 0, -1]]))


@pytest.fixture
def bernoulli_natural():
    return make_manifold(BuiltinManifoldSpec("exponential", 2, [[1, 0]]))


@pytest.fixture
def bernoulli_mean():
    return make_manifold(BuiltinManifoldSpec("curved_polynomial", 2, coefficients=[[0, 1]]))


@pytest.fixture
def curved():
    return make_manifold(BuiltinManifoldSpec("curved_polynomial", 3, coefficients=[[0, 1], [0, 0, 1]]))


@pytest.fixture
def qexp_half():
    return make_manifold(BuiltinManifoldSpec("q_exponential", 3, [[1, 0, -1]], q=0.5))


@pytest.fixture
def qlog_half():
    return qlog_generator(0.5)


@pytest.fixture(params=sorted(BUILTIN_CONFIGS))
def config(request):
    return (request.param, *build(request.param))


def random_simplex(rng, n, size):
    """Dirichlet(1) points pushed away from the boundary."""
    p = rng.dirichlet(np.ones(n), size=size)
    p = 0.98 * p + 0.02 / n
    return p / p.sum(axis=1, keepdims=True)
