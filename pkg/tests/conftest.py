import pytest

from wavefront.distributions import make_distribution


@pytest.fixture
def uniform():
    return make_distribution("uniform", 0.5, 1.5)


@pytest.fixture
def twopoint():
    return make_distribution("two-point", 0.5, 1.5)


@pytest.fixture
def triangular():
    return make_distribution("triangular", 0.5, 0.8, 1.7)
