import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavefront.distributions import make_distribution, parse_distribution


def test_uniform_rescaled_to_mean_one():
    d = make_distribution("uniform", 1, 3)
    assert d.params == (0.5, 1.5)
    assert d.c_minus == 0.5 and d.c_plus == 1.5
    assert d.sigma == pytest.approx(1 / math.sqrt(12))


def test_twopoint_moments(twopoint):
    assert twopoint.sigma == pytest.approx(0.5)
    skew = parse_distribution("twopoint:1,3,0.25")
    # atoms 1 and 3 with weights 1/4, 3/4: mean 2.5, rescaled atoms 0.4 and 1.2
    assert skew.params == pytest.approx((0.4, 1.2))
    assert skew.sigma == pytest.approx(0.8 * math.sqrt(0.25 * 0.75))


def test_triangular_moments(triangular):
    a, m, b = triangular.params
    assert (a + m + b) / 3 == pytest.approx(1.0)
    x = triangular.quantile(np.linspace(0, 1, 400_001)[:-1] + 1.25e-6)
    assert x.mean() == pytest.approx(1.0, abs=1e-4)
    assert x.std() == pytest.approx(triangular.sigma, rel=1e-3)


@pytest.mark.parametrize("spec", ["uniform:0.5,1.5", "twopoint:0.5,1.5", "tri:0.5,0.8,1.7",
                                  "custom:0.5@0.2,1@0.5,2@0.3"])
def test_sample_moments(spec):
    d = parse_distribution(spec)
    x = d.sample(np.random.default_rng(0), 400_000)
    assert x.mean() == pytest.approx(1.0, abs=0.005)
    assert x.std() == pytest.approx(d.sigma, rel=0.01)
    assert x.min() >= d.c_minus and x.max() <= d.c_plus


@given(st.floats(0.0, 0.999999))
@settings(max_examples=200, deadline=None)
def test_cdf_inverts_quantile(u):
    for d in (make_distribution("uniform", 0.5, 1.5), make_distribution("triangular", 0.5, 0.8, 1.7)):
        assert float(d.cdf(d.quantile(u))) == pytest.approx(u, abs=1e-9)


def test_errors():
    with pytest.raises(ValueError, match="c_minus must be positive"):
        make_distribution("uniform", 0, 2)
    with pytest.raises(ValueError, match="sigma = 0"):
        make_distribution("uniform", 1, 1)
    with pytest.raises(ValueError):
        parse_distribution("poisson:1")
    with pytest.raises(ValueError):
        make_distribution("custom", 1, 2, probs=(0.5, 0.6))
