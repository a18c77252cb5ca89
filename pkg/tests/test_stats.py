import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from wavefront import queue as qc, stats
from wavefront.distributions import make_distribution


def _log(W, censored=None):
    W = np.asarray(W, dtype=np.int64)
    c = np.zeros(len(W), bool) if censored is None else np.asarray(censored)
    return qc.WaveLog(np.arange(1, len(W) + 1), W, np.ones(len(W)), c)


def test_tail_all_unit_waves():
    est = stats.wave_tail(_log(np.ones(500)), [0, 1, 2, 8], burn_in=0)
    assert est.rho_hat.tolist() == [1.0, 0.0, 0.0, 0.0]


@pytest.mark.filterwarnings("ignore:window")
def test_tail_counts_and_censoring():
    est = stats.wave_tail(_log([1, 5, 3, 2, 9], [0, 0, 0, 1, 0]), [0, 2, 4, 100], burn_in=0)
    # the censored wave of length 2 exceeds every threshold
    assert est.counts.tolist() == [5, 4, 3, 1]
    est = stats.wave_tail(_log([1, 5, 3, 2, 9]), [2], burn_in=2)
    assert est.tau == 3 and est.counts.tolist() == [2]
    with pytest.raises(ValueError, match="empty window"):
        stats.wave_tail(_log([1, 2]), [1], burn_in=5)


@given(st.lists(st.integers(1, 60), min_size=30, max_size=200))
@settings(max_examples=100, deadline=None)
def test_tail_monotone_and_exact_counts(W):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = stats.wave_tail(_log(W), range(0, 70, 3))
    assert np.all(np.diff(est.counts) <= 0)
    assert np.array_equal(est.counts, [sum(w > j for w in W) for j in est.j_grid])


def _synthetic(rho):
    j = np.array([16, 32, 64, 128, 256, 512, 1024])
    return stats.TailEstimate(j, (rho(j) * 1e9).astype(np.int64), 10 ** 9, np.zeros(7))


def test_fit_exact_power_law():
    fit = stats.fit_exponent(_synthetic(lambda j: j ** -0.5))
    assert fit.slope == pytest.approx(-0.5, abs=1e-6) and fit.r2 == pytest.approx(1.0)
    assert stats.fit_exponent(_synthetic(lambda j: 0.3 + 0 * j)).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_shrinks_window_on_zero_counts():
    est = _synthetic(lambda j: np.where(j > 300, 0.0, j ** -0.5))
    with pytest.warns(UserWarning, match="shrunk"):
        fit = stats.fit_exponent(est)
    assert fit.j_max == 256 and fit.npoints == 5


def test_q_enumeration_examples(twopoint):
    assert stats.q_mc(1, 1.0, twopoint).q_hat == 1.0
    e = stats.q_mc(1, 0.5, twopoint)
    assert e.exact and e.q_hat == 0.75
    # j = 2 by hand: steps -1, 0, +1 w.p. 1/4, 1/2, 1/4; max <= 0 needs
    # S_1 = -1 (then anything: 1/4) or S_1 = 0 and S_2 <= 0 (1/2 * 3/4)
    assert stats.q_mc(2, 0.0, twopoint).q_hat == pytest.approx(0.25 + 0.375)


def test_q_bounds(uniform):
    j = 5
    assert stats.q_mc(j, j * (uniform.c_plus - uniform.c_minus), uniform, 2000, 1).q_hat == 1.0
    assert stats.q_mc(j, uniform.c_minus - uniform.c_plus - 1e-9, uniform, 2000, 1).q_hat == 0.0


def test_q_monotone_on_grid(uniform):
    rows = stats.walk_envelope(uniform, (16, 64, 256), (0.5, 1.0, 2.0), 0.01, 20_000, rng=0)
    q = {(r.j, r.y): r.q_hat for r in rows}
    for y in (0.5, 1.0, 2.0):
        assert q[(16, y)] >= q[(64, y)] >= q[(256, y)]
    for j in (16, 64, 256):
        assert q[(j, 0.5)] <= q[(j, 1.0)] <= q[(j, 2.0)]


def test_q_mc_agrees_with_enumeration(twopoint):
    exact = stats.q_mc(4, 1.0, twopoint).q_hat
    m = stats.walk_maxima([4], twopoint, 200_000, np.random.default_rng(3))[:, 0]
    assert abs(np.mean(m <= 1.0) - exact) < 4 * math.sqrt(exact * (1 - exact) / 200_000)


def test_q_given_single_increment(uniform):
    # Pr(xi' <= x + y) for uniform on [0.5, 1.5]
    assert stats.q_given(1, 0.2, [0.8], uniform).q_hat == pytest.approx(0.5)
    e = stats.q_given(3, 0.5, [1.5, 1.5, 1.5], uniform, 20_000, rng=1)
    assert e.q_hat >= stats.q_mc(3, 0.5, uniform, 20_000, 2).q_hat


def test_q_given_tower_property(uniform):
    rng = np.random.default_rng(5)
    x = uniform.sample(rng, (400, 8))
    qs = [e.q_hat for e in stats.q_given(8, 1.0, x, uniform, 2000, rng=6)]
    q = stats.q_mc(8, 1.0, uniform, 200_000, 7).q_hat
    assert np.mean(qs) == pytest.approx(q, abs=0.02)


def test_goodness_exact_j1(twopoint):
    # q(1, 0.5) = 3/4, so "not good" needs q_{1,0.5}(x) > 1.5: impossible
    g = stats.goodness_rate(1, 0.5, twopoint)
    assert g.exact and g.rate == 0.0
    # with a tiny reference every sequence with q_{1,y}(x) > 0 is not good
    g = stats.goodness_rate(1, 0.5, twopoint, q_ref=0.3)
    # x = 0.5: Pr(xi' <= 1.0) = 1/2 > 0.6? no; x = 1.5: 1 > 0.6 yes
    assert g.rate == 0.5


def test_goodness_huge_y(uniform):
    assert stats.goodness_rate(8, 100.0, uniform, 500, inner=50, rng=0).rate == 0.0


def test_block_compare_all_true_and_all_false(uniform):
    gaps = np.full(10, 0.9)
    c = stats.compare_from_flags(0, gaps, np.ones(10, bool), 10, uniform, 0)
    assert c.gap == 0.0 and c.bad_count == 0 and c.holds()
    c = stats.compare_from_flags(0, gaps, np.zeros(10, bool), 10, uniform, 0)
    assert c.bound == pytest.approx(10 * (uniform.c_plus - uniform.c_minus)) and c.holds()


def test_block_compare_on_run(uniform):
    cfg = qc.QueueConfiguration.iid(uniform, seed=9)
    qc.run(cfg, 20_000)
    cs = stats.block_walk_compare(cfg, None, rng=0, ks=[10, 100])
    assert [c.k for c in cs] == [10, 100]
    assert all(c.gap <= c.dynamic_bound + 1e-9 for c in cs)
    assert cs[1].X_k == pytest.approx(cfg.positions(101)[100])


def test_unknown_flags_raise(uniform):
    cfg = qc.QueueConfiguration.iid(uniform, seed=1, horizon_cap=5)
    qc.run(cfg, 3000)
    with pytest.raises(stats.UnknownBlockError):
        stats.block_flags(cfg, 100)


def test_ks_one_sample_matches_scipy(uniform):
    x = uniform.sample(np.random.default_rng(0), 700)
    d, p = stats.ks_1samp(x, uniform.cdf)
    ref = sps.kstest(x, uniform.cdf, method="exact")
    assert d == pytest.approx(ref.statistic) and p == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_two_sample_matches_scipy():
    g = np.random.default_rng(1)
    x, y = g.normal(size=800), g.normal(0.1, 1, size=1200)
    d, p = stats.ks_2samp(x, y)
    ref = sps.ks_2samp(x, y, method="asymp")
    # scipy uses the finite-n law at the rounded effective size, this the
    # limiting Kolmogorov law: the p-values agree to within a few percent
    assert d == pytest.approx(ref.statistic) and p == pytest.approx(ref.pvalue, rel=0.1)
    # ties on a lattice
    a, b = g.integers(0, 5, 300).astype(float), g.integers(0, 5, 400).astype(float)
    assert stats.ks_2samp(a, b)[0] == pytest.approx(sps.ks_2samp(a, b).statistic)


def test_conditional_sample_null_and_insufficient(uniform):
    cfg = qc.QueueConfiguration.iid(uniform, seed=3)
    with pytest.raises(ValueError, match="insufficient"):
        stats.conditional_spacing_sample([cfg], (1, 10))


def test_write_csv_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    v = 0.1 + 0.2
    stats.write_csv(p, ["a", "b", "c"], [(1, v, True), (2, math.inf, False)])
    lines = p.read_text().splitlines()
    assert lines[1] == "1,%r,1" % v and float(lines[1].split(",")[1]) == v
    assert lines[2] == "2,inf,0"
