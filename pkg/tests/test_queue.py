import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavefront import _backend, queue as qc
from wavefront.distributions import make_distribution

U = make_distribution("uniform", 0.5, 1.5)


def test_unit_wave_from_integer_configuration():
    cfg = qc.QueueConfiguration.from_positions(np.arange(8.0), U)
    _, rec = qc.step(cfg, xi=[0.5])
    assert rec.W == 1 and rec.L == 2.0 and not rec.censored
    assert np.array_equal(cfg.positions(4), [0, 2, 3, 4])


def test_three_customer_wave():
    cfg = qc.QueueConfiguration.from_positions([0, 1.4, 2.8, 4.0, 4.9, 6.0], U)
    _, rec = qc.step(cfg, xi=[0.9, 1.2, 1.3])
    assert rec.W == 3
    x = cfg.positions(5)
    assert x == pytest.approx([0, 0.9, 2.1, 4.9, 6.0])
    assert x[3] - x[2] == pytest.approx(2.8)


def test_verbal_rule_compares_sum_before_draw():
    x0 = [0, 1.0, 2.0, 3.4, 3.6, 5.0]
    cfg = qc.QueueConfiguration.from_positions(x0, U, rule="verbal")
    _, rec = qc.step(cfg, xi=[1.2, 1.0])
    # 0 <= 2.0 - 1.5, 1.2 <= 3.4 - 1.5, then 2.2 > 3.6 - 1.5 stops at rank 3
    assert rec.W == 3
    assert cfg.positions(4) == pytest.approx([0, 1.2, 2.2, 3.6])
    cfg = qc.QueueConfiguration.from_positions(x0, U)
    _, rec = qc.step(cfg, xi=[1.2, 1.0])
    # the formula rule stops at once: 1.2 >= 2.0 - 1.5
    assert rec.W == 1


def test_constant_start_clears_in_one_step():
    # with spacings 0.5 the first stopping test cannot fail beyond rank 1
    cfg = qc.QueueConfiguration.constant(0.5, 10, U)
    _, rec = qc.step(cfg, xi=[0.5])
    assert rec.W == 1


def test_run_matches_repeated_steps():
    a = qc.QueueConfiguration.iid(U, seed=3)
    b = qc.QueueConfiguration.iid(U, seed=3)
    log = qc.run(a, 300, chunk=37).log
    recs = [qc.step(b)[1] for _ in range(300)]
    assert np.array_equal(log.W, [r.W for r in recs])
    assert np.array_equal(log.L, [r.L for r in recs])
    assert np.array_equal(a.positions(500), b.positions(500))


@pytest.mark.skipif(_backend._compiled is None, reason="compiled kernels not built")
@pytest.mark.parametrize("spec", [("uniform", 0.5, 1.5), ("two-point", 0.5, 1.5),
                                  ("triangular", 0.5, 0.8, 1.7)])
@pytest.mark.parametrize("rule", ["formula", "verbal"])
def test_backends_bit_identical(spec, rule):
    d = make_distribution(*spec)
    res = []
    for be in ("compiled", "python"):
        cfg = qc.QueueConfiguration.iid(d, seed=11, horizon_cap=3000, rule=rule)
        r = qc.run(cfg, 1500, track=[700, 1400], backend=be)
        res.append((r.log, cfg.positions(2000), cfg.last_moves(2000), r.trajectories))
    (la, pa, ma, ta), (lb, pb, mb, tb) = res
    assert np.array_equal(la.W, lb.W) and np.array_equal(la.L, lb.L)
    assert np.array_equal(la.censored, lb.censored)
    assert np.array_equal(pa, pb) and np.array_equal(ma, mb)
    assert ta[700].moves == tb[700].moves


def test_censoring_resets_tail():
    cfg = qc.QueueConfiguration.iid(U, seed=1, horizon_cap=5)
    log = qc.run(cfg, 2000).log
    assert log.censored.any()
    assert np.all(np.isinf(log.L[log.censored]))
    assert np.all(log.W <= 5)
    lm = cfg.last_moves(50)
    assert (lm == qc.UNKNOWN).any()


def test_tracked_individual_served():
    cfg = qc.QueueConfiguration.iid(U, seed=2)
    qc.run(cfg, 100)
    tr = qc.track_individual(cfg, 180)
    assert tr.served
    x = tr.positions()
    assert x[-1] == 0.0 and np.all(np.diff(x) < 0)
    with pytest.raises(ValueError):
        qc.track_individual(cfg, 10)


def test_block_decompose_flags():
    cfg = qc.QueueConfiguration.iid(U, seed=4)
    qc.run(cfg, 5000)
    bd = qc.block_decompose(cfg, 200)
    assert bd.known.all()
    # rank 0 and rank 1 last moved together iff the last wave had W >= 2
    lm = cfg.last_moves(3)
    assert bd.same_block[0] == (lm[1] == cfg.t)


@given(st.lists(st.floats(0.5, 1.5), min_size=3, max_size=40),
       st.lists(st.floats(0.5, 1.5), min_size=1, max_size=40), st.sampled_from(["formula", "verbal"]))
@settings(max_examples=300, deadline=None)
def test_single_step_invariants(spacings, xi, rule):
    x0 = np.concatenate(([0.0], np.cumsum(spacings)))
    cfg = qc.QueueConfiguration.from_positions(x0, U, seed=1, rule=rule)
    _, rec = qc.step(cfg, xi=xi)
    W = rec.W
    x = cfg.positions(W + 2)
    assert W >= 1 and x[0] == 0.0
    assert np.all(np.diff(x) > 0) and np.all(np.diff(x) <= 2 * U.c_plus + 1e-12)
    # moved customers sit at the partial sums of the wave
    full = np.concatenate((xi, np.zeros(max(0, W - len(xi)))))
    if W - 1 <= len(xi):
        assert np.allclose(x[1:W], np.cumsum(full)[:W - 1])
    # unmoved customers keep their previous position (one rank closer)
    if W + 1 < len(x0):
        n = len(x0) - W - 1
        assert np.array_equal(cfg.positions(W + n)[W:], x0[W + 1:W + 1 + n])
    if rule == "formula" and W >= 2:
        assert x[W] - x[W - 1] > U.c_minus + U.c_plus
    assert rec.L == x[W]
