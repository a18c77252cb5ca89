import math

import numpy as np
import pytest

from wavefront import _backend, cbm


def test_single_particle_is_a_random_walk():
    finals = []
    for r in range(400):
        s = cbm.ParticleSystem.from_starts([0.0], dt=0.01, seed=1, replicate=r)
        cbm.evolve(s, 1.0)
        assert s.n == 1
        finals.append(s.positions[0])
    assert np.var(finals) == pytest.approx(1.0, rel=0.2)
    assert abs(np.mean(finals)) < 0.2


def test_coincident_starts_merge_at_once():
    s = cbm.ParticleSystem.from_starts([0.3, 0.3], seed=0)
    assert s.n == 1
    assert s.cluster_of().tolist() == [0, 0]


def test_cluster_count_nonincreasing_and_order_kept():
    s = cbm.ParticleSystem.grid(0.05, 20.0, seed=3, dt=1e-3)
    counts = [s.n]
    for k in range(1, 21):
        cbm.evolve(s, 0.05 * k)
        x = s.positions
        assert np.all(np.diff(x) > 0)
        counts.append(s.n)
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    part = s.cluster_of()
    # the partition is into intervals of starts, labelled by their lowest member
    assert np.all(np.diff(part) >= 0) and np.all(part <= np.arange(len(part)))
    assert len(np.unique(part)) == s.n
    assert set(np.unique(part)) == set(s.representatives)


def test_no_meet_closed_form():
    assert cbm.no_meet_probability(0.0, 1.0) == 0.0
    assert cbm.no_meet_probability(2.0, 1.0) == pytest.approx(math.erf(1.0))


def test_two_particles_reflection_principle():
    p, se = cbm.simulate_no_meet(0.5, 0.25, 3000, seed=4, dt=1e-3)
    assert abs(p - cbm.no_meet_probability(0.5, 0.25)) <= 3 * se


def test_plain_crossing_rule_overestimates_survival():
    # without the bridge correction pairs can cross back unnoticed
    p, se = cbm.simulate_no_meet(0.5, 0.25, 3000, seed=4, dt=1e-2, bridge=False)
    assert p > cbm.no_meet_probability(0.5, 0.25) + 3 * se


def test_single_start_density():
    for t in (0.25, 1.0):
        d = cbm.estimate_density(0.05, 40.0, t, 2, margin=0.0)
        assert d.rho_hat >= 1 / 40.0
    s = cbm.ParticleSystem.from_starts([10.0], seed=0)
    cbm.evolve(s, 0.5)
    assert s.n == 1


def test_coarse_grid_warns():
    with pytest.warns(UserWarning, match="coarse"):
        cbm.density_curve(0.2, 20.0, [1.0], 1)


def test_margin_too_wide():
    with pytest.raises(ValueError, match="margin"):
        cbm.density_curve(0.05, 6.0, [1.0], 1)


def test_extrapolation_and_monotonicity_guard():
    mk = lambda eps, rho, se=0.001: cbm.DensityEstimate(1.0, 100.0, 4, rho, se, eps)
    v, se = cbm.extrapolate([mk(0.05, 0.55), mk(0.02, 0.556), mk(0.01, 0.558)])
    assert v == pytest.approx(0.56, abs=0.002) and se > 0
    with pytest.raises(cbm.LadderError):
        cbm.extrapolate([mk(0.05, 0.60), mk(0.02, 0.556), mk(0.01, 0.55)])


def test_time1_points():
    s = cbm.ParticleSystem.grid(0.02, 30.0, seed=2)
    cbm.evolve(s, 1.0)
    pp = cbm.time1_points(s, (4.0, 26.0))
    assert np.all(np.diff(pp.points) > 0)
    assert pp.intensity == pytest.approx(len(pp.points) / 22.0)
    assert len(cbm.time1_points(s, (100.0, 101.0)).points) == 0


@pytest.mark.skipif(_backend._compiled is None, reason="compiled kernels not built")
@pytest.mark.parametrize("gaussian", [True, False])
def test_backends_identical(gaussian):
    out = []
    for be in ("compiled", "python"):
        s = cbm.ParticleSystem.grid(0.02, 10.0, seed=5, dt=1e-3, gaussian=gaussian)
        cbm.evolve(s, 0.2, backend=be)
        out.append((s.positions, s.cluster_of()))
    assert np.array_equal(out[0][0], out[1][0]) and np.array_equal(out[0][1], out[1][1])
