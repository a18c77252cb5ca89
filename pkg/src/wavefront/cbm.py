"""Coalescing Brownian particles on the line, the reference side of every
scaling comparison.

Particles follow discrete-time Gaussian paths.  Adjacent clusters merge if
their paths cross within a step, or (``bridge=True``, the default) with the
probability that the two Brownian bridges met inside the step,
``exp(-g0 * g1 / dt)`` for gaps ``g0`` and ``g1`` at the step ends.  With the
bridge correction the two-particle meeting law is exact at any ``dt``.
The merged cluster follows the path of its lower-start member.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _backend, _parallel, rng

DEFAULT_DT = 1e-4


@dataclass
class ParticleSystem:
    """Clusters of coalescing particles.

    ``starts`` are the initial positions (sorted); particle ``i`` starts at
    ``starts[i]``.  ``x[:n]`` are the current cluster positions, ``rep[:n]``
    the id of the particle whose path each cluster follows (its lowest
    member).  ``parent`` records merges so any start can be mapped to its
    cluster.
    """

    starts: np.ndarray
    x: np.ndarray
    rep: np.ndarray
    n: int
    dt: float = DEFAULT_DT
    k: int = 0
    seed: int = 0
    replicate: int = 0
    bridge: bool = True
    gaussian: bool = True
    parent: np.ndarray = None
    count_history: list = field(default_factory=list)

    @classmethod
    def from_starts(cls, starts, dt=DEFAULT_DT, seed=0, replicate=0, bridge=True, gaussian=True):
        starts = np.sort(np.asarray(starts, dtype=float))
        n = len(starts)
        # coincident starts are one particle from the outset
        keep = np.ones(n, dtype=bool)
        keep[1:] = np.diff(starts) > 0
        ids = np.arange(n, dtype=np.int64)
        parent = ids.copy()
        if not keep.all():
            first = np.maximum.accumulate(np.where(keep, ids, 0))
            parent = first.astype(np.int64)
        sys_ = cls(starts, starts[keep].copy(), ids[keep].copy(), int(keep.sum()), dt, 0, int(seed),
                   int(replicate), bridge, gaussian, parent)
        sys_.count_history.append((0, sys_.n))
        return sys_

    @classmethod
    def grid(cls, eps, length, **kw):
        """Dense start: a particle every ``eps`` on ``[0, length]``."""
        m = int(round(length / eps))
        return cls.from_starts(eps * np.arange(m + 1), **kw)

    @property
    def t(self):
        return self.k * self.dt

    @property
    def positions(self):
        return self.x[:self.n].copy()

    @property
    def representatives(self):
        return self.rep[:self.n].copy()

    def cluster_of(self):
        """Representative particle id for every start (the partition)."""
        p = self.parent
        while True:
            q = p[p]
            if np.array_equal(q, p):
                return p.copy()
            p = q


def evolve(system, t_target, backend=None):
    """Advance ``system`` in place to time ``t_target`` (a multiple of ``dt``)."""
    steps = t_target / system.dt - system.k
    nsteps = int(round(steps))
    if abs(steps - nsteps) > 1e-6 or nsteps < 0:
        raise ValueError("t_target - t must be a nonnegative multiple of dt")
    if nsteps == 0:
        return system
    kern = _backend.get(backend)
    step_key = rng.stream_key(system.seed, rng.CBM_STEP, system.replicate)
    bridge_key = rng.stream_key(system.seed, rng.CBM_BRIDGE, system.replicate)
    state = np.array([system.n, system.k, 0], dtype=np.int64)
    cap = max(4 * system.n, 1024)
    m_from = np.zeros(cap, np.int64)
    m_into = np.zeros(cap, np.int64)
    m_step = np.zeros(cap, np.int64)
    done = 0
    while done < nsteps:
        state[2] = 0
        got = kern.evolve_particles(system.x, system.rep, state, nsteps - done, system.dt,
                                    step_key, bridge_key, system.bridge, system.gaussian,
                                    m_from, m_into, m_step)
        nm = int(state[2])
        system.parent[m_from[:nm]] = m_into[:nm]
        done += got
        system.n = int(state[0])
        system.k = int(state[1])
        system.count_history.append((system.k, system.n))
    return system


# -- density -----------------------------------------------------------------

@dataclass
class DensityEstimate:
    t: float
    length: float
    replicates: int
    rho_hat: float
    se: float
    eps: float = None

    @property
    def scaled(self):
        """``rho_hat * sqrt(t)``, constant in t for standard CBM."""
        return self.rho_hat * math.sqrt(self.t)


def density_curve(eps, length, times, replicates, seed=0, dt=DEFAULT_DT, margin=None,
                  bridge=True, backend=None, points=False):
    """Cluster densities at each of ``times`` from a grid start on ``[0, length]``.

    Counts are taken in the interior window ``[margin, length - margin]``
    with ``margin = 4 sqrt(t)`` by default.  Returns a list of
    :class:`DensityEstimate` (and the time-``t`` window positions per
    replicate when ``points`` is true).
    """
    times = sorted(float(t) for t in times)
    if eps > 0.05 * math.sqrt(times[0]) + 1e-12:
        warnings.warn("grid spacing %.3g is coarse for t=%.3g; density will be underestimated"
                      % (eps, times[0]), stacklevel=2)
    margins = [4 * math.sqrt(t) if margin is None else margin for t in times]
    if 2 * max(margins) >= length:
        raise ValueError("interval too short for the exclusion margin")

    def one(r):
        sys_ = ParticleSystem.grid(eps, length, dt=dt, seed=seed, replicate=r, bridge=bridge)
        row, kept = [], []
        for t, m in zip(times, margins):
            evolve(sys_, t, backend=backend)
            x = sys_.positions
            inside = x[(x >= m) & (x < length - m)]
            row.append(len(inside))
            kept.append(inside if points else None)
        return row, kept

    results = _parallel.pmap(one, range(replicates))
    counts = np.array([row for row, _ in results], dtype=float)
    widths = np.array([length - 2 * m for m in margins])
    pts = {t: [kept[j] for _, kept in results] for j, t in enumerate(times)}
    out = []
    for j, t in enumerate(times):
        c = counts[:, j] / widths[j]
        se = c.std(ddof=1) / math.sqrt(replicates) if replicates > 1 else math.nan
        out.append(DensityEstimate(t, length, replicates, float(c.mean()), float(se), eps))
    if points:
        return out, pts
    return out


def estimate_density(eps, length, t, replicates, seed=0, dt=DEFAULT_DT, margin=None, **kw):
    """Mean clusters per unit length at time ``t``."""
    return density_curve(eps, length, [t], replicates, seed=seed, dt=dt, margin=margin, **kw)[0]


@dataclass
class Rho1:
    value: float
    se: float
    ladder: list
    t: float = 1.0

    def __float__(self):
        return self.value


class LadderError(RuntimeError):
    pass


def extrapolate(ladder):
    """Weighted least squares of ``rho_hat * sqrt(t)`` against ``eps / sqrt(t)``.

    Returns ``(intercept, se)``: the zero-spacing limit and its standard
    error.  Raises :class:`LadderError` when the ladder is not monotone in
    ``eps`` beyond three standard errors.
    """
    e = np.array([d.eps / math.sqrt(d.t) for d in ladder])
    y = np.array([d.scaled for d in ladder])
    s = np.array([d.se * math.sqrt(d.t) for d in ladder])
    order = np.argsort(e)
    e, y, s = e[order], y[order], s[order]
    for a, b, sa, sb in zip(y[:-1], y[1:], s[:-1], s[1:]):
        if b > a + 3 * math.hypot(sa, sb):
            raise LadderError("density increases with grid spacing beyond noise: %s" % list(zip(e, y, s)))
    w = 1.0 / np.maximum(s, 1e-12) ** 2
    A = np.vstack([np.ones_like(e), e]).T
    cov = np.linalg.inv(A.T @ (A * w[:, None]))
    beta = cov @ (A.T @ (w * y))
    return float(beta[0]), float(math.sqrt(cov[0, 0]))


_RHO1_CACHE = {}


def rho1(eps_ladder=(0.05, 0.02, 0.01), length=400.0, replicates=16, seed=0, t=1.0,
         dt=DEFAULT_DT, backend=None):
    """Extrapolated density constant ``rho_1`` with a standard error.

    The ladder is run once per argument set and cached for the session.
    The exact value for standard coalescing Brownian motion is
    ``1/sqrt(pi)``; this routine estimates it independently.
    """
    key = (tuple(eps_ladder), length, replicates, seed, t, dt)
    if key not in _RHO1_CACHE:
        ladder = [estimate_density(eps, length, t, replicates, seed=seed + i, dt=dt, backend=backend)
                  for i, eps in enumerate(eps_ladder)]
        value, se = extrapolate(ladder)
        _RHO1_CACHE[key] = Rho1(value, se, ladder, t)
    return _RHO1_CACHE[key]


# -- two-particle check ---------------------------------------------------------

def no_meet_probability(d, t):
    """Probability two independent standard Brownian motions at distance
    ``d`` have not met by time ``t`` (reflection principle)."""
    return float(special.erf(d / math.sqrt(4.0 * t)))


def simulate_no_meet(d, t, replicates, seed=0, dt=DEFAULT_DT, bridge=True, backend=None):
    """Fraction of particle pairs at distance ``d`` still apart at time ``t``.

    All pairs are simulated in one system, spaced far enough apart that
    different pairs cannot interact.
    """
    gap = max(100.0, 20 * math.sqrt(t) + 2 * d)
    left = gap * np.arange(replicates)
    starts = np.empty(2 * replicates)
    starts[0::2] = left
    starts[1::2] = left + d
    sys_ = ParticleSystem.from_starts(starts, dt=dt, seed=seed, bridge=bridge)
    evolve(sys_, t, backend=backend)
    part = sys_.cluster_of()
    apart = part[1::2] != part[0::2]
    p = apart.mean()
    return float(p), float(math.sqrt(p * (1 - p) / replicates))


# -- time-1 point process ------------------------------------------------------

@dataclass
class PointProcessSample:
    """Sorted points (1-d) or pairs (2-d) observed in ``window``."""

    points: np.ndarray
    window: tuple
    replicate: int = 0
    truncated: bool = False

    @property
    def intensity(self):
        lo, hi = self.window
        return len(self.points) / (hi - lo)

    def spacings(self):
        p = np.sort(self.points if self.points.ndim == 1 else self.points[:, 0])
        return np.diff(p)


def time1_points(system, window):
    """Cluster positions of an evolved system inside ``window``."""
    lo, hi = window
    x = system.positions
    return PointProcessSample(np.sort(x[(x >= lo) & (x < hi)]), (lo, hi), system.replicate)
