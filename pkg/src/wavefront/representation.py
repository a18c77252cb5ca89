"""Centered counting functions, the ``G(t, x)`` family and its rescalings.

A configuration ``0 = x_0 < x_1 < ...`` is encoded by its counting function
``F(x) = max{k : x_k <= x} - x``; the function at step ``t`` shifted by
``t`` is ``G(t, x) = t + F_t(x)``.  Consecutive members agree from the
position of the last moved-to customer onward, so the family coalesces like
a system of random walks.  Functions are kept as exact jump lists.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import queue as qc
from .cbm import PointProcessSample
from .stats import write_csv

BEYOND_WINDOW = math.inf


@dataclass
class CountingFunction:
    """Jump list of ``t + F(x)`` on ``[0, x_max]``.

    ``jumps[k]`` is ``x_k``.  The value just after jump ``k`` is
    ``offset + k - x_k``.  Integer parts are kept separate so identities
    such as ``x + G(t, x) = t + count`` are checked without rounding.
    """

    jumps: np.ndarray
    x_max: float
    offset: int = 0

    def count(self, x):
        """``max{k : x_k <= x}`` (integer), for ``x`` in the window."""
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x_max) or np.any(x < 0):
            raise ValueError("x outside [0, %g]" % self.x_max)
        return np.searchsorted(self.jumps, x, side="right") - 1

    def __call__(self, x):
        return self.offset + self.count(x) - np.asarray(x, dtype=float)

    def values(self):
        """Values right after each jump."""
        return self.offset + np.arange(len(self.jumps)) - self.jumps

    def rows(self):
        for x, v in zip(self.jumps, self.values()):
            yield self.offset, float(x), float(v)

    def trace(self):
        """Sawtooth polyline ``(x, value)`` including the vertical jumps."""
        vals = self.values()
        xs, vs = [self.jumps[0]], [vals[0]]
        for k in range(1, len(self.jumps)):
            x = self.jumps[k]
            xs += [x, x]
            vs += [vals[k - 1] - (x - self.jumps[k - 1]), vals[k]]
        xs.append(self.x_max)
        vs.append(vals[-1] - (self.x_max - self.jumps[-1]))
        return np.array(xs), np.array(vs)


def counting_function(config, x_max, t=None):
    """Counting function of ``config`` on ``[0, x_max]``, shifted by its step.

    The lazy tail is extended as needed to cover ``x_max``.
    """
    n = max(16, int(x_max * 1.2 / config.dist.mean) + 2)
    while True:
        x = config.positions(n)
        if x[-1] > x_max:
            break
        n *= 2
    jumps = x[:np.searchsorted(x, x_max, side="right")]
    return CountingFunction(jumps, float(x_max), config.t if t is None else int(t))


def coalescence_position(g_prev, g_curr):
    """Least common jump from which the two functions agree on the window.

    Returns :data:`BEYOND_WINDOW` when they do not agree anywhere in the
    shared window.
    """
    x_max = min(g_prev.x_max, g_curr.x_max)
    a = g_prev.jumps[:np.searchsorted(g_prev.jumps, x_max, side="right")]
    b = g_curr.jumps[:np.searchsorted(g_curr.jumps, x_max, side="right")]
    i, j = len(a), len(b)
    while i > 0 and j > 0 and a[i - 1] == b[j - 1]:
        i -= 1
        j -= 1
    if i == len(a):
        return BEYOND_WINDOW
    # equal jump sets on the suffix; values agree iff the integer parts do
    if g_prev.offset + i != g_curr.offset + j:
        return BEYOND_WINDOW
    return float(a[i])


def agree_beyond(g_prev, g_curr, x_star, xs):
    """True if both functions agree at every sample point ``>= x_star``."""
    xs = np.asarray(xs, dtype=float)
    xs = xs[(xs >= x_star) & (xs <= min(g_prev.x_max, g_curr.x_max))]
    return bool(np.all(g_prev.offset + g_prev.count(xs) == g_curr.offset + g_curr.count(xs)))


# -- rescaled families -----------------------------------------------------------


@dataclass
class RescaledFamily:
    """Members ``tau -> H(y, tau)`` sampled on ``tau_grid``.

    ``values[m]`` is ``(G(t_m, n tau) - t_ref) / sqrt(n)`` for member ``m``;
    ``y[m] = (t_m - t_ref) / (sigma sqrt(n))`` its initial label.
    ``normalized`` divides by ``sigma`` so that members behave like
    standard coalescing Brownian paths.
    """

    n: int
    t_ref: int
    sigma: float
    tau_grid: np.ndarray
    steps: np.ndarray
    y: np.ndarray
    values: np.ndarray

    @property
    def normalized(self):
        return self.values / self.sigma

    def __len__(self):
        return len(self.steps)


def required_steps(n, sigma, t_ref, y_window):
    lo = t_ref + sigma * math.sqrt(n) * y_window[0]
    hi = t_ref + sigma * math.sqrt(n) * y_window[1]
    return int(math.ceil(lo)), int(math.floor(hi))


def rescale_family(config, n, t_ref, y_window=(-6.0, 6.0), T_max=4.0, tau_grid=None, backend=None):
    """Run ``config`` through the steps of ``y_window`` and record the family.

    ``config`` must sit strictly before the first needed step; it is advanced
    in place.  Members whose functions coincide on ``[n, n T_max]``
    (consecutive steps with ``L(t) <= n``) are merged.
    """
    sigma = config.dist.sigma
    t_lo, t_hi = required_steps(n, sigma, t_ref, y_window)
    if t_lo < 1 or config.t >= t_lo:
        raise ValueError("window needs steps %d..%d; configuration is at step %d (need tau >= %d "
                         "and a start before %d)" % (t_lo, t_hi, config.t, t_hi, t_lo))
    if tau_grid is None:
        tau_grid = np.linspace(1.0, T_max, 61)
    tau_grid = np.asarray(tau_grid, dtype=float)
    xs = n * tau_grid
    x_max = float(xs[-1])
    qc.run(config, t_lo - 1 - config.t, backend=backend)
    steps, vals = [], []
    prev = None
    for t in range(t_lo, t_hi + 1):
        _, rec = qc.step(config)
        g = counting_function(config, x_max)
        row = (t + g.count(xs) - xs - t_ref) / math.sqrt(n)
        if prev is not None and (not rec.censored) and rec.L <= n:
            if not np.array_equal(g.count(xs), prev.count(xs) - 1):
                raise AssertionError("members at steps %d and %d should coincide" % (t - 1, t))
            prev = g
            continue
        steps.append(t)
        vals.append(row)
        prev = g
    steps = np.array(steps, dtype=np.int64)
    return RescaledFamily(n, int(t_ref), sigma, tau_grid, steps,
                          (steps - t_ref) / (sigma * math.sqrt(n)), np.array(vals))


# -- point processes -----------------------------------------------------------


def wave_time_points(records, n, window, t_ref, sigma, by="position", replicate=0):
    """Normalized times ``(t - t_ref) / (sigma sqrt(n))`` of long waves.

    ``by="position"`` selects waves with ``L(t) > n``; ``by="rank"`` those
    with ``W(t) > n``.  ``window`` is a step range ``(t_lo, t_hi)``.
    """
    log = records if isinstance(records, qc.WaveLog) else qc.WaveLog.from_records(records)
    t_lo, t_hi = window
    sel = (log.t >= t_lo) & (log.t <= t_hi)
    if by == "position":
        hit = log.L > n
    elif by == "rank":
        hit = (log.W > n) | log.censored
    else:
        raise ValueError("by must be 'position' or 'rank'")
    scale = sigma * math.sqrt(n)
    pts = (log.t[sel & hit] - t_ref) / scale
    lo = (t_lo - t_ref) / scale
    hi = (t_hi - t_ref) / scale
    return PointProcessSample(np.sort(pts.astype(float)), (lo, hi), replicate)


def individual_near(config, n):
    """Label of the customer with the largest position not exceeding ``n``."""
    g = counting_function(config, float(n))
    return config.t + int(g.count(float(n)))


def trajectory_points(traj, n, t_ref, t_end=None, replicate=0):
    """Planar points ``((t_u - t_ref)/sqrt(n), (n - x_u)/sqrt(n))`` for moves after ``t_ref``."""
    r = math.sqrt(n)
    pts = [((tu - t_ref) / r, (n - xu) / r) for tu, xu in traj.moves if tu > t_ref]
    arr = np.array(pts, dtype=float).reshape(-1, 2)
    truncated = bool(traj.served and t_end is not None and traj.s < t_end)
    hi = ((t_end if t_end is not None else (traj.moves[-1][0] if traj.moves else t_ref)) - t_ref) / r
    return PointProcessSample(arr, (0.0, hi), replicate, truncated)


# -- exports ------------------------------------------------------------------


def write_jump_lists(path, functions):
    rows = (row for g in functions for row in g.rows())
    write_csv(path, ["t", "jump_position", "value_after_jump"], rows)


def write_points(path, samples):
    rows = []
    for s in samples:
        for p in np.atleast_1d(s.points):
            rows.append([s.replicate] + list(np.atleast_1d(p)))
    dim = 1 if not samples or np.ndim(samples[0].points) == 1 else 2
    write_csv(path, ["replicate"] + (["x"] if dim == 1 else ["t", "x"]), rows)


def write_g_traces(path, functions):
    """Plot-ready traces of several ``G(t, .)`` graphs."""
    rows = []
    for g in functions:
        xs, vs = g.trace()
        rows += [[g.offset, x, v] for x, v in zip(xs, vs)]
    write_csv(path, ["t", "x", "G"], rows)


def write_trajectory_traces(path, trajectories):
    """Polyline ``(t, x)`` of each tracked individual, with its holding
    periods drawn as horizontal segments."""
    rows = []
    for tr in trajectories:
        prev = None
        for tu, xu in tr.moves:
            if prev is not None:
                rows.append([tr.s, tu, prev])
            rows.append([tr.s, tu, xu])
            prev = xu
    write_csv(path, ["s", "t", "x"], rows)
