"""Estimators and checks: wave-tail rates, walk maxima, goodness, blocks."""
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .queue import WaveLog, block_decompose

# -- wave tail -----------------------------------------------------------------


@dataclass
class TailEstimate:
    """Time-averaged frequency of ``{W(t) > j}`` over a window of ``tau`` steps.

    ``se`` is a batch-means standard error: waves are strongly correlated in
    time, so the binomial formula would be far too optimistic.
    """

    j_grid: np.ndarray
    counts: np.ndarray
    tau: int
    se: np.ndarray

    @property
    def rho_hat(self):
        return self.counts / self.tau

    def rows(self):
        for j, n, r, s in zip(self.j_grid, self.counts, self.rho_hat, self.se):
            yield int(j), int(n), float(r), float(s)


def wave_tail(records, j_grid, burn_in=0, batches=20):
    """Count waves longer than each ``j`` after ``burn_in``.

    Censored waves count as exceeding every ``j``.
    """
    log = records if isinstance(records, WaveLog) else WaveLog.from_records(records)
    j_grid = np.asarray(sorted(j_grid), dtype=np.int64)
    keep = log.t > burn_in
    W = log.W[keep]
    cens = np.asarray(log.censored[keep], dtype=bool)
    tau = len(W)
    if tau == 0:
        raise ValueError("empty window: no steps after burn_in=%d" % burn_in)
    if len(j_grid) and tau < 10 * j_grid[-1]:
        warnings.warn("window of %d steps is short for j up to %d" % (tau, j_grid[-1]), stacklevel=2)
    # counts via a sorted copy: N_j = #{W > j} + #{censored with W <= j}
    Ws = np.sort(W)
    counts = len(Ws) - np.searchsorted(Ws, j_grid, side="right")
    if cens.any():
        Wc = np.sort(W[cens])
        counts = counts + np.searchsorted(Wc, j_grid, side="right")
    se = np.full(len(j_grid), np.nan)
    b = min(batches, tau)
    if b >= 2:
        edges = np.linspace(0, tau, b + 1).astype(np.int64)
        exceed = (W[:, None] > j_grid[None, :]) | cens[:, None]
        csum = np.vstack([np.zeros(len(j_grid)), np.cumsum(exceed, axis=0)])
        means = (csum[edges[1:]] - csum[edges[:-1]]) / np.diff(edges)[:, None]
        se = means.std(axis=0, ddof=1) / math.sqrt(b)
    return TailEstimate(j_grid, counts.astype(np.int64), tau, se)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    j_min: int
    j_max: int
    npoints: int

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def fit_exponent(est, j_min=16, j_max=1024):
    """OLS of ``log rho_hat`` on ``log j`` over ``[j_min, j_max]``.

    If some thresholds in the window have zero counts the window is cut back
    to the largest ``j`` before the first zero, with a warning.
    """
    j = np.asarray(est.j_grid, dtype=float)
    rho = np.asarray(est.rho_hat, dtype=float)
    sel = (j >= j_min) & (j <= j_max)
    j, rho = j[sel], rho[sel]
    zero = np.flatnonzero(rho <= 0)
    if len(zero):
        warnings.warn("zero counts from j=%d on; fit window shrunk" % j[zero[0]], stacklevel=2)
        j, rho = j[:zero[0]], rho[:zero[0]]
    if len(j) < 4:
        raise ValueError("need at least 4 thresholds with nonzero counts, have %d" % len(j))
    res = sps.linregress(np.log(j), np.log(rho))
    return ExponentFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2),
                       int(j[0]), int(j[-1]), len(j))


# -- symmetrized walk maxima -------------------------------------------------------


@dataclass
class QEstimate:
    j: int
    y: float
    q_hat: float
    replicates: int
    exact: bool = False

    @property
    def se(self):
        if self.exact:
            return 0.0
        return math.sqrt(self.q_hat * (1 - self.q_hat) / self.replicates)


_ENUM_LIMIT = 1 << 16


def _difference_law(dist):
    """Atoms and weights of ``xi' - xi''`` for an atom-table law."""
    v = np.asarray(dist.params)
    p = np.asarray(dist.probs)
    d = (v[:, None] - v[None, :]).ravel()
    w = (p[:, None] * p[None, :]).ravel()
    vals, inv = np.unique(d, return_inverse=True)
    return vals, np.bincount(inv, weights=w)


def _enumerate_q(j, ys, dist):
    """Exact ``q(j, y)`` by enumerating every outcome of the difference walk."""
    vals, w = _difference_law(dist)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    out = np.zeros(len(ys))
    for combo in itertools.product(range(len(vals)), repeat=j):
        idx = np.array(combo)
        m = np.max(np.cumsum(vals[idx]))
        out += np.prod(w[idx]) * (m <= ys)
    return out


def _can_enumerate(j, dist):
    return dist.is_lattice and len(_difference_law(dist)[0]) ** j <= _ENUM_LIMIT


def walk_maxima(j_list, dist, replicates, rng, block=20000):
    """Running maxima ``max_{k<=j} S^sym_k`` sampled at every ``j`` in ``j_list``.

    Returns an array of shape ``(replicates, len(j_list))``; the same walks
    serve every ``j`` (common random numbers).
    """
    j_list = np.asarray(j_list, dtype=np.int64)
    jmax = int(j_list.max())
    out = np.empty((replicates, len(j_list)))
    done = 0
    while done < replicates:
        m = min(block, replicates - done, max(1, 2_000_000 // jmax))
        inc = dist.sample(rng, (m, jmax)) - dist.sample(rng, (m, jmax))
        run = np.maximum.accumulate(np.cumsum(inc, axis=1), axis=1)
        out[done:done + m] = run[:, j_list - 1]
        done += m
    return out


def q_mc(j, y, dist, replicates=100_000, rng=None):
    """Estimate ``q(j, y) = Pr(max_{k<=j} S^sym_k <= y)``.

    ``S^sym`` is the walk with increments ``xi' - xi''`` of two independent
    draws.  Atom-table laws with few enough outcomes are enumerated exactly.
    ``y`` may be an array, in which case a list is returned.
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if _can_enumerate(j, dist):
        q = _enumerate_q(j, ys, dist)
        res = [QEstimate(j, float(yy), float(qq), 0, True) for yy, qq in zip(ys, q)]
    else:
        rng = np.random.default_rng(rng)
        m = walk_maxima([j], dist, replicates, rng)[:, 0]
        res = [QEstimate(j, float(yy), float(np.mean(m <= yy)), replicates) for yy in ys]
    return res if np.ndim(y) else res[0]


def q_given(j, y, x, dist, replicates=10_000, rng=None):
    """``q_{j,y}(x) = Pr(max_k sum_{i<=k} (xi'_i - x_i) <= y)`` with ``x`` fixed."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != j:
        raise ValueError("need j=%d spacings, got %d" % (j, x.shape[1]))
    if j == 1:
        q = dist.cdf(x[:, 0] + y)
        exact = True
        reps = 0
    elif _can_enumerate_single(j, dist):
        q = _enumerate_given(j, y, x, dist)
        exact, reps = True, 0
    else:
        rng = np.random.default_rng(rng)
        q = _mc_given(y, x, dist, replicates, rng)
        exact, reps = False, replicates
    out = [QEstimate(j, float(y), float(v), reps, exact) for v in q]
    return out if len(out) > 1 else out[0]


def _can_enumerate_single(j, dist):
    return dist.is_lattice and len(dist.params) ** j <= _ENUM_LIMIT


def _enumerate_given(j, y, x, dist):
    v = np.asarray(dist.params)
    p = np.asarray(dist.probs)
    idx = np.array(list(itertools.product(range(len(v)), repeat=j)))
    w = np.prod(p[idx], axis=1)
    walks = np.cumsum(v[idx], axis=1)
    out = np.empty(len(x))
    for r, xr in enumerate(x):
        ok = np.max(walks - np.cumsum(xr), axis=1) <= y
        out[r] = w @ ok
    return out


def _mc_given(y, x, dist, replicates, rng, draws=None):
    """Monte Carlo ``q_{j,y}(x)`` for each row of ``x``, the same ``xi'`` walks
    shared by all rows."""
    j = x.shape[1]
    walks = np.cumsum(dist.sample(rng, (replicates, j)), axis=1) if draws is None else draws
    out = np.empty(len(x))
    for r, xr in enumerate(x):
        out[r] = np.mean(np.max(walks - np.cumsum(xr), axis=1) <= y)
    return out


_Q_CACHE = {}


def reference_q(j, y, dist, replicates=200_000, seed=0):
    """``q(j, y)`` from at least ``10^5`` replicates, cached per argument set."""
    replicates = max(int(replicates), 100_000)
    key = (j, float(y), dist, replicates, seed)
    if key not in _Q_CACHE:
        _Q_CACHE[key] = q_mc(j, y, dist, replicates, np.random.default_rng(seed))
    return _Q_CACHE[key]


@dataclass
class GoodnessRate:
    j: int
    y: float
    rate: float
    se: float
    samples: int
    q_ref: float
    exact: bool = False


def goodness_rate(j, y, dist, samples=10_000, inner=512, rng=None, q_ref=None):
    """Fraction of i.i.d. sequences ``xi_1..xi_j`` that are not ``(j, y)``-good,
    that is with ``q_{j,y}(xi) > 2 q(j, y)``.

    For ``j = 1`` and atom-table laws the rate is computed exactly over all
    sequences.  Otherwise each sequence's ``q_{j,y}`` is estimated from
    ``inner`` walks shared across sequences.
    """
    rng = np.random.default_rng(rng)
    if q_ref is None:
        q_ref = reference_q(j, y, dist).q_hat
    if dist.is_lattice and len(dist.params) ** j <= 4096:
        v = np.asarray(dist.params)
        p = np.asarray(dist.probs)
        idx = np.array(list(itertools.product(range(len(v)), repeat=j)))
        qs = np.array([e.q_hat for e in np.atleast_1d(q_given(j, y, v[idx], dist))])
        rate = float(np.prod(p[idx], axis=1) @ (qs > 2 * q_ref))
        return GoodnessRate(j, float(y), rate, 0.0, len(idx), float(q_ref), True)
    seqs = dist.sample(rng, (samples, j))
    if j == 1:
        qs = dist.cdf(seqs[:, 0] + y)
    else:
        walks = np.cumsum(dist.sample(rng, (inner, j)), axis=1)
        qs = _mc_given(y, seqs, dist, inner, rng, draws=walks)
    bad = qs > 2 * q_ref
    rate = float(bad.mean())
    return GoodnessRate(j, float(y), rate, math.sqrt(max(rate * (1 - rate), 1e-12) / samples),
                        samples, float(q_ref))


@dataclass
class EnvelopeRow:
    j: int
    y: float
    q_hat: float
    q_floor: float
    scaled: float


def walk_envelope(dist, j_list=(64, 256, 1024), y_list=(1.0, 2.0, 4.0), y_floor=0.01,
                  replicates=200_000, rng=None):
    """Rows of ``(q(j,y) - q(j,y_floor)) * sqrt(j) / y`` from shared walks."""
    rng = np.random.default_rng(rng)
    m = walk_maxima(j_list, dist, replicates, rng)
    rows = []
    for c, j in enumerate(j_list):
        floor = float(np.mean(m[:, c] <= y_floor))
        for y in y_list:
            q = float(np.mean(m[:, c] <= y))
            rows.append(EnvelopeRow(int(j), float(y), q, floor, (q - floor) * math.sqrt(j) / y))
    return rows


def envelope_spread(rows):
    """Per ``y``: ratio of the largest to smallest scaled value across ``j``."""
    out = {}
    for y in sorted({r.y for r in rows}):
        vals = [r.scaled for r in rows if r.y == y]
        out[y] = max(vals) / min(vals) if min(vals) > 0 else math.inf
    return out


# -- blocks ----------------------------------------------------------------


@dataclass
class BlockWalkComparison:
    """``X_k`` against the i.i.d. reconstruction ``S_k`` at step ``t0``.

    ``bound`` is ``(c_plus - c_minus) * bad_count``; ``dynamic_bound`` is
    ``(2 c_plus - c_minus) * bad_count``, which accounts for boundary gaps
    exceeding ``c_plus``.
    """

    t0: int
    k: int
    X_k: float
    S_k: float
    bad_count: int
    bound: float
    dynamic_bound: float

    @property
    def gap(self):
        return abs(self.X_k - self.S_k)

    def holds(self, tol=1e-9):
        return self.gap <= self.bound + tol


class UnknownBlockError(ValueError):
    pass


def block_flags(config, k):
    """Spacings ``X_i - X_{i-1}`` and same-block flags ``A_i`` for ranks ``1..k``."""
    bd = block_decompose(config, k)
    if not bd.known[:k + 1].all():
        bad = int(np.flatnonzero(~bd.known[:k + 1])[0])
        raise UnknownBlockError("block flag unknown from rank %d (history erased by a reset)" % bad)
    x = config.positions(k + 1)
    return np.diff(x), bd.same_block[:k].copy()


def block_walk_compare(config, k, rng=None, ks=None):
    """Rebuild ``S_k`` from A-true spacings plus fresh draws and compare with ``X_k``.

    ``config`` is the chain at ``t0`` (its current step).  With ``ks`` a
    list of comparisons sharing one reconstruction is returned.
    """
    kk = [k] if ks is None else sorted(ks)
    gaps, A = block_flags(config, kk[-1])
    out = compare_from_flags(config.t, gaps, A, kk, config.dist, rng)
    return out[0] if ks is None else out


def compare_from_flags(t0, gaps, A, k, dist, rng=None):
    """:class:`BlockWalkComparison` from stored spacings and flags.

    ``k`` may be a single count or a list; fresh draws replace every
    A-false spacing.
    """
    rng = np.random.default_rng(rng)
    kk = np.atleast_1d(k)
    kmax = int(kk.max())
    gaps, A = np.asarray(gaps[:kmax]), np.asarray(A[:kmax], dtype=bool)
    xi = np.where(A, gaps, dist.sample(rng, kmax))
    X, S, bad = np.cumsum(gaps), np.cumsum(xi), np.cumsum(~A)
    out = [BlockWalkComparison(int(t0), int(q), float(X[q - 1]), float(S[q - 1]), int(bad[q - 1]),
                               (dist.c_plus - dist.c_minus) * int(bad[q - 1]),
                               (2 * dist.c_plus - dist.c_minus) * int(bad[q - 1])) for q in kk]
    return out if np.ndim(k) else out[0]


@dataclass
class SpacingSample:
    values: np.ndarray
    statistic: float
    pvalue: float

    @property
    def n(self):
        return len(self.values)


def conditional_spacing_sample(configs, rank_window, dist=None, rng=None, picks=1, flag=True,
                               min_size=1000):
    """Spacings on A-true ranks (or A-false with ``flag=False``), one KS test.

    For every configuration ``picks`` ranks are drawn uniformly from
    ``rank_window = (lo, hi)``; picks whose flag differs from ``flag`` are
    discarded.  Configurations should be far enough apart in time to be
    nearly independent.
    """
    rng = np.random.default_rng(rng)
    lo, hi = rank_window
    vals = []
    for cfg in configs:
        gaps, A = block_flags(cfg, hi)
        r = rng.integers(lo, hi + 1, size=picks)
        sel = A[r - 1] == flag
        vals.append(gaps[r - 1][sel])
        dist = dist or cfg.dist
    vals = np.concatenate(vals) if vals else np.zeros(0)
    if len(vals) < min_size:
        raise ValueError("insufficient sample: %d spacings, need %d" % (len(vals), min_size))
    d, p = ks_1samp(vals, dist.cdf)
    return SpacingSample(vals, d, p)


# -- Kolmogorov-Smirnov ------------------------------------------------------------


def ks_1samp(x, cdf):
    """One-sample KS statistic and p-value (exact finite-n null law)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    F = cdf(x)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    return float(d), float(sps.kstwo.sf(d, n))


def ks_2samp(x, y):
    """Two-sample KS statistic and asymptotic p-value.

    Ties are handled by evaluating both empirical CDFs after every jump.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([x, y])
    d = np.max(np.abs(np.searchsorted(x, grid, side="right") / n
                      - np.searchsorted(y, grid, side="right") / m))
    en = math.sqrt(n * m / (n + m))
    return float(d), float(sps.kstwobign.sf(d * en))


# -- output ----------------------------------------------------------------------

def write_csv(path, header, rows):
    """CSV with 17 significant digits so values round-trip exactly."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    return str(v)
