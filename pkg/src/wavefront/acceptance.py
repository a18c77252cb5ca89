"""The acceptance checks C1 to C11, shared by the test suite and the CLI.

Each ``check_*`` function runs its experiment at full size and returns one
or more :class:`Verdict` objects.  Runs that feed several checks are cached
per process.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import cbm, queue as qc, representation as rp, stats
from ._parallel import pmap
from .distributions import make_distribution

UNIFORM = make_distribution("uniform", 0.5, 1.5)


@dataclass
class Verdict:
    cid: str
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self):
        return "%s %s %s: %s" % ("PASS" if self.passed else "FAIL", self.cid, self.name, self.detail)


_CACHE = {}


def _cached(key, fn):
    if key not in _CACHE:
        _CACHE[key] = fn()
    return _CACHE[key]


def reference_rho1(seed=0):
    return cbm.rho1(seed=seed)


# -- C1, C2 ---------------------------------------------------------------------

def tail_run(dist=UNIFORM, steps=2_000_000, burn_in=100_000, seed=1, rule="formula"):
    def go():
        cfg = qc.QueueConfiguration.iid(dist, seed=seed, rule=rule)
        res = qc.run(cfg, steps)
        return res.log
    return _cached(("tail", dist, steps, burn_in, seed, rule), go)


J_GRID = tuple(16 * 2 ** i for i in range(7))


def check_tail(dist=UNIFORM, steps=2_000_000, burn_in=100_000, seed=1, rule="formula", rho1=None):
    log = tail_run(dist, steps, burn_in, seed, rule)
    est = stats.wave_tail(log, J_GRID, burn_in)
    fit = stats.fit_exponent(est, 16, 1024)
    ok1 = -0.62 <= fit.slope <= -0.40 and fit.r2 >= 0.98
    v1 = Verdict("C1", "tail exponent", ok1,
                 "slope=%.4f r2=%.5f (band [-0.62,-0.40], r2>=0.98) over j=%d..%d"
                 % (fit.slope, fit.r2, fit.j_min, fit.j_max),
                 {"slope": fit.slope, "r2": fit.r2, "rho_hat": est.rho_hat.tolist()})
    r1 = reference_rho1() if rho1 is None else rho1
    out = []
    ok2 = True
    for j in (256, 1024):
        c = float(est.rho_hat[list(J_GRID).index(j)]) * math.sqrt(j) * dist.sigma
        rel = c / r1.value - 1
        ok2 &= abs(rel) <= 0.20
        out.append("j=%d: %.4f (%+.1f%%)" % (j, c, 100 * rel))
    v2 = Verdict("C2", "rate constant", ok2,
                 "rho_hat*sqrt(j)*sigma vs rho1=%.4f+-%.4f: %s (tolerance 20%%)"
                 % (r1.value, r1.se, ", ".join(out)), {"rho1": r1.value})
    return [v1, v2]


# -- C3, C4, C5 ------------------------------------------------------------------

SPACING_WINDOWS = ((1, 64), (65, 512), (513, 2048))


class _BlockObserver:
    def __init__(self, kmax, seed):
        self.kmax = kmax
        self.gaps = []
        self.flags = []
        self.comparisons = []
        self.seed = seed

    def __call__(self, log):
        pass

    def snapshot(self, t, config):
        g, A = stats.block_flags(config, self.kmax)
        self.gaps.append(g)
        self.flags.append(A)
        self.comparisons.append(stats.block_walk_compare(config, None, rng=(self.seed, t),
                                                         ks=[100, 400, 1600]))


def block_run(dist=UNIFORM, burn_in=100_000, snapshots=10_500, every=100, seed=2, rule="formula"):
    def go():
        cfg = qc.QueueConfiguration.iid(dist, seed=seed, rule=rule)
        ob = _BlockObserver(2048, seed)
        stops = range(burn_in + every, burn_in + every * snapshots + 1, every)
        qc.run(cfg, burn_in + every * snapshots, observers=[ob], snapshot_at=stops)
        return ob
    return _cached(("blocks", dist, burn_in, snapshots, every, seed, rule), go)


def check_blocks(dist=UNIFORM, seed=2, rule="formula", instances=1000):
    ob = block_run(dist, seed=seed, rule=rule)
    rng = np.random.default_rng(seed)
    # C3: one (t0, k) instance per tenth snapshot, k uniform on 1..1600
    held, worst = 0, 0.0
    step = len(ob.gaps) // instances
    for m in range(instances):
        k = int(rng.integers(1, 1601))
        c = stats.compare_from_flags(m * step, ob.gaps[m * step], ob.flags[m * step], k, dist, rng)
        held += c.holds()
        worst = max(worst, c.gap - c.bound)
    v3 = Verdict("C3", "block inequality", held == instances,
                 "holds on %d/%d instances (need all); worst excess %.4f" % (held, instances, worst),
                 {"held": held, "instances": instances})
    # C4: mean |X_k - S_k| growth per quadrupling
    means = {}
    for k in (100, 400, 1600):
        means[k] = float(np.mean([c.gap for cs in ob.comparisons for c in cs if c.k == k]))
    r1, r2 = means[400] / means[100], means[1600] / means[400]
    v4 = Verdict("C4", "spread bound", max(r1, r2) <= 2.4,
                 "mean |X_k-S_k| at k=100,400,1600: %.4f, %.4f, %.4f; ratios %.3f, %.3f (<= 2.4)"
                 % (means[100], means[400], means[1600], r1, r2), {"means": means})
    # C5: KS per rank window, Bonferroni over windows; negative control on A-false
    alpha = 0.01 / len(SPACING_WINDOWS)
    parts, ok5 = [], True
    for lo, hi in SPACING_WINDOWS:
        vals = []
        for g, A in zip(ob.gaps, ob.flags):
            r = int(rng.integers(lo, hi + 1))
            if A[r - 1]:
                vals.append(g[r - 1])
        vals = np.array(vals[:10_000])
        d, p = stats.ks_1samp(vals, dist.cdf)
        ok5 &= len(vals) == 10_000 and p > alpha
        parts.append("ranks %d-%d n=%d D=%.4f p=%.3g" % (lo, hi, len(vals), d, p))
    bnd = np.concatenate([g[~A] for g, A in zip(ob.gaps, ob.flags)])
    d, p = stats.ks_1samp(bnd, dist.cdf)
    neg = p < 0.01
    parts.append("boundary n=%d mean=%.3f D=%.3f p=%.3g (must reject)" % (len(bnd), bnd.mean(), d, p))
    v5 = Verdict("C5", "conditional spacings", ok5 and neg,
                 "; ".join(parts) + " (alpha=0.01 Bonferroni)", {})
    return [v3, v4, v5]


# -- C6, C7 ---------------------------------------------------------------------

def check_walks(dist=UNIFORM, seed=3):
    rows = stats.walk_envelope(dist, (64, 256, 1024), (1.0, 2.0, 4.0), 0.01, 200_000, rng=seed)
    spread = stats.envelope_spread(rows)
    v6 = Verdict("C6", "walk-maximum envelope", max(spread.values()) <= 1.5,
                 "max/min of (q(j,y)-q(j,0.01))*sqrt(j)/y over j=64,256,1024: "
                 + ", ".join("y=%g: %.3f" % kv for kv in spread.items()) + " (<= 1.5)",
                 {"rows": [r.__dict__ for r in rows]})
    parts, ok = [], True
    for j in (64, 256):
        for y in (2.0, 4.0):
            g = stats.goodness_rate(j, y, dist, 10_000, rng=(seed, j, int(y)))
            ok &= g.rate <= 0.5 + 3 * g.se
            parts.append("j=%d y=%g: %.4f+-%.4f (q=%.4f)" % (j, y, g.rate, g.se, g.q_ref))
    v7 = Verdict("C7", "goodness rate", ok, "not-good fraction " + "; ".join(parts) + " (<= 0.5+3SE)")
    return [v6, v7]


# -- C8, C11 --------------------------------------------------------------------

def check_coalescence(dist=UNIFORM, steps=10_000, seed=4):
    A = qc.QueueConfiguration.iid(dist, seed=seed)
    B = A.copy()
    bad = beyond = 0
    for _ in range(steps):
        _, rec = qc.step(A)
        ranks = rec.W + 2 if rec.censored else max(1024, 2 * rec.W + 2)
        x_max = float(A.positions(ranks)[-1])
        cp = rp.coalescence_position(rp.counting_function(B, x_max), rp.counting_function(A, x_max))
        if rec.censored:
            beyond += 1
            bad += cp != rp.BEYOND_WINDOW
        else:
            bad += cp != rec.L
        qc.step(B)
    return [Verdict("C8", "coalescence identity", bad == 0,
                    "%d mismatches in %d steps (%d censored waves, sentinel expected)" % (bad, steps, beyond))]


def check_structure(dist=UNIFORM, steps=1_000_000, seed=5, tail=64, track_every=97, window=8192):
    """Per-step structural invariants.

    The unmoved-tail comparison needs the configuration before each step.
    Stored positions of ranks below ``window`` are copied before every step;
    for the rare longer waves a second copy of the chain is brought up to
    the previous step in bulk.
    """
    A = qc.QueueConfiguration.iid(dist, seed=seed)
    B = A.copy()
    stepA = qc.Stepper(A)
    cm, cp = dist.c_minus, dist.c_plus
    fails = {"W>=1": 0, "head": 0, "spacing": 0, "boundary": 0, "tail": 0, "diagonal": 0}
    moves = lagged = 0
    for _ in range(steps):
        before = A.positions(window)
        rec = stepA()
        W, t = rec.W, rec.t
        x = A.positions(W + tail + 1)
        fails["W>=1"] += W < 1
        fails["head"] += bool(x[0] != 0.0)
        sp = np.diff(x)
        fails["spacing"] += bool(np.any(sp > 2 * cp) or np.any(sp <= 0))
        if not rec.censored:
            if W >= 2:
                fails["boundary"] += not (x[W] - x[W - 1] > cm + cp)
            if W + tail + 1 <= window:
                old = before
            else:
                qc.run(B, t - 1 - B.t)
                old = B.positions(W + tail + 2)
                lagged += 1
            fails["tail"] += not np.array_equal(x[W:W + tail], old[W + 1:W + tail + 1])
        # moved labels are t .. t + W - 1; check the tracked ones
        first = -(-t // track_every) * track_every
        labels = np.arange(first, t + W, track_every)
        if len(labels):
            xu = x[labels - t]
            count = np.searchsorted(x, xu, side="right") - 1
            fails["diagonal"] += int(np.count_nonzero(t + count != labels))
            moves += len(labels)
    ok = not any(fails.values())
    return [Verdict("C11", "structural suite", ok,
                    "%d steps, %d tracked moves, %d long waves checked against the lagging copy; "
                    "failures %s" % (steps, moves, lagged, fails), fails)]


# -- C9, C10 ----------------------------------------------------------------------

def check_cbm(seed=6, eps=0.02, length=400.0, replicates=8):
    dens = cbm.density_curve(eps, length, (1.0, 2.0, 4.0), replicates, seed=seed)
    sc = [d.scaled for d in dens]
    spread = max(sc) / min(sc) - 1
    p, se = cbm.simulate_no_meet(1.0, 1.0, 10_000, seed=seed)
    exact = cbm.no_meet_probability(1.0, 1.0)
    ok = spread <= 0.05 and abs(p - exact) <= 3 * se
    return [Verdict("C9", "CBM density scaling", ok,
                    "rho*sqrt(t) at t=1,2,4: %s (spread %.2f%%, <= 5%%); no-meet d=1,t=1: %.4f vs %.4f, "
                    "|diff|=%.2f SE (<= 3)" % (", ".join("%.4f" % s for s in sc), 100 * spread, p, exact,
                                              abs(p - exact) / se), {"scaled": sc})]


def zeta_samples(n=4096, replicates=50, burn_in=10_000, seed=7, dist=UNIFORM, y_window=(-6.0, 6.0)):
    scale = dist.sigma * math.sqrt(n)
    half = int(math.ceil(max(abs(y_window[0]), abs(y_window[1])) * scale))
    tau = 2 * burn_in

    def one(r):
        g = np.random.default_rng((seed, r))
        t_ref = int(g.integers(burn_in + half, tau - half + 1))
        cfg = qc.QueueConfiguration.iid(dist, seed=seed, replicate=r)
        log = qc.run(cfg, t_ref + half).log
        lo = t_ref + int(math.ceil(y_window[0] * scale))
        hi = t_ref + int(math.floor(y_window[1] * scale))
        s = rp.wave_time_points(log, n, (lo, hi), t_ref, dist.sigma, replicate=r)
        s.window = y_window
        return s

    return pmap(one, range(replicates))


def check_compare(n=4096, seed=7):
    samples = zeta_samples(n, seed=seed)
    gaps = np.concatenate([s.spacings() for s in samples])
    npts = sum(len(s.points) for s in samples)
    width = sum(s.window[1] - s.window[0] for s in samples)
    inten = npts / width
    dens, pts = cbm.density_curve(0.01, 200.0, [1.0], 8, seed=seed, points=True)
    cgaps = np.concatenate([np.diff(p) for p in pts[1.0]])
    d, p = stats.ks_2samp(gaps, cgaps)
    rel = inten / dens[0].rho_hat - 1
    ok = p > 0.01 and abs(rel) <= 0.15
    return [Verdict("C10", "point-process match", ok,
                    "KS zeta(n=%d) %d gaps vs CBM %d gaps: D=%.4f p=%.3g (> 0.01); intensity %.4f vs %.4f "
                    "(%+.1f%%, within 15%%)" % (n, len(gaps), len(cgaps), d, p, inten, dens[0].rho_hat,
                                                100 * rel),
                    {"intensity": inten, "cbm_intensity": dens[0].rho_hat})]


CHECKS = {
    "tail": check_tail,
    "blocks": check_blocks,
    "q": check_walks,
    "coalescence": check_coalescence,
    "structure": check_structure,
    "cbm": check_cbm,
    "compare": check_compare,
}


def informational_rho1():
    r = reference_rho1()
    return "INFO rho1*sqrt(pi) = %.4f (analytic value 1)" % (r.value * math.sqrt(math.pi))

