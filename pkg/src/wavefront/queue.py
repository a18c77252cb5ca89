"""The spatial queue chain.

Customers are identified by their *label* ``s``: the individual who will
reach the service position at step ``s``.  At step ``t`` the customer of
rank ``i`` is label ``t + i``, so the configuration never has to be
shifted; positions live in an array indexed by ``label - base``.  The head
is re-anchored at 0 every step and unmoved customers keep their stored
position, so nothing drifts.

Ranks beyond the generated horizon are filled lazily with i.i.d. spacings
from the initial-configuration stream.  A wave that runs past
``horizon_cap`` ranks is censored: the moved prefix is kept and the tail
beyond it is regenerated from a fresh stream (an i.i.d. reset).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, rng
from .distributions import SpacingDistribution

DEFAULT_CAP = 1_000_000
UNKNOWN = -1
# "formula": stop at the first i with xi_1+...+xi_i >= x_{i+1} - c_plus (default)
# "verbal": stop at the first i with xi_1+...+xi_{i-1} > x_{i+1} - c_plus
RULES = {"formula": 0, "verbal": 1}


@dataclass(frozen=True)
class WaveRecord:
    t: int
    W: int
    L: float
    censored: bool = False


@dataclass
class TrajectoryRecord:
    """Moves of one tracked individual: ``moves`` holds ``(t_u, x_u)`` pairs."""

    s: int
    moves: list = field(default_factory=list)
    final_rank_observed: int = None

    @property
    def served(self):
        return bool(self.moves) and self.moves[-1][0] == self.s

    def times(self):
        return np.array([m[0] for m in self.moves], dtype=np.int64)

    def positions(self):
        return np.array([m[1] for m in self.moves], dtype=float)


@dataclass
class BlockDecomposition:
    """Last-move structure at ``t0`` for ranks ``0..k``.

    ``last_move[i]`` is ``L_s(t0)`` for the rank-``i`` individual
    (``t0`` if it never moved); ``same_block[i]`` is the indicator that
    ranks ``i`` and ``i+1`` last moved together before ``t0``.  ``known`` is
    False where a censoring reset erased the history.
    """

    t0: int
    last_move: np.ndarray
    same_block: np.ndarray
    known: np.ndarray


class QueueConfiguration:
    """State of the chain: positions by label plus the random streams.

    Build with :meth:`iid` or :meth:`from_positions`.
    """

    def __init__(self, dist, seed=0, horizon_cap=DEFAULT_CAP, positions=None, replicate=0,
                 rule="formula"):
        if not isinstance(dist, SpacingDistribution):
            raise TypeError("dist must be a SpacingDistribution")
        if horizon_cap < 1:
            raise ValueError("horizon_cap must be >= 1")
        self.dist = dist
        self.seed = int(seed)
        self.replicate = int(replicate)
        self.horizon_cap = int(horizon_cap)
        if rule not in RULES:
            raise ValueError("rule must be one of %s" % sorted(RULES))
        self.rule = rule
        self.wave_key = rng.stream_key(self.seed, rng.WAVE, replicate)
        self.init_key = rng.stream_key(self.seed, rng.INIT, replicate)
        self._kp = dist.kernel_params()

        if positions is None:
            positions = [0.0]
        positions = np.asarray(positions, dtype=float)
        if positions[0] != 0.0 or np.any(np.diff(positions) <= 0):
            raise ValueError("positions must start at 0 and increase strictly")
        n = len(positions)
        size = max(4 * n, 1024)
        self.pos = np.zeros(size)
        self.last = np.zeros(size, dtype=np.int64)
        self.pos[:n] = positions
        # [t, hi, epoch, base, n_moves]
        self.state = np.array([0, n, 0, 0, 0], dtype=np.int64)

    @classmethod
    def iid(cls, dist, seed=0, horizon_cap=DEFAULT_CAP, replicate=0, rule="formula"):
        return cls(dist, seed, horizon_cap, replicate=replicate, rule=rule)

    @classmethod
    def from_positions(cls, positions, dist, seed=0, horizon_cap=DEFAULT_CAP, rule="formula"):
        return cls(dist, seed, horizon_cap, positions=positions, rule=rule)

    @classmethod
    def constant(cls, spacing, n, dist, seed=0, horizon_cap=DEFAULT_CAP, rule="formula"):
        """Adversarial start: ``n`` equal spacings, then an i.i.d. tail."""
        return cls(dist, seed, horizon_cap, positions=spacing * np.arange(n + 1), rule=rule)

    # -- bookkeeping -------------------------------------------------------

    @property
    def t(self):
        return int(self.state[0])

    @property
    def hi(self):
        return int(self.state[1])

    @property
    def base(self):
        return int(self.state[3])

    @property
    def generated_horizon(self):
        """Number of ranks currently materialized (ranks ``0..h-1``)."""
        return self.hi - self.t

    def copy(self):
        other = object.__new__(type(self))
        other.__dict__.update(self.__dict__)
        other.pos = self.pos.copy()
        other.last = self.last.copy()
        other.state = self.state.copy()
        return other

    def reserve(self, nsteps):
        """Make room for ``nsteps`` more steps (compacting served labels)."""
        t, hi, base = self.t, self.hi, self.base
        need = (t + nsteps) - base + self.horizon_cap + 3
        need = max(need, hi - base + 1)
        if need <= len(self.pos):
            return
        keep = hi - t
        size = max(keep, nsteps + self.horizon_cap + 3) + keep // 2 + 1024
        pos = np.zeros(size)
        last = np.zeros(size, dtype=np.int64)
        pos[:keep] = self.pos[t - base:hi - base]
        last[:keep] = self.last[t - base:hi - base]
        self.pos, self.last = pos, last
        self.state[3] = t

    def extend(self, nranks):
        """Materialize ranks ``0..nranks-1`` (lazy i.i.d. tail)."""
        t, hi, base, epoch = self.t, self.hi, self.base, int(self.state[2])
        upto = t + nranks - 1
        if upto < hi:
            return
        if upto - base >= len(self.pos):
            extra = upto - base + 1 - len(self.pos) + 1024
            self.pos = np.concatenate([self.pos, np.zeros(extra)])
            self.last = np.concatenate([self.last, np.zeros(extra, dtype=np.int64)])
        u = rng.uniforms(self.init_key, epoch, np.arange(hi, upto + 1))
        sp = self.dist.quantile(u)
        seg = np.cumsum(np.concatenate(([self.pos[hi - 1 - base]], sp)))[1:]
        self.pos[hi - base:upto + 1 - base] = seg
        self.last[hi - base:upto + 1 - base] = 0 if epoch == 0 else UNKNOWN
        self.state[1] = upto + 1

    # -- views ---------------------------------------------------------------

    def positions(self, nranks=None):
        """Positions of ranks ``0..nranks-1`` (default: all materialized)."""
        if nranks is None:
            nranks = self.generated_horizon
        self.extend(nranks)
        t, base = self.t, self.base
        return self.pos[t - base:t + nranks - base].copy()

    def spacings(self, nranks=None):
        return np.diff(self.positions(None if nranks is None else nranks + 1))

    def last_moves(self, nranks=None):
        """Step of each rank's last move (0 = never, -1 = unknown)."""
        if nranks is None:
            nranks = self.generated_horizon
        self.extend(nranks)
        t, base = self.t, self.base
        return self.last[t - base:t + nranks - base].copy()

    def __repr__(self):
        return "QueueConfiguration(t=%d, horizon=%d, dist=%s)" % (
            self.t, self.generated_horizon, self.dist.describe())


# -- one step with optional injected draws ---------------------------------

def step(config, dist=None, horizon_cap=None, xi=None):
    """Advance ``config`` by one step in place and return ``(config, record)``.

    ``xi`` optionally injects the first draws of the wave; later draws come
    from the configuration's stream exactly as in :func:`run`.
    """
    if dist is not None and dist is not config.dist:
        raise ValueError("config was built with a different spacing law")
    if horizon_cap is not None:
        config.horizon_cap = int(horizon_cap)
    if xi is None:
        return config, Stepper(config)()
    return config, _step_injected(config, np.asarray(xi, dtype=float))


class Stepper:
    """Single steps with preallocated buffers, for per-step inspection loops."""

    def __init__(self, config, backend=None):
        self.config = config
        self.kern = _backend.get(backend)
        self.W = np.zeros(1, np.int64)
        self.L = np.zeros(1)
        self.c = np.zeros(1, np.uint8)
        self.watch = np.zeros(0, np.int64)
        self.mv = (np.zeros(1, np.int64), np.zeros(1, np.int64), np.zeros(1))

    def __call__(self):
        cfg = self.config
        cfg.reserve(1)
        code, params, cum = cfg._kp
        self.kern.advance_queue(cfg.pos, cfg.last, cfg.state, 1, cfg.dist.c_plus, cfg.horizon_cap,
                                code, params, cum, cfg.wave_key, cfg.init_key, RULES[cfg.rule],
                                self.W, self.L, self.c, self.watch, *self.mv)
        return WaveRecord(int(cfg.state[0]), int(self.W[0]), float(self.L[0]), bool(self.c[0]))


def _step_injected(config, xi):
    d = config.dist
    c_plus, cap = d.c_plus, config.horizon_cap
    config.reserve(1)
    t = config.t
    T = t + 1
    config.extend(3)
    pos, last, base = config.pos, config.last, config.base
    pos[T - base] = 0.0
    last[T - base] = T
    S = 0.0
    i = 1
    censored = False
    while True:
        lab = T + i
        if i <= len(xi):
            x = xi[i - 1]
        else:
            x = float(d.quantile(rng.uniforms(config.wave_key, T, [i]))[0])
        thr = pos[lab - base] - c_plus
        if config.rule == "verbal":
            if S > thr:
                W = i
                break
            S = S + x
        else:
            S = S + x
            if S >= thr:
                W = i
                break
        if i == cap:
            pos[lab - base] = S
            last[lab - base] = T
            W, censored = i, True
            break
        if config.hi <= lab + 1:
            config.extend(lab + 2 - t)
            pos, last = config.pos, config.last
        pos[lab - base] = S
        last[lab - base] = T
        i += 1
    config.state[0] = T
    if censored:
        config.state[1] = T + cap + 1
        config.state[2] += 1
        return WaveRecord(T, W, math.inf, True)
    return WaveRecord(T, W, float(pos[T + W - base]), False)


# -- runs ------------------------------------------------------------------

@dataclass
class WaveLog:
    """Columnar stream of wave records."""

    t: np.ndarray
    W: np.ndarray
    L: np.ndarray
    censored: np.ndarray

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for i in range(len(self.t)):
            yield WaveRecord(int(self.t[i]), int(self.W[i]), float(self.L[i]), bool(self.censored[i]))

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            return WaveRecord(int(self.t[item]), int(self.W[item]), float(self.L[item]),
                              bool(self.censored[item]))
        return WaveLog(self.t[item], self.W[item], self.L[item], self.censored[item])

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), np.zeros(0, bool))

    @classmethod
    def concat(cls, logs):
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(*(np.concatenate([getattr(g, f) for g in logs]) for f in ("t", "W", "L", "censored")))

    @classmethod
    def from_records(cls, records):
        records = list(records)
        return cls(np.array([r.t for r in records], np.int64), np.array([r.W for r in records], np.int64),
                   np.array([r.L for r in records], float), np.array([r.censored for r in records], bool))


def _advance(config, nsteps, watch=None, backend=None, move_buffer=0):
    """Run the kernel for exactly ``nsteps`` steps; returns the WaveLog chunk
    and, when watching, the raw move arrays."""
    k = _backend.get(backend)
    code, params, cum = config._kp
    out_W = np.zeros(nsteps, np.int64)
    out_L = np.zeros(nsteps)
    out_c = np.zeros(nsteps, np.uint8)
    if watch is None:
        watch = np.zeros(0, np.int64)
    nb = max(move_buffer, 1) if len(watch) else 1
    mv = (np.zeros(nb, np.int64), np.zeros(nb, np.int64), np.zeros(nb))
    moves = []
    t0 = config.t
    done = 0
    while done < nsteps:
        config.reserve(nsteps - done)
        config.state[4] = 0
        n = k.advance_queue(config.pos, config.last, config.state, nsteps - done,
                            config.dist.c_plus, config.horizon_cap, code, params, cum,
                            config.wave_key, config.init_key, RULES[config.rule],
                            out_W[done:], out_L[done:], out_c[done:],
                            watch, *mv)
        if len(watch):
            m = int(config.state[4])
            moves.append((mv[0][:m].copy(), mv[1][:m].copy(), mv[2][:m].copy()))
        done += n
    log = WaveLog(np.arange(t0 + 1, t0 + nsteps + 1, dtype=np.int64), out_W, out_L, out_c.astype(bool))
    if watch is not None and len(watch):
        return log, moves
    return log


def run(config, steps, observers=(), snapshot_at=(), track=(), chunk=1 << 16, backend=None):
    """Apply ``steps`` steps to ``config`` in place.

    Parameters
    ----------
    observers : iterable of callables
        Each is called with every :class:`WaveLog` chunk as it is produced.
    snapshot_at : iterable of int
        Steps at which ``observer.snapshot(t, config)`` is called on observers
        that define it (chunks are split so the configuration is exact).
    track : iterable of int
        Individual labels to follow; see :attr:`RunResult.trajectories`.

    Returns a :class:`RunResult`.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    start = config.t
    stops = sorted({int(s) for s in snapshot_at if start < int(s) <= start + steps})
    watch = np.array(sorted({int(s) for s in track}), dtype=np.int64)
    for s in watch:
        if s < start:
            raise ValueError("individual %d was already served before t=%d" % (s, start))
    trajectories = {int(s): TrajectoryRecord(int(s)) for s in watch}
    logs = []
    t = start
    end = start + steps
    observers = list(observers)
    for s in [s for s in stops if s == start]:
        _snap(observers, s, config)
    while t < end:
        nxt = min(end, t + chunk)
        for s in stops:
            if s > t:
                nxt = min(nxt, s)
                break
        live = watch[watch >= t + 1] if len(watch) else watch
        out = _advance(config, nxt - t, watch=live if len(live) else None, backend=backend,
                       move_buffer=4 * len(live) + 64)
        if isinstance(out, tuple):
            log, moves = out
            for labs, ts, xs in moves:
                for lab, tu, xu in zip(labs, ts, xs):
                    trajectories[int(lab)].moves.append((int(tu), float(xu)))
        else:
            log = out
        logs.append(log)
        for ob in observers:
            ob(log)
        t = nxt
        if t in stops:
            _snap(observers, t, config)
    for s, tr in trajectories.items():
        tr.final_rank_observed = max(s - config.t, 0)
    return RunResult(WaveLog.concat(logs), trajectories, config)


def _snap(observers, t, config):
    for ob in observers:
        snap = getattr(ob, "snapshot", None)
        if snap is not None:
            snap(t, config)


@dataclass
class RunResult:
    log: WaveLog
    trajectories: dict
    config: QueueConfiguration


def simulate(dist, steps, seed=0, horizon_cap=DEFAULT_CAP, replicate=0, **kw):
    """Run ``steps`` steps from an i.i.d. start; convenience wrapper."""
    config = QueueConfiguration.iid(dist, seed, horizon_cap, replicate=replicate)
    return run(config, steps, **kw)


def track_individual(config, s, steps=None, backend=None):
    """Follow individual ``s`` until it is served (or ``steps`` elapse)."""
    if s < config.t:
        raise ValueError("individual %d already served (end of service at t=%d)" % (s, s))
    if steps is None:
        steps = s - config.t
    return run(config, steps, track=[s], backend=backend).trajectories[s]


def block_decompose(config, k):
    """Block structure of ranks ``0..k`` at the current step ``t0 = config.t``.

    Needs no stored history: the chain keeps every customer's last-move
    step, which is all that ``L_s(t0)`` depends on.
    """
    t0 = config.t
    lm = config.last_moves(k + 2)
    known = lm != UNKNOWN
    L = np.where(lm > 0, t0 - lm, t0)
    same = known[:-1] & known[1:] & (L[:-1] == L[1:]) & (L[:-1] < t0)
    return BlockDecomposition(t0, L[:k + 1], same[:k + 1], known[:k + 1])
