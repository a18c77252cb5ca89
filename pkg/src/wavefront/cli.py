"""Command-line entry point: ``wavefront <subcommand> [options]``.

Every subcommand writes its tables into ``--out`` together with a
``manifest.json`` and prints one ``PASS``/``FAIL`` line per acceptance
check it covers.  The exit code is 0 only when every printed verdict passes.
"""
import argparse
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, _backend, acceptance, cbm, queue as qc, representation as rp, stats
from .distributions import parse_distribution


@dataclass
class ExperimentSpec:
    dist: str = "uniform:0.5,1.5"
    steps: int = 2_000_000
    burn_in: int = 100_000
    seed: int = 1
    j_grid: tuple = acceptance.J_GRID
    q_grid: tuple = ((64, 2.0), (64, 4.0), (256, 2.0), (256, 4.0))
    n_list: tuple = (4096,)
    horizon_cap: int = qc.DEFAULT_CAP
    replicates: int = 50
    out: str = "runs/default"
    rule: str = "formula"
    extra: dict = field(default_factory=dict)

    def validate(self):
        """Raise ``ValueError`` listing every invalid field at once."""
        errs = []
        try:
            parse_distribution(self.dist)
        except ValueError as exc:
            errs.append("dist: %s" % exc)
        for name in ("steps", "horizon_cap", "replicates"):
            if getattr(self, name) <= 0:
                errs.append("%s must be positive" % name)
        if self.burn_in < 0:
            errs.append("burn_in must be >= 0")
        if self.burn_in >= self.steps:
            errs.append("burn_in (%d) must be smaller than steps (%d)" % (self.burn_in, self.steps))
        if not 0 <= self.seed < 2 ** 64:
            errs.append("seed must fit in an unsigned 64-bit integer")
        if not self.j_grid or min(self.j_grid) < 0:
            errs.append("j_grid must be a nonempty list of nonnegative integers")
        if any(j <= 0 or y <= 0 for j, y in self.q_grid):
            errs.append("q_grid entries need j > 0 and y > 0")
        if not self.n_list or min(self.n_list) < 1:
            errs.append("n_list must be a nonempty list of positive integers")
        if self.rule not in qc.RULES:
            errs.append("rule must be one of %s" % ", ".join(sorted(qc.RULES)))
        if errs:
            raise ValueError("invalid experiment spec:\n  " + "\n  ".join(errs))
        return self

    @property
    def distribution(self):
        return parse_distribution(self.dist)


def _ints(text):
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _pairs(text):
    out = []
    for item in str(text).replace(" ", "").split(";"):
        if item:
            j, y = item.split(":")
            out.append((int(j), float(y)))
    return tuple(out)


_CONVERT = {"steps": int, "burn_in": int, "seed": int, "horizon_cap": int, "replicates": int,
            "j_grid": _ints, "n_list": _ints, "q_grid": _pairs, "dist": str, "out": str, "rule": str}


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key = value" % (path, num))
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "n":
                key = "n_list"
            if key not in _CONVERT:
                raise ValueError("%s:%d: unknown key %r" % (path, num, key))
            values[key] = _CONVERT[key](val)
    return values


def build_spec(args):
    values = read_config(args.config) if args.config else {}
    for key in _CONVERT:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = _CONVERT[key](val) if isinstance(val, str) else val
    return ExperimentSpec(**values).validate()


# -- plumbing --------------------------------------------------------------------

class Session:
    def __init__(self, spec):
        self.spec = spec
        self.verdicts = []
        os.makedirs(spec.out, exist_ok=True)
        if not os.access(spec.out, os.W_OK):
            raise OSError("output directory %s is not writable" % spec.out)

    def path(self, name):
        return os.path.join(self.spec.out, name)

    def emit(self, verdicts):
        for v in verdicts:
            print(v.line(), flush=True)
            self.verdicts.append(v)

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def manifest(self, command):
        self.write_json("manifest.json", {
            "command": command,
            "spec": asdict(self.spec),
            "versions": {"wavefront": __version__, "numpy": np.__version__, "python": platform.python_version()},
            "backend": _backend.NAME,
            "platform": platform.platform(),
            "float": "IEEE-754 binary64, no fused multiply-add in kernels",
        })

    def summary(self):
        self.write_json("verdicts.json", [{"id": v.cid, "name": v.name, "passed": v.passed, "detail": v.detail}
                                          for v in self.verdicts])
        return 0 if all(v.passed for v in self.verdicts) else 1


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _require(sess, name, producer):
    p = sess.path(name)
    if not os.path.exists(p):
        raise FileNotFoundError("%s not found; run `wavefront %s` with the same --out first" % (p, producer))
    return p


def read_waves(path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding=None)
    data = np.atleast_1d(data)
    return qc.WaveLog(data["t"].astype(np.int64), data["W"].astype(np.int64), data["L"].astype(float),
                      data["censored"].astype(bool))


# -- subcommands -------------------------------------------------------------------

def cmd_simulate(sess):
    s = sess.spec
    cfg = qc.QueueConfiguration.iid(s.distribution, seed=s.seed, horizon_cap=s.horizon_cap, rule=s.rule)
    res = qc.run(cfg, s.steps)
    log = res.log
    stats.write_csv(sess.path("waves.csv"), ["t", "W", "L", "censored"],
                    zip(log.t, log.W, log.L, log.censored))
    nsnap = min(cfg.generated_horizon, 4096)
    x = cfg.positions(nsnap)
    stats.write_csv(sess.path("snapshot.csv"), ["rank", "position", "spacing", "last_move_time"],
                    zip(range(nsnap), x, np.diff(x, prepend=0.0), cfg.last_moves(nsnap)))
    sess.manifest("simulate")
    print("simulated %d steps; %d censored waves" % (len(log), int(log.censored.sum())))


def cmd_tail(sess):
    s = sess.spec
    log = read_waves(_require(sess, "waves.csv", "simulate"))
    est = stats.wave_tail(log, s.j_grid, s.burn_in)
    stats.write_csv(sess.path("tail.csv"), ["j", "N_j", "rho_hat", "se"], est.rows())
    fit = stats.fit_exponent(est, 16, 1024)
    r1 = _rho1(sess)
    scaled = {int(j): float(r) * math.sqrt(j) * s.distribution.sigma for j, r in zip(est.j_grid, est.rho_hat)}
    sess.write_json("tail.json", {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                                  "tau": est.tau, "scaled_rate": scaled, "rho1": r1.value})
    ok1 = -0.62 <= fit.slope <= -0.40 and fit.r2 >= 0.98
    sess.emit([acceptance.Verdict("C1", "tail exponent", ok1, "slope=%.4f r2=%.5f" % (fit.slope, fit.r2))])
    parts, ok2 = [], True
    for j in (256, 1024):
        if j in scaled:
            rel = scaled[j] / r1.value - 1
            ok2 &= abs(rel) <= 0.2
            parts.append("j=%d %+.1f%%" % (j, 100 * rel))
    if parts:
        sess.emit([acceptance.Verdict("C2", "rate constant", ok2, ", ".join(parts))])
    sess.manifest("tail")


def _rho1(sess):
    p = sess.path("rho1.json")
    if os.path.exists(p):
        with open(p) as fh:
            d = json.load(fh)
        return cbm.Rho1(d["value"], d["se"], [], 1.0)
    r = acceptance.reference_rho1()
    _write_ladder(sess, r)
    return r


def _write_ladder(sess, r):
    stats.write_csv(sess.path("density_ladder.csv"), ["eps", "t", "rho_hat", "se"],
                    [(d.eps, d.t, d.rho_hat, d.se) for d in r.ladder])
    sess.write_json("rho1.json", {"value": r.value, "se": r.se, "rho1_sqrt_pi": r.value * math.sqrt(math.pi)})


def cmd_q(sess):
    s = sess.spec
    dist = s.distribution
    rng = np.random.default_rng(s.seed)
    rows = []
    for j, y in s.q_grid:
        e = stats.q_mc(j, y, dist, 100_000, rng)
        rows.append((j, y, e.q_hat, e.se, e.exact))
    stats.write_csv(sess.path("q.csv"), ["j", "y", "q_hat", "se", "exact"], rows)
    v6, v7 = acceptance.check_walks(dist, seed=s.seed)
    stats.write_csv(sess.path("envelope.csv"), ["j", "y", "q_hat", "q_floor", "scaled"],
                    [(r["j"], r["y"], r["q_hat"], r["q_floor"], r["scaled"]) for r in v6.values["rows"]])
    sess.emit([v6, v7])
    sess.manifest("q")


def cmd_blocks(sess):
    s = sess.spec
    dist = s.distribution
    verdicts = acceptance.check_blocks(dist, seed=s.seed, rule=s.rule)
    ob = acceptance.block_run(dist, seed=s.seed, rule=s.rule)
    stats.write_csv(sess.path("blocks.csv"), ["t0", "k", "X_k", "S_k", "bad_count", "bound"],
                    [(c.t0, c.k, c.X_k, c.S_k, c.bad_count, c.bound) for cs in ob.comparisons for c in cs])
    sess.emit(verdicts)
    sess.manifest("blocks")


def cmd_cbm(sess):
    r = acceptance.reference_rho1(seed=sess.spec.seed)
    _write_ladder(sess, r)
    print(acceptance.informational_rho1())
    sess.emit(acceptance.check_cbm(seed=sess.spec.seed))
    sess.manifest("cbm")


def cmd_compare(sess):
    s = sess.spec
    dist = s.distribution
    for n in s.n_list:
        samples = acceptance.zeta_samples(n, s.replicates, seed=s.seed, dist=dist)
        rp.write_points(sess.path("zeta_n%d.csv" % n), samples)
    v = acceptance.check_compare(s.n_list[0], seed=s.seed)
    sess.write_json("compare.json", v[0].values)
    # traces of a few consecutive G graphs
    cfg = qc.QueueConfiguration.iid(dist, seed=s.seed)
    qc.run(cfg, 1000)
    gs = []
    for _ in range(6):
        qc.step(cfg)
        gs.append(rp.counting_function(cfg, 40.0))
    rp.write_jump_lists(sess.path("g_jumps.csv"), gs)
    rp.write_g_traces(sess.path("g_traces.csv"), gs)
    sess.emit(v)
    sess.manifest("compare")


def cmd_trajectories(sess):
    s = sess.spec
    dist = s.distribution
    cfg = qc.QueueConfiguration.iid(dist, seed=s.seed, horizon_cap=s.horizon_cap, rule=s.rule)
    qc.run(cfg, min(s.burn_in, 20_000))
    labels = [rp.individual_near(cfg, n) for n in (50, 100, 200, 400)]
    res = qc.run(cfg, max(labels) - cfg.t, track=labels)
    trs = [res.trajectories[l] for l in labels]
    rp.write_trajectory_traces(sess.path("trajectories.csv"), trs)
    sess.emit(acceptance.check_coalescence(dist, seed=s.seed))
    sess.emit(acceptance.check_structure(dist, seed=s.seed))
    sess.manifest("trajectories")


def cmd_all(sess):
    for fn in (cmd_simulate, cmd_cbm, cmd_tail, cmd_blocks, cmd_q, cmd_compare, cmd_trajectories):
        fn(sess)
    sess.manifest("all")


COMMANDS = {"simulate": cmd_simulate, "tail": cmd_tail, "q": cmd_q, "blocks": cmd_blocks,
            "cbm": cmd_cbm, "compare": cmd_compare, "trajectories": cmd_trajectories, "all": cmd_all}


def make_parser():
    p = argparse.ArgumentParser(prog="wavefront", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--dist", help="uniform:a,b | twopoint:a,b | tri:a,m,b | custom:v@p,...")
    p.add_argument("--out")
    p.add_argument("--replicates", type=int)
    p.add_argument("--horizon-cap", dest="horizon_cap", type=int)
    p.add_argument("--n", dest="n_list", help="comma-separated scales")
    p.add_argument("--j-grid", dest="j_grid", help="comma-separated thresholds")
    p.add_argument("--rule", choices=sorted(qc.RULES))
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        spec = build_spec(args)
        sess = Session(spec)
        COMMANDS[args.command](sess)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    return sess.summary()


if __name__ == "__main__":
    sys.exit(main())
