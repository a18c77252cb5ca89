"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]

Both backends consume identical random streams, so the script also checks
that they produce the same wave record.
"""
import argparse
import time

import numpy as np

from wavefront import _backend, cbm, queue as qc
from wavefront.distributions import make_distribution


def time_queue(backend, steps, repeat):
    dist = make_distribution("uniform", 0.5, 1.5)
    best, log = np.inf, None
    for _ in range(repeat):
        cfg = qc.QueueConfiguration.iid(dist, seed=1)
        t0 = time.perf_counter()
        log = qc.run(cfg, steps, backend=backend).log
        best = min(best, time.perf_counter() - t0)
    return best, log


def time_particles(backend, repeat, length=50.0, eps=0.02, t=0.1):
    best = np.inf
    for _ in range(repeat):
        sys_ = cbm.ParticleSystem.grid(eps, length, seed=1)
        t0 = time.perf_counter()
        cbm.evolve(sys_, t, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, sys_.positions


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _backend._compiled is None:
        print("compiled extension not built; only the fallback is available")
        return
    tc, lc = time_queue("compiled", args.steps, args.repeat)
    tp, lp = time_queue("python", args.steps, args.repeat)
    same = np.array_equal(lc.W, lp.W) and np.array_equal(lc.L, lp.L)
    print("queue  %7d steps  compiled %8.3fs  python %8.3fs  speedup %6.1fx  identical=%s"
          % (args.steps, tc, tp, tp / tc, same))
    pc, xc = time_particles("compiled", args.repeat)
    pp, xp = time_particles("python", args.repeat)
    print("cbm    %7d steps  compiled %8.3fs  python %8.3fs  speedup %6.1fx  identical=%s"
          % (1000, pc, pp, pp / pc, np.array_equal(xc, xp)))


if __name__ == "__main__":
    main()
