"""Pure numpy versions of the kernels in ``_kernels.pyx``.

Same signatures, same state layout, same consumption of the random
streams.  Waves are scanned in geometrically growing vectorized chunks;
the partial sums are accumulated sequentially (``np.cumsum`` with the
running sum prepended) so they match the compiled loop exactly.
"""
import math

import numpy as np

from .rng import GAMMA, _mix_array, row_key


def _quantile(u, code, p, cum):
    if code == 0:
        return p[0] + p[1] * u
    if code == 2:
        return np.where(u < p[2], p[0] + np.sqrt(u * p[3]), p[1] - np.sqrt((1.0 - u) * p[4]))
    idx = np.searchsorted(cum[:-1], u, side="right")
    return p[idx]


def _uniforms_rk(rk, start, stop):
    return _uniforms_cols(rk, np.arange(start, stop, dtype=np.uint64))


def advance_queue(pos, last, state, nsteps, c_plus, cap, code, params, cum,
                  wave_key, init_key, rule, out_W, out_L, out_cens,
                  watch, mv_label, mv_t, mv_x):
    t, hi, epoch, base, nmv = (int(v) for v in state)
    nwatch, mvcap = len(watch), len(mv_label)
    p = np.asarray(params)
    cum = np.asarray(cum)
    irk = row_key(init_key, epoch)

    def ensure(upto):
        # generate old positions for labels hi..upto inclusive
        nonlocal hi
        if hi > upto:
            return
        sp = _quantile(_uniforms_rk(irk, hi, upto + 1), code, p, cum)
        seg = np.cumsum(np.concatenate(([pos[hi - 1 - base]], sp)))[1:]
        pos[hi - base:upto + 1 - base] = seg
        last[hi - base:upto + 1 - base] = 0 if epoch == 0 else -1
        hi = upto + 1

    step = 0
    while step < nsteps:
        if nwatch and nmv + nwatch > mvcap:
            break
        T = t + 1
        ensure(T + 1)
        pos[T - base] = 0.0
        last[T - base] = T
        wrk = row_key(wave_key, T)
        S = 0.0
        i0, chunk = 1, 32
        cens = False
        while True:
            i1 = min(i0 + chunk, cap + 1)
            ensure(T + i1)
            xi = _quantile(_uniforms_rk(wrk, i0, i1), code, p, cum)
            run_ = np.cumsum(np.concatenate(([S], xi)))
            sums = run_[1:]
            lo, up = T + i0 - base, T + i1 - base
            if rule == 1:
                hit = run_[:-1] > pos[lo:up] - c_plus
            else:
                hit = sums >= pos[lo:up] - c_plus
            if hit.any():
                k = int(np.argmax(hit))
                W = i0 + k
                pos[lo:lo + k] = sums[:k]
                last[lo:lo + k] = T
                break
            pos[lo:up] = sums
            last[lo:up] = T
            if i1 == cap + 1:
                W = cap
                cens = True
                break
            S = float(sums[-1])
            i0 = i1
            chunk *= 2

        out_W[step] = W
        out_cens[step] = cens
        if cens:
            out_L[step] = math.inf
            stop_lab = T + cap
            hi = stop_lab + 1
            epoch += 1
            irk = row_key(init_key, epoch)
        else:
            out_L[step] = pos[T + W - base]
            stop_lab = T + W - 1

        if nwatch:
            a = np.searchsorted(watch, T, side="left")
            b = np.searchsorted(watch, stop_lab, side="right")
            for lab in watch[a:b]:
                mv_label[nmv] = lab
                mv_t[nmv] = T
                mv_x[nmv] = pos[lab - base]
                nmv += 1
        t = T
        step += 1

    state[0], state[1], state[2], state[4] = t, hi, epoch, nmv
    return step


def evolve_particles(x, rep, state, nsteps, dt, step_key, bridge_key, bridge,
                     gaussian, m_from, m_into, m_step):
    n, k, nm = (int(v) for v in state)
    mcap = len(m_from)
    sd = math.sqrt(dt)
    step = 0
    while step < nsteps:
        if nm + n > mcap:
            break
        k += 1
        old = x[:n].copy()
        ids = rep[:n].copy()
        if gaussian:
            new = old + sd * _normals_rk(row_key(step_key, k), ids)
        else:
            coin = _uniforms_cols(row_key(step_key, k), ids)
            new = np.where(coin < 0.5, old - sd, old + sd)
        g1 = np.diff(new)
        cand = g1 <= 0.0
        if bridge:
            cand |= (np.diff(old) * g1 / dt) < 40.0
        cidx = np.flatnonzero(cand) + 1
        if len(cidx) == 0:
            x[:n] = new
            step += 1
            continue
        rb = row_key(bridge_key, k)
        keep = np.ones(n, dtype=bool)
        ci = 0
        j = int(cidx[0])
        kept = j - 1
        while j < n:
            g1 = new[j] - new[kept]
            merge = g1 <= 0.0
            if not merge and bridge:
                e = (old[j] - old[kept]) * g1 / dt
                if e < 40.0 and _uniforms_cols(rb, ids[j:j + 1])[0] < math.exp(-e):
                    merge = True
            if merge:
                keep[j] = False
                m_from[nm], m_into[nm], m_step[nm] = ids[j], ids[kept], k
                nm += 1
                j += 1
                continue
            # j survives; move on to the next original candidate pair
            while ci < len(cidx) and cidx[ci] <= j:
                ci += 1
            if ci == len(cidx):
                break
            j = int(cidx[ci])
            kept = j - 1
        m = int(keep.sum())
        x[:m] = new[keep]
        rep[:m] = ids[keep]
        n = m
        step += 1
    state[0], state[1], state[2] = n, k, nm
    return step


def _uniforms_cols(rk, cols):
    # same as rng.uniforms, with the row key already derived
    c = np.asarray(cols, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix_array(np.uint64(rk) + c * np.uint64(GAMMA))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _normals_rk(rk, ids):
    c = np.asarray(ids, dtype=np.uint64)
    u1 = _uniforms_cols(rk, 2 * c)
    u2 = _uniforms_cols(rk, 2 * c + np.uint64(1))
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * np.pi * u2)
