# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the queue chain and the coalescing particle system.

Semantics are defined by the pure-numpy twins in ``_fallback.py``; both
consume the counter-based streams of ``rng.py`` in the same way and must
agree bit for bit on the queue chain.
"""
from libc.math cimport sqrt, log, cos, exp, INFINITY
from libc.stdint cimport uint64_t, int64_t, uint8_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t row_key(uint64_t key, int64_t row) noexcept nogil:
    return mix64(key + (<uint64_t>row) * GAMMA)


cdef inline double u01(uint64_t rk, uint64_t col) noexcept nogil:
    return <double>(mix64(rk + col * GAMMA) >> 11) * INV53


cdef inline double quantile(double u, int code, const double* p,
                            const double* cum, Py_ssize_t ncum) noexcept nogil:
    cdef Py_ssize_t k
    if code == 0:
        return p[0] + p[1] * u
    if code == 2:
        if u < p[2]:
            return p[0] + sqrt(u * p[3])
        return p[1] - sqrt((1.0 - u) * p[4])
    k = 0
    while k < ncum - 1 and cum[k] <= u:
        k += 1
    return p[k]


def advance_queue(double[::1] pos, int64_t[::1] last, int64_t[::1] state,
                  Py_ssize_t nsteps, double c_plus, int64_t cap,
                  int code, const double[::1] params, const double[::1] cum,
                  uint64_t wave_key, uint64_t init_key, int rule,
                  int64_t[::1] out_W, double[::1] out_L, uint8_t[::1] out_cens,
                  const int64_t[::1] watch, int64_t[::1] mv_label,
                  int64_t[::1] mv_t, double[::1] mv_x):
    """Run up to ``nsteps`` steps of the chain in place.

    ``state`` is ``[t, hi, epoch, base, n_moves]``; labels ``< hi`` have
    positions stored at ``pos[label - base]``.  ``rule`` 0 stops the wave at
    the first ``i`` with ``xi_1 + ... + xi_i >= x_{i+1} - c_plus``; rule 1
    (the verbal rule) at the first ``i`` with ``xi_1 + ... + xi_{i-1} > x_{i+1} - c_plus``.  Returns the number of steps
    done, which is short of ``nsteps`` only when the move buffer is full.
    """
    cdef int64_t t = state[0], hi = state[1], epoch = state[2], base = state[3]
    cdef int64_t nmv = state[4]
    cdef Py_ssize_t nwatch = watch.shape[0], mvcap = mv_label.shape[0]
    cdef Py_ssize_t ncum = cum.shape[0]
    cdef const double* p = &params[0]
    cdef const double* cp = &cum[0]
    cdef uint64_t irk = row_key(init_key, epoch), wrk
    cdef int64_t T, i, lab, W, lo, mid, w, stop_lab, fill
    cdef double S, thr
    cdef bint cens
    cdef Py_ssize_t step = 0

    with nogil:
        while step < nsteps:
            if nwatch > 0 and nmv + nwatch > mvcap:
                break
            T = t + 1
            # labels up to T + 1 must exist before the head is overwritten
            while hi <= T + 1:
                fill = 0 if epoch == 0 else -1
                pos[hi - base] = pos[hi - 1 - base] + quantile(u01(irk, <uint64_t>hi), code, p, cp, ncum)
                last[hi - base] = fill
                hi += 1
            pos[T - base] = 0.0
            last[T - base] = T
            wrk = row_key(wave_key, T)
            S = 0.0
            i = 1
            cens = False
            while True:
                lab = T + i
                thr = pos[lab - base] - c_plus
                if rule == 1:
                    if S > thr:
                        W = i
                        break
                    S = S + quantile(u01(wrk, <uint64_t>i), code, p, cp, ncum)
                else:
                    S = S + quantile(u01(wrk, <uint64_t>i), code, p, cp, ncum)
                    if S >= thr:
                        W = i
                        break
                if i == cap:
                    pos[lab - base] = S
                    last[lab - base] = T
                    W = i
                    cens = True
                    break
                while hi <= lab + 1:
                    fill = 0 if epoch == 0 else -1
                    pos[hi - base] = pos[hi - 1 - base] + quantile(u01(irk, <uint64_t>hi), code, p, cp, ncum)
                    last[hi - base] = fill
                    hi += 1
                pos[lab - base] = S
                last[lab - base] = T
                i += 1

            out_W[step] = W
            out_cens[step] = cens
            if cens:
                out_L[step] = INFINITY
                stop_lab = T + cap
                hi = stop_lab + 1
                epoch += 1
                irk = row_key(init_key, epoch)
            else:
                out_L[step] = pos[T + W - base]
                stop_lab = T + W - 1

            if nwatch > 0:
                lo = 0
                w = nwatch
                while lo < w:
                    mid = (lo + w) // 2
                    if watch[mid] < T:
                        lo = mid + 1
                    else:
                        w = mid
                while lo < nwatch and watch[lo] <= stop_lab:
                    mv_label[nmv] = watch[lo]
                    mv_t[nmv] = T
                    mv_x[nmv] = pos[watch[lo] - base]
                    nmv += 1
                    lo += 1
            t = T
            step += 1

    state[0] = t
    state[1] = hi
    state[2] = epoch
    state[4] = nmv
    return step


cdef inline double normal(uint64_t rk, uint64_t col) noexcept nogil:
    cdef double u1 = u01(rk, 2 * col)
    cdef double u2 = u01(rk, 2 * col + 1)
    return sqrt(-2.0 * log(1.0 - u1)) * cos(TWO_PI * u2)


def evolve_particles(double[::1] x, int64_t[::1] rep, int64_t[::1] state,
                     Py_ssize_t nsteps, double dt, uint64_t step_key,
                     uint64_t bridge_key, bint bridge, bint gaussian,
                     int64_t[::1] m_from, int64_t[::1] m_into, int64_t[::1] m_step):
    """Advance sorted clusters ``x[:n]`` (path ids ``rep``) by ``nsteps`` Euler steps.

    ``state`` is ``[n, k, n_merges]``.  Adjacent clusters merge when they
    cross, or, with ``bridge``, with the Brownian-bridge probability of
    having met inside the step.  The survivor is the left (lower-start)
    cluster.  Returns steps done (short only when the merge log is full).
    """
    cdef int64_t n = state[0], k = state[1], nm = state[2]
    cdef Py_ssize_t mcap = m_from.shape[0]
    cdef double sd = sqrt(dt), old, new, kept_old = 0.0, g0, g1, e
    cdef uint64_t rk, rb
    cdef int64_t j, m
    cdef bint merge
    cdef Py_ssize_t step = 0

    with nogil:
        while step < nsteps:
            if nm + n > mcap:
                break
            k += 1
            rk = row_key(step_key, k)
            rb = row_key(bridge_key, k)
            m = 0
            for j in range(n):
                old = x[j]
                if gaussian:
                    new = old + sd * normal(rk, <uint64_t>rep[j])
                elif u01(rk, <uint64_t>rep[j]) < 0.5:
                    new = old - sd
                else:
                    new = old + sd
                if m > 0:
                    g1 = new - x[m - 1]
                    merge = g1 <= 0.0
                    if not merge and bridge:
                        g0 = old - kept_old
                        e = g0 * g1 / dt
                        if e < 40.0 and u01(rb, <uint64_t>rep[j]) < exp(-e):
                            merge = True
                    if merge:
                        m_from[nm] = rep[j]
                        m_into[nm] = rep[m - 1]
                        m_step[nm] = k
                        nm += 1
                        continue
                x[m] = new
                rep[m] = rep[j]
                kept_old = old
                m += 1
            n = m
            step += 1

    state[0] = n
    state[1] = k
    state[2] = nm
    return step
