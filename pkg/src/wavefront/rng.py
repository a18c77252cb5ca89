"""Counter-based random numbers.

Every random quantity in a simulation is a pure function of
``(seed, stream, row, column)``: the spacing drawn by the customer at rank
``i`` in the wave of step ``t`` is ``column=i`` of ``row=t`` in the wave
stream, and so on.  This makes runs reproducible independently of chunking
or backend, and lets replicate ``k`` be regenerated in isolation.

The mixing function is the splitmix64 finalizer.  The compiled kernels use
the same constants; ``uniforms`` here is the reference implementation.
"""
import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

# stream identifiers
WAVE = 1
INIT = 2
CBM_STEP = 3
CBM_BRIDGE = 4
AUX = 5


def mix64(z):
    """splitmix64 finalizer on a Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def stream_key(seed, stream, replicate=0):
    """Key for one named stream of one replicate."""
    k = mix64(seed ^ mix64(stream * GAMMA))
    return mix64(k + replicate * GAMMA + 1)


def row_key(key, row):
    return mix64(key + (row * GAMMA & _MASK))


def _mix_array(z):
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniforms(key, row, cols):
    """Uniform [0, 1) doubles for ``cols`` of ``row`` under stream ``key``.

    ``cols`` is an integer array (or anything ``np.asarray`` accepts).
    """
    rk = np.uint64(row_key(key, row))
    c = np.asarray(cols, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix_array(rk + c * np.uint64(GAMMA))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def uniform_range(key, row, start, stop):
    return uniforms(key, row, np.arange(start, stop, dtype=np.uint64))


def normals(key, row, cols):
    """Standard normals by Box-Muller, column ``c`` uses uniforms ``2c, 2c+1``."""
    c = np.asarray(cols, dtype=np.uint64)
    u1 = uniforms(key, row, 2 * c)
    u2 = uniforms(key, row, 2 * c + np.uint64(1))
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * np.pi * u2)


def generator(seed, stream=AUX, replicate=0):
    """A numpy Generator for auxiliary draws (not part of the chain itself)."""
    return np.random.default_rng([seed & _MASK, stream, replicate])
