"""Spacing laws on a comfort zone ``[c_minus, c_plus]``, rescaled to mean 1."""
from dataclasses import dataclass, field

import numpy as np

UNIFORM = 0
DISCRETE = 1
TRIANGULAR = 2

_KIND_CODES = {"uniform": UNIFORM, "two-point": DISCRETE, "custom": DISCRETE,
               "triangular": TRIANGULAR}


@dataclass(frozen=True)
class SpacingDistribution:
    """A spacing law with mean 1.

    ``params`` holds the kind-specific numbers after rescaling:
    uniform ``(a, b)``, triangular ``(a, m, b)``, two-point/custom the atom
    values (with ``probs`` their probabilities).
    """

    kind: str
    c_minus: float
    c_plus: float
    sigma: float
    params: tuple
    probs: tuple = ()
    mean: float = 1.0
    _table: tuple = field(default=(), repr=False, compare=False)

    @property
    def code(self):
        return _KIND_CODES[self.kind]

    @property
    def is_lattice(self):
        return self.code == DISCRETE

    def kernel_params(self):
        """``(code, params, cum)`` arrays consumed by the compiled kernels.

        The arithmetic in :meth:`quantile` and in the kernels uses exactly
        these precomputed numbers so both produce bit-identical draws.
        """
        if self.code == UNIFORM:
            a, b = self.params
            p = np.array([a, b - a, 0.0, 0.0, 0.0])
            cum = np.array([1.0])
        elif self.code == TRIANGULAR:
            a, m, b = self.params
            fc = (m - a) / (b - a)
            p = np.array([a, b, fc, (b - a) * (m - a), (b - a) * (b - m)])
            cum = np.array([1.0])
        else:
            p = np.asarray(self.params, dtype=float)
            cum = np.cumsum(self.probs)
            cum[-1] = 1.0
        return self.code, np.ascontiguousarray(p, dtype=float), np.ascontiguousarray(cum, dtype=float)

    def quantile(self, u):
        """Inverse CDF applied to uniforms in [0, 1)."""
        u = np.asarray(u, dtype=float)
        code, p, cum = self.kernel_params()
        if code == UNIFORM:
            return p[0] + p[1] * u
        if code == TRIANGULAR:
            lo = p[0] + np.sqrt(u * p[3])
            hi = p[1] - np.sqrt((1.0 - u) * p[4])
            return np.where(u < p[2], lo, hi)
        idx = np.searchsorted(cum, u, side="right")
        return p[np.minimum(idx, len(p) - 1)]

    def sample(self, rng, size=None):
        return self.quantile(rng.random(size))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.code == UNIFORM:
            a, b = self.params
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if self.code == TRIANGULAR:
            a, m, b = self.params
            left = (x - a) ** 2 / ((b - a) * (m - a)) if m > a else np.zeros_like(x)
            right = 1.0 - (b - x) ** 2 / ((b - a) * (b - m)) if b > m else np.ones_like(x)
            out = np.where(x <= m, left, right)
            return np.where(x <= a, 0.0, np.where(x >= b, 1.0, out))
        vals = np.asarray(self.params)
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(vals, x, side="right")
        return np.where(idx == 0, 0.0, cum[np.maximum(idx - 1, 0)])

    def describe(self):
        if self.kind == "uniform":
            return "uniform:%r,%r" % self.params
        if self.kind == "triangular":
            return "tri:%r,%r,%r" % self.params
        return "%s:%s" % (self.kind, ",".join("%r@%r" % ab for ab in zip(self.params, self.probs)))


def make_distribution(kind, *params, probs=None):
    """Build a :class:`SpacingDistribution` and rescale it to mean 1.

    >>> make_distribution("uniform", 1, 3).params
    (0.5, 1.5)
    """
    kind = {"twopoint": "two-point", "tri": "triangular"}.get(kind, kind)
    if kind not in _KIND_CODES:
        raise ValueError("unknown spacing law %r" % kind)
    params = tuple(float(p) for p in params)

    if kind == "uniform":
        if len(params) != 2:
            raise ValueError("uniform needs (a, b)")
        a, b = params
        _check_support(a, b)
        mean = (a + b) / 2
        a, b = a / mean, b / mean
        return SpacingDistribution("uniform", a, b, (b - a) / np.sqrt(12.0), (a, b))

    if kind == "triangular":
        if len(params) != 3:
            raise ValueError("triangular needs (a, m, b)")
        a, m, b = params
        _check_support(a, b)
        if not a <= m <= b:
            raise ValueError("mode outside support")
        mean = (a + m + b) / 3
        a, m, b = a / mean, m / mean, b / mean
        var = (a * a + b * b + m * m - a * b - a * m - b * m) / 18.0
        return SpacingDistribution("triangular", a, b, float(np.sqrt(var)), (a, m, b))

    # atom tables: two-point and custom
    if probs is None:
        if kind != "two-point":
            raise ValueError("custom law needs probs")
        probs = (0.5, 0.5)
    vals = np.asarray(params, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if kind == "two-point" and len(vals) != 2:
        raise ValueError("two-point needs two atoms")
    if len(vals) != len(probs) or len(vals) == 0:
        raise ValueError("atoms and probabilities differ in length")
    if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
        raise ValueError("probabilities must be nonnegative and sum to 1")
    keep = probs > 0
    vals, probs = vals[keep], probs[keep] / probs[keep].sum()
    order = np.argsort(vals)
    vals, probs = vals[order], probs[order]
    _check_support(vals[0], vals[-1])
    mean = float(vals @ probs)
    vals = vals / mean
    var = float((vals * vals) @ probs - 1.0)
    return SpacingDistribution(kind, float(vals[0]), float(vals[-1]), float(np.sqrt(max(var, 0.0))),
                               tuple(float(v) for v in vals), tuple(float(p) for p in probs))


def _check_support(lo, hi):
    if lo <= 0:
        raise ValueError("c_minus must be positive, got %r" % lo)
    if hi < lo:
        raise ValueError("empty support [%r, %r]" % (lo, hi))
    if hi == lo:
        raise ValueError("degenerate point mass: the deterministic case has sigma = 0")


def parse_distribution(text):
    """Parse ``uniform:a,b``, ``twopoint:a,b[,p]``, ``tri:a,m,b`` or
    ``custom:v1@p1,v2@p2,...``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if not rest:
        raise ValueError("missing parameters in %r" % text)
    if kind == "custom":
        pairs = [item.split("@") for item in rest.split(",")]
        return make_distribution("custom", *[float(v) for v, _ in pairs],
                                 probs=[float(p) for _, p in pairs])
    nums = [float(x) for x in rest.split(",")]
    if kind == "twopoint" and len(nums) == 3:
        return make_distribution("two-point", nums[0], nums[1], probs=(nums[2], 1 - nums[2]))
    return make_distribution(kind, *nums)
