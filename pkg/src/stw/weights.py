"""Weight functions on (0, oo) and their dyadic coefficient sums.

A weight g is a positive nonincreasing density on the half line.  Its dyadic
coefficients ``w_n = 2**n g(2**n)`` normalize the block averages used across
the package, and the two running totals

    W(n) = sum of w_m over 0 <= m <= n,      G(t) = integral of g over (0, t]

are compared by the diagnostics here.  Everything is evaluated through
logarithms of the closed forms, so probes at scales like 2**120 and partial
sums with a million terms stay exact to float precision without overflow.

The catalog:

``f_cor``      1 on (0, 1), 1/t beyond; w_n = 1, W(n) = n + 1.
``g_cor``      1/2 on (0, 2), 1/(t log2 t) beyond; w_0 = 1/2, w_n = 1/n.
``g_pow(a)``   t**-a, with the part below t = 1 clipped at 1 when a >= 1
               so that the primitive exists; w_n is geometric.
``g_nonreg``   1/((t+2) log(t+2)**2): summable, the boundary case whose
               averaging operator still sees point masses.
``g_nonrv``    4-adic staircase (value 4**-i / i on [4**i, 4**(i+1))): not
               regularly varying, its doubling ratio oscillates forever.
``g_schro``    log(t+2)/(t+2), clipped to its maximum 1/e below t = e - 2.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericError
from .seqcore import (FLAT_RATIO, Verdict, _status_from_widths,
                      tail_envelope, DyadicSequence)

LN2 = math.log(2.0)
EULER_GAMMA = 0.5772156649015328606
# Thresholds for the summability verdict.
TAIL_SUMMABLE = 1e-5
RATIO_DIVERGENT = 1.02
# Partial-sum guards.
PARTIAL_SUM_MAX = 1 << 22
SUM_RATIO_MAX_N = 512


def harmonic_number(n):
    """H(n) = 1 + 1/2 + ... + 1/n, exactly via the digamma function."""
    if np.any(np.asarray(n) < 0):
        raise DomainError("harmonic numbers need n >= 0")
    return special.digamma(np.asarray(n, dtype=float) + 1.0) + EULER_GAMMA


class Weight:
    """Base class: a positive nonincreasing density on (0, oo).

    Subclasses provide ``_log_g_pow2`` (log g(2**s) for real s, vectorized)
    and a primitive; generic partial sums, their logarithms, and caching
    live here.  ``summable`` is a known three-state flag (True, False, or
    None when it must be measured).
    """

    name = "weight"
    summable = None
    primitive_kind = "exact"

    def __init__(self):
        self._w_cache = {}

    # -- pointwise -----------------------------------------------------------

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0.0):
            raise DomainError(f"{self.name} is defined on t > 0")
        out = self._value(t)
        return float(out) if np.ndim(out) == 0 else out

    def _value(self, t):
        raise NotImplementedError

    def log_g_pow2(self, s):
        """log g(2**s), for real (not only integer) s; never overflows."""
        out = self._log_g_pow2(np.asarray(s, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def _log_g_pow2(self, s):
        raise NotImplementedError

    def log_g_rel(self, s1, s0):
        """log g(2**s1) - log g(2**s0), stable at astronomical scales.

        Subtracting two pointwise logs loses the whole difference once the
        exponents pass 2**50 (the logs grow linearly in s while their gap
        stays bounded).  Catalog weights override this with cancellation-free
        closed forms; the generic fallback refuses beyond that depth rather
        than return noise.
        """
        if max(abs(s1), abs(s0)) > 2.0 ** 50:
            raise NumericError(f"{self.name} cannot resolve log-ratios at "
                               "scales beyond 2**50")
        return float(self.log_g_pow2(float(s1)) - self.log_g_pow2(float(s0)))

    # -- coefficients ---------------------------------------------------------

    def log_w(self, n):
        """log w_n = n log 2 + log g(2**n)."""
        n = np.asarray(n, dtype=float)
        out = n * LN2 + self._log_g_pow2(n)
        return float(out) if np.ndim(out) == 0 else out

    def w(self, n):
        lw = self.log_w(n)
        if np.any(np.asarray(lw) > 700.0):
            raise NumericError(f"w_n overflows float for {self.name} at "
                               f"n={n}; use log_w")
        out = np.exp(lw)
        return float(out) if np.ndim(out) == 0 else out

    def w_partial(self, a, b):
        """Exact sum of w_m over a <= m < b (closed form where available)."""
        a, b = int(a), int(b)
        if a < 0:
            raise DomainError("partial weight sums start at index 0")
        if b <= a:
            return 0.0
        return self._w_partial(a, b)

    def _w_partial(self, a, b):
        if b - a > PARTIAL_SUM_MAX:
            raise NumericError(
                f"no closed form for {self.name} partial sums; direct "
                f"summation is limited to {PARTIAL_SUM_MAX} terms")
        lw = self.log_w(np.arange(a, b))
        m = float(np.max(lw))
        if m > 700.0:
            raise NumericError(f"partial weight sum overflows for "
                               f"{self.name} on [{a}, {b})")
        return float(np.exp(m) * np.sum(np.exp(lw - m)))

    def W(self, n):
        """W(n) = sum of w_m over m <= n (cached)."""
        n = int(n)
        if n < 0:
            return 0.0
        if n not in self._w_cache:
            self._w_cache[n] = self.w_partial(0, n + 1)
        return self._w_cache[n]

    def log_W(self, n):
        """log W(n); stable even when W overflows float range."""
        val = self._log_W(int(n))
        return float(val)

    def _log_W(self, n):
        if n < 0:
            return -math.inf
        w = self.W(n)
        if not math.isfinite(w) or w <= 0.0:
            raise NumericError(f"W({n}) is outside float range for "
                               f"{self.name}; no stable log form available")
        return math.log(w)

    # -- primitives -----------------------------------------------------------

    def primitive(self, t):
        """G(t): the integral of the (clipped) weight over (0, t]."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise DomainError("the primitive needs t >= 0")
        out = self._primitive(t)
        return float(out) if np.ndim(out) == 0 else out

    def _primitive(self, t):
        raise NotImplementedError

    def log_primitive_pow2(self, s):
        """log G(2**s) for real s; stable at astronomical scales."""
        out = self._log_primitive_pow2(np.asarray(s, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def _log_primitive_pow2(self, s):
        g = self._primitive(np.exp2(np.minimum(s, 1020.0)))
        if np.any(~np.isfinite(np.asarray(g))) or np.any(np.asarray(g) <= 0):
            raise NumericError(f"G(2**s) left float range for {self.name}")
        return np.log(g)


# ---------------------------------------------------------------------------
# the catalog
# ---------------------------------------------------------------------------

class FCor(Weight):
    """1 on (0, 1) and 1/t beyond: the harmonic-scale weight, w_n = 1."""

    name = "f_cor"
    summable = False

    def _value(self, t):
        return np.where(t < 1.0, 1.0, 1.0 / t)

    def _log_g_pow2(self, s):
        return np.where(s < 0.0, 0.0, -s * LN2)

    def log_g_rel(self, s1, s0):
        return -LN2 * float(max(s1, 0) - max(s0, 0))

    def _w_partial(self, a, b):
        return float(b - a)

    def _log_W(self, n):
        return -math.inf if n < 0 else math.log(n + 1.0)

    def _primitive(self, t):
        t = np.maximum(t, 1e-300)
        return np.where(t <= 1.0, t, 1.0 + np.log(t))

    def _log_primitive_pow2(self, s):
        return np.where(s <= 0.0, s * LN2, np.log1p(np.maximum(s, 0.0) * LN2))


class GCor(Weight):
    """1/2 on (0, 2) and 1/(t log2 t) beyond: w_0 = 1/2, w_n = 1/n."""

    name = "g_cor"
    summable = False

    def _value(self, t):
        safe = np.maximum(t, 2.0)
        return np.where(t < 2.0, 0.5, 1.0 / (safe * np.log2(safe)))

    def _log_g_pow2(self, s):
        safe = np.maximum(s, 1.0)
        return np.where(s < 1.0, -LN2, -safe * LN2 - np.log(safe))

    def log_g_rel(self, s1, s0):
        if s1 >= 1 and s0 >= 1:
            d = float(s1 - s0)
            return -LN2 * d - math.log1p(d / float(s0))
        return float(self.log_g_pow2(float(s1)) - self.log_g_pow2(float(s0)))

    def _w_partial(self, a, b):
        total = 0.0
        if a == 0:
            total += 0.5
            a = 1
        if b > a:
            total += float(harmonic_number(b - 1) - harmonic_number(a - 1))
        return total

    def _log_W(self, n):
        if n < 0:
            return -math.inf
        return math.log(0.5 + (float(harmonic_number(n)) if n >= 1 else 0.0))

    def _primitive(self, t):
        t = np.maximum(t, 1e-300)
        safe = np.maximum(t, 2.0)
        return np.where(t <= 2.0, 0.5 * t,
                        1.0 + LN2 * (np.log(np.log(safe)) - math.log(LN2)))

    def _log_primitive_pow2(self, s):
        safe = np.maximum(s, 1.0)
        big = np.log1p(LN2 * (np.log(safe * LN2) - math.log(LN2)))
        return np.where(s <= 1.0, (s - 1.0) * LN2, big)


class GPow(Weight):
    """t**-alpha; below t = 1 the value is clipped at 1 when alpha >= 1.

    The coefficients are geometric, w_n = r**n with r = 2**(1 - alpha), so
    alpha = 1 reproduces plain averaging and alpha = 0 the raw dyadic scale.
    """

    summable = None

    def __init__(self, alpha):
        super().__init__()
        alpha = float(alpha)
        if alpha < 0.0:
            raise DomainError("g_pow needs alpha >= 0 to be nonincreasing")
        self.alpha = alpha
        self.name = f"g_pow({alpha:g})"
        self.summable = alpha > 1.0
        self.primitive_kind = "regularized" if alpha >= 1.0 else "exact"
        self._log_r = (1.0 - alpha) * LN2

    def _value(self, t):
        if self.alpha >= 1.0:
            safe = np.where(t < 1.0, 1.0, t)
            return np.where(t < 1.0, 1.0, safe ** -self.alpha)
        return t ** -self.alpha

    def _log_g_pow2(self, s):
        if self.alpha >= 1.0:
            return np.where(s < 0.0, 0.0, -self.alpha * s * LN2)
        return -self.alpha * s * LN2

    def log_g_rel(self, s1, s0):
        if self.alpha >= 1.0:
            s1, s0 = max(s1, 0), max(s0, 0)
        return -self.alpha * LN2 * float(s1 - s0)

    def _w_partial(self, a, b):
        if self._log_r == 0.0:
            return float(b - a)
        la, lb = a * self._log_r, b * self._log_r
        if max(la, lb) > 700.0:
            raise NumericError(f"partial sums of {self.name} overflow float "
                               f"range on [{a}, {b}); use log_W")
        r = math.exp(self._log_r)
        return (math.exp(lb) - math.exp(la)) / (r - 1.0)

    def _log_W(self, n):
        if n < 0:
            return -math.inf
        if self._log_r == 0.0:
            return math.log(n + 1.0)
        top = (n + 1) * self._log_r
        if self._log_r > 0:
            return top + math.log1p(-math.exp(-top)) - math.log(
                math.expm1(self._log_r))
        return math.log1p(-math.exp(top)) - math.log(-math.expm1(self._log_r))

    def _primitive(self, t):
        a = self.alpha
        t = np.maximum(t, 1e-300)
        if a < 1.0:
            return t ** (1.0 - a) / (1.0 - a)
        if a == 1.0:
            return np.where(t <= 1.0, t, 1.0 + np.log(t))
        return np.where(t <= 1.0, t,
                        1.0 + (1.0 - t ** (1.0 - a)) / (a - 1.0))

    def _log_primitive_pow2(self, s):
        a = self.alpha
        if a < 1.0:
            return (1.0 - a) * s * LN2 - math.log(1.0 - a)
        if a == 1.0:
            return np.where(s <= 0.0, s * LN2,
                            np.log1p(np.maximum(s, 0.0) * LN2))
        inner = -np.expm1(np.minimum(s, 1e18) * (1.0 - a) * LN2) / (a - 1.0)
        return np.where(s <= 0.0, s * LN2, np.log1p(inner))


class GNonreg(Weight):
    """1/((t+2) log(t+2)**2): summable, with primitive 1/log 2 - 1/log(t+2)."""

    name = "g_nonreg"
    summable = True

    @staticmethod
    def _log_tplus2(s):
        # log(2**s + 2), via log1p so that s = 2**20 stays exact.
        s = np.asarray(s, dtype=float)
        big = s * LN2 + np.log1p(np.exp2(np.minimum(1.0 - s, 0.0)))
        small = np.log(np.exp2(np.minimum(s, 2.0)) + 2.0)
        return np.where(s >= 1.0, big, small)

    def _value(self, t):
        ln = np.log(t + 2.0)
        return 1.0 / ((t + 2.0) * ln * ln)

    def _log_g_pow2(self, s):
        ell = self._log_tplus2(s)
        return -ell - 2.0 * np.log(ell)

    @staticmethod
    def _log_tplus2_rel(s1, s0):
        """log(2**s1 + 2) - log(2**s0 + 2) without the linear-term blowup."""
        d = LN2 * float(s1 - s0)
        d += math.log1p(2.0 ** min(1.0 - float(s1), 0.0))
        d -= math.log1p(2.0 ** min(1.0 - float(s0), 0.0))
        return d

    def log_g_rel(self, s1, s0):
        if s1 >= 1 and s0 >= 1:
            d_ell = self._log_tplus2_rel(s1, s0)
            ell0 = float(self._log_tplus2(float(s0)))
            return -d_ell - 2.0 * math.log1p(d_ell / ell0)
        return float(self.log_g_pow2(float(s1)) - self.log_g_pow2(float(s0)))

    def _primitive(self, t):
        return 1.0 / LN2 - 1.0 / np.log(t + 2.0)

    def _log_primitive_pow2(self, s):
        ell = self._log_tplus2(s)
        return np.log(1.0 / LN2 - 1.0 / ell)


class GNonrv(Weight):
    """The 4-adic staircase: 1 on (0,1), 1/4 on [1,4), 4**-i/i beyond.

    Constant on each block [4**i, 4**(i+1)), so the doubling ratio g(t)/g(2t)
    alternates between 1 and roughly 4 forever: not regularly varying.
    """

    name = "g_nonrv"
    summable = False

    def _value(self, t):
        t = np.asarray(t, dtype=float)
        i = np.floor(np.log2(np.maximum(t, 1.0)) / 2.0)
        # Guard block edges against log2 rounding.
        i = np.where(4.0 ** (i + 1) <= t, i + 1, i)
        i = np.where(4.0 ** i > t, i - 1, i)
        i = np.maximum(i, 0.0)
        safe = np.maximum(i, 1.0)
        val = np.where(i < 1.0, 0.25, 4.0 ** -safe / safe)
        return np.where(t < 1.0, 1.0, val)

    def _log_g_pow2(self, s):
        i = np.floor(np.asarray(s, dtype=float) / 2.0)
        safe = np.maximum(i, 1.0)
        val = np.where(i < 1.0, -2.0 * LN2,
                       -2.0 * safe * LN2 - np.log(safe))
        return np.where(s < 0.0, 0.0, val)

    def log_g_rel(self, s1, s0):
        i1 = s1 // 2 if isinstance(s1, int) else math.floor(s1 / 2.0)
        i0 = s0 // 2 if isinstance(s0, int) else math.floor(s0 / 2.0)
        if i1 >= 1 and i0 >= 1:
            d = float(i1 - i0)
            return -2.0 * LN2 * d - math.log1p(d / float(i0))
        return float(self.log_g_pow2(float(s1)) - self.log_g_pow2(float(s0)))

    @staticmethod
    def _pair_sum(m):
        """Sum of w_k over 2 <= k <= m (w_(2i) = 1/i, w_(2i+1) = 2/i)."""
        if m < 2:
            return 0.0
        k = m // 2
        if m % 2 == 1:
            return 3.0 * float(harmonic_number(k))
        return 3.0 * float(harmonic_number(k - 1)) + 1.0 / k

    def _w_partial(self, a, b):
        total = 0.0
        if a == 0 and b > 0:
            total += 0.25
        if a <= 1 and b > 1:
            total += 0.5
        total += self._pair_sum(b - 1) - self._pair_sum(a - 1)
        return total

    def _log_W(self, n):
        if n < 0:
            return -math.inf
        return math.log(self.w_partial(0, n + 1))

    def _primitive(self, t):
        t = np.asarray(t, dtype=float)
        i = np.floor(np.log2(np.maximum(t, 1.0)) / 2.0)
        i = np.where(4.0 ** (i + 1) <= t, i + 1, i)
        i = np.where(4.0 ** i > t, i - 1, i)
        i = np.maximum(i, 0.0)
        safe = np.maximum(i, 1.0)
        base = np.where(i < 1.0, 1.0, 1.75 + 3.0 * (
            special.digamma(safe) + EULER_GAMMA))
        slope = np.where(i < 1.0, 0.25, 4.0 ** -safe / safe)
        anchor = np.where(i < 1.0, 1.0, 4.0 ** safe)
        out = base + slope * (t - anchor)
        return np.where(t <= 1.0, np.maximum(t, 0.0), out)

    def _log_primitive_pow2(self, s):
        s = np.asarray(s, dtype=float)
        i = np.maximum(np.floor(s / 2.0), 0.0)
        safe = np.maximum(i, 1.0)
        base = np.where(i < 1.0, 1.0,
                        1.75 + 3.0 * (special.digamma(safe) + EULER_GAMMA))
        # (2**s - 4**i) * 4**-i / i, kept in the exponent domain.  The
        # head branch only applies below s = 2, so clamp its argument to
        # keep the unused lanes from overflowing.
        frac_i = np.expm1(np.maximum(s - 2.0 * i, 0.0) * LN2) / safe
        frac_0 = 0.25 * np.expm1(np.clip(s, 0.0, 2.0) * LN2)
        out = np.where(i < 1.0, base + frac_0, base + frac_i)
        return np.where(s <= 0.0, s * LN2, np.log(out))


class GSchro(Weight):
    """log(t+2)/(t+2), clipped to its maximum 1/e below t = e - 2."""

    name = "g_schro"
    summable = False
    _t_knee = math.e - 2.0

    def _value(self, t):
        raw = np.log(t + 2.0) / (t + 2.0)
        return np.where(t < self._t_knee, 1.0 / math.e, raw)

    def _log_g_pow2(self, s):
        ell = GNonreg._log_tplus2(s)
        knee = math.log2(self._t_knee)
        return np.where(s < knee, -1.0, np.log(ell) - ell)

    def log_g_rel(self, s1, s0):
        if s1 >= 1 and s0 >= 1:
            d_ell = GNonreg._log_tplus2_rel(s1, s0)
            ell0 = float(GNonreg._log_tplus2(float(s0)))
            return math.log1p(d_ell / ell0) - d_ell
        return float(self.log_g_pow2(float(s1)) - self.log_g_pow2(float(s0)))

    def _primitive(self, t):
        ell = np.log(np.maximum(t, self._t_knee) + 2.0)
        head = self._t_knee / math.e
        return np.where(t <= self._t_knee, t / math.e,
                        head + 0.5 * (ell * ell - 1.0))

    def _log_primitive_pow2(self, s):
        ell = GNonreg._log_tplus2(s)
        knee = math.log2(self._t_knee)
        head = self._t_knee / math.e
        big = np.log(head + 0.5 * (ell * ell - 1.0))
        return np.where(s <= knee, s * LN2 - 1.0, big)


class TabulatedWeight(Weight):
    """A right-continuous step weight from (t, value) tables.

    Values are clamped at the table ends, so the weight is defined on the
    whole half line; each value must be positive and the table nonincreasing.
    """

    summable = None
    primitive_kind = "exact"

    def __init__(self, t_points, values, name="tabulated"):
        super().__init__()
        t = np.asarray(t_points, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.size < 1 or t.size != v.size:
            raise DomainError("tabulated weights need matching nonempty "
                              "t and value tables")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise DomainError("table points must be positive and increasing")
        if np.any(v <= 0):
            raise DomainError("weights must be positive")
        if np.any(v[1:] > v[:-1]):
            raise DomainError("weights must be nonincreasing")
        self.t = t
        self.v = v
        self.name = name
        # Prefix integrals at the table points (value v[j] on [t[j], t[j+1])).
        seg = v[:-1] * np.diff(t)
        self._prefix = np.concatenate(([0.0], np.cumsum(seg)))

    def _value(self, t):
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1,
                      0, self.v.size - 1)
        return self.v[idx]

    def _log_g_pow2(self, s):
        if np.any(np.abs(np.asarray(s)) > 1020):
            raise NumericError("tabulated weights support scales only "
                               "within float range")
        return np.log(self._value(np.exp2(np.asarray(s, dtype=float))))

    def _primitive(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1,
                      0, self.v.size - 1)
        below = np.minimum(t, self.t[0]) * self.v[0]
        inside = np.where(t > self.t[0],
                          self._prefix[np.minimum(idx, self.v.size - 1)]
                          + self.v[idx] * np.clip(t - self.t[idx], 0.0, None),
                          0.0)
        return below + inside


class CallableWeight(Weight):
    """Wrap an arbitrary positive nonincreasing callable as a weight.

    The primitive falls back to adaptive quadrature; partial coefficient
    sums use direct summation.  Scales are limited to float range.
    """

    summable = None
    primitive_kind = "quadrature"

    def __init__(self, fn, name="callable"):
        super().__init__()
        self.fn = fn
        self.name = name

    def _value(self, t):
        return np.vectorize(self.fn, otypes=[float])(t) if np.ndim(t) \
            else float(self.fn(float(t)))

    def _log_g_pow2(self, s):
        if np.any(np.abs(np.asarray(s)) > 1020):
            raise NumericError("callable weights support scales only "
                               "within float range")
        return np.log(self._value(np.exp2(np.asarray(s, dtype=float))))

    def _primitive(self, t):
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(ts)
        for i, ti in enumerate(ts):
            if ti == 0.0:
                out[i] = 0.0
                continue
            val, err = integrate.quad(self.fn, 0.0, ti, epsrel=1e-9,
                                      limit=200)
            if err > 1e-9 * abs(val) + 1e-300:
                raise NumericError(
                    f"quadrature of {self.name} up to t={ti} achieved only "
                    f"{err:.3e} absolute error (target 1e-9 relative)")
            out[i] = val
        return out[0] if scalar else out


_POW_RE = re.compile(r"^g_pow\(\s*([-+0-9.eE]+)\s*\)$")
_CATALOG = {
    "f_cor": FCor,
    "g_cor": GCor,
    "g_nonreg": GNonreg,
    "g_nonrv": GNonrv,
    "g_schro": GSchro,
}
_instances = {}


def get_weight(name):
    """Look up a catalog weight by name, e.g. ``g_cor`` or ``g_pow(0.5)``."""
    if isinstance(name, Weight):
        return name
    key = str(name).strip()
    if key in _instances:
        return _instances[key]
    if key in _CATALOG:
        w = _CATALOG[key]()
    else:
        m = _POW_RE.match(key)
        if not m:
            raise DomainError(
                f"unknown weight {name!r}; expected one of "
                f"{sorted(_CATALOG)} or g_pow(alpha)")
        w = GPow(float(m.group(1)))
    _instances[key] = w
    return w


def weight_names():
    """The catalog names, with a representative power-weight entry."""
    return sorted(_CATALOG) + ["g_pow(1)"]


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _default_exponents(lo, hi, count):
    return np.linspace(float(lo), float(hi), int(count))


def doubling_envelope(g, t_grid=None):
    """Envelope of the doubling ratio g(t)/g(2t) over the grid.

    The grid is interpreted through its base-2 logarithms so that probes at
    2**120 cost nothing; a doubling ratio pinned near 2 is the signature of
    harmonic-like decay, while persistent oscillation (as for ``g_nonrv``)
    shows up as a wide, non-narrowing envelope.
    """
    if t_grid is None:
        exps = _default_exponents(0, 60, 121)
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(t_grid <= 0):
            raise DomainError("the doubling grid needs positive t")
        exps = np.log2(t_grid)
    ratios = np.exp(np.asarray(g.log_g_pow2(exps))
                    - np.asarray(g.log_g_pow2(exps + 1.0)))
    seq = DyadicSequence.from_values(ratios, 0)
    env = tail_envelope(seq)
    env.meta["exponents"] = [float(e) for e in exps]
    env.meta["ratios"] = [float(r) for r in ratios]
    return env


def rv_check(g, horizon=None, tol=0.05):
    """Does the weight vary regularly with index -1 (doubling ratio -> 2)?

    Probes the deviation |g(t)/g(2t) - 2| on a geometric grid reaching the
    horizon (default 2**120).  yes needs the deepest quarter within ``tol``
    and still shrinking against the shallow half; a deviation that stays
    flat above ``tol`` is a no; anything else is inconclusive.
    """
    e_hi = 120.0 if horizon is None else math.log2(horizon)
    if e_hi <= 2.0:
        raise DomainError("the horizon must exceed 2**2")
    exps = _default_exponents(e_hi / 2.0, e_hi, 13)
    ratios = np.exp(np.asarray(g.log_g_pow2(exps))
                    - np.asarray(g.log_g_pow2(exps + 1.0)))
    devs = np.abs(ratios - 2.0)
    n = devs.size
    shallow = float(np.max(devs[:(n + 1) // 2]))
    deep = float(np.max(devs[-(n // 4 + 1):]))
    status = _status_from_widths(shallow, deep)
    evidence = {
        "exponents": [float(e) for e in exps],
        "ratios": [float(r) for r in ratios],
        "deviation_shallow": shallow,
        "deviation_deep": deep,
        "status": status,
        "tol": tol,
    }
    value = float(ratios[-1])
    if deep <= tol and status == "converged":
        return Verdict("yes", value, evidence)
    if deep > tol and deep >= FLAT_RATIO * shallow:
        return Verdict("no", value, evidence)
    return Verdict("inconclusive", value, evidence)


def l1_check(g, n_max=1 << 20):
    """Is the weight summable?  Checked on both scales at once.

    The coefficient route sums w_n = 2**n g(2**n) in the log domain and
    looks at the fraction carried by the tail n > n_max/2; the primitive
    route compares G(2**(n_max/2)) with G(2**n_max).  Summable needs both
    tails negligible; divergent needs both totals still growing by at least
    two percent per doubling of the index range.
    """
    n_max = int(n_max)
    if n_max < 16:
        raise DomainError("n_max too small to separate head from tail")
    if n_max > PARTIAL_SUM_MAX:
        raise NumericError(f"l1_check sums at most {PARTIAL_SUM_MAX} terms")
    lw = np.asarray(g.log_w(np.arange(n_max + 1)), dtype=float)
    half = n_max // 2
    log_full = float(special.logsumexp(lw))
    log_head = float(special.logsumexp(lw[:half + 1]))
    log_tail = float(special.logsumexp(lw[half + 1:]))
    tail_frac = math.exp(log_tail - log_full)
    half_ratio = math.exp(log_full - log_head)

    log_g_full = float(g.log_primitive_pow2(n_max))
    log_g_half = float(g.log_primitive_pow2(half))
    cauchy_frac = -math.expm1(log_g_half - log_g_full)
    prim_ratio = math.exp(log_g_full - log_g_half)

    sum_summable = tail_frac <= TAIL_SUMMABLE
    sum_divergent = half_ratio >= RATIO_DIVERGENT
    prim_summable = cauchy_frac <= TAIL_SUMMABLE
    prim_divergent = prim_ratio >= RATIO_DIVERGENT

    evidence = {
        "n_max": n_max,
        "coefficient_route": {
            "log_sum": log_full,
            "sum": math.exp(log_full) if log_full < 700.0 else None,
            "tail_fraction": tail_frac,
            "half_ratio": half_ratio,
        },
        "primitive_route": {
            "log_integral": log_g_full,
            "integral": math.exp(log_g_full) if log_g_full < 700.0 else None,
            "cauchy_fraction": cauchy_frac,
            "half_ratio": prim_ratio,
        },
    }
    if sum_summable and prim_summable:
        return Verdict("yes", math.exp(log_full), evidence)
    if sum_divergent and prim_divergent:
        return Verdict("no", None, evidence)
    return Verdict("inconclusive", None, evidence)


def primitive_eval(g, t, rtol=1e-9):
    """G(t) by closed form where available, else guarded quadrature."""
    if t < 0.0:
        raise DomainError(f"the primitive needs t >= 0, got {t}")
    if g.primitive_kind == "quadrature":
        # CallableWeight enforces the tolerance internally.
        return g.primitive(t)
    return g.primitive(t)


def rv_tail_ratio(g, t_grid=None):
    """Envelope of t g(t) / G(t) along a deep geometric grid.

    For power decay t**-a (a < 1) the ratio is pinned at 1 - a; for
    harmonic-type weights it decays to 0 like 1/log t.  The envelope's
    narrowing behavior separates the two regimes.
    """
    if t_grid is None:
        exps = _default_exponents(10, 120, 111)
    else:
        t_grid = np.asarray(t_grid, dtype=float)
        if np.any(t_grid <= 0):
            raise DomainError("the ratio grid needs positive t")
        exps = np.log2(t_grid)
    log_num = exps * LN2 + np.asarray(g.log_g_pow2(exps))
    ratios = np.exp(log_num - np.asarray(g.log_primitive_pow2(exps)))
    seq = DyadicSequence.from_values(ratios, 0)
    env = tail_envelope(seq)
    env.meta["exponents"] = [float(e) for e in exps]
    env.meta["ratios"] = [float(r) for r in ratios]
    return env


def dyadic_sum_ratio(g, n):
    """W(n) / G(2**n): coefficient mass against the primitive.

    The two totals disagree by a bounded factor whose limit depends on the
    weight; for plain harmonic decay the ratio tends to 1/log 2, which is
    the calibration constant relating the coefficient and integral forms of
    the averaged functionals.
    """
    n = int(n)
    if n < 1:
        raise DomainError("the sum ratio needs n >= 1")
    if n > SUM_RATIO_MAX_N:
        raise DomainError(f"the sum ratio is specified for n <= "
                          f"{SUM_RATIO_MAX_N}")
    lw = np.asarray(g.log_w(np.arange(n + 1)), dtype=float)
    log_w_sum = float(special.logsumexp(lw))
    return math.exp(log_w_sum - float(g.log_primitive_pow2(n)))
