"""Dyadic synthesis, rearrangement, and averaging transforms.

A bounded sequence x is synthesized into the step function (D_g x)(t) =
x_n g(2**n) on [2**n, 2**(n+1)).  Nonincreasing nonnegative functions on
(0, oo) are represented by :class:`MuFunction`, and the block average

    (Phi_g mu)_n = (1 / (2**n g(2**n))) * integral of mu over [2**n, 2**(n+1))

carries functions back to sequences.  The weighted averaging operator

    (C_g x)_n = (sum over m <= n of w_m x_m) / W(n),   w_m = 2**m g(2**m),

and the logarithmic mean

    (M x)_0 = x_0,   (M x)_n = (sum over 1 <= k <= n of x_k / k) / log(n + 1)

are the summation methods whose invariant means the package studies.

Exactness is the organizing constraint: the index windows of interest reach
depths like 4**72 where nothing can be materialized, so rearrangements are
kept in structured forms (identity, packed 0/1 runs in base-2 logarithmic
coordinates, or a sorted dense head plus a uniformly shifted dyadic tail)
for which the block averages have closed forms, and C_g is evaluated through
exact partial sums of the weights over constant segments.
"""

from __future__ import annotations

import bisect
import math

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .seqcore import (MATERIALIZE_MAX, Z_MINUS, Z_PLUS, Z_TWO_SIDED,
                      DyadicSequence, ordering_numbers)
from .weights import Weight, get_weight

# Relative slack when checking that values are nonincreasing; absorbs the
# sub-2**-70 plateau corrections the structured representations drop.
MONOTONE_SLACK = 2.0 ** -60
# Dense evaluation cap for the sequential C_g recurrence.
DENSE_CESARO_MAX = 1 << 16
# Dense guards for sort-based rearrangement (edges kept as floats).
SORT_MAX_BLOCKS = 4096
SORT_MAX_EXPONENT = 900
# Indices this far inside a run of equal synthesis coefficients take the
# plateau value exactly; the dropped correction is below 2**-70 per index.
PACKED_MARGIN = 70

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# step synthesis
# ---------------------------------------------------------------------------

class StepFunction:
    """The dyadic step synthesis D_g x of a sequence x.

    The value on [2**n, 2**(n+1)) is ``x_n * g(2**n)``, so the integral over
    that block is exactly ``x_n * w_n`` with ``w_n = 2**n g(2**n)``.
    ``below_lo`` states what lives below the window: 0.0, or a constant
    coefficient (used by two-sided constant sequences, whose synthesis
    extends to all scales).
    """

    def __init__(self, coeffs, weight, below_lo=None):
        if not isinstance(weight, Weight):
            raise DomainError("synthesis needs a Weight instance")
        self.coeffs = coeffs
        self.weight = weight
        self.below_lo = below_lo  # None (zero) or a float coefficient

    def coeff_at(self, n):
        """Coefficient x_n, honoring the below-window extension."""
        if n < self.coeffs.index_lo:
            return 0.0 if self.below_lo is None else float(self.below_lo)
        if n > self.coeffs.index_hi:
            return 0.0
        return self.coeffs.at(n)

    def value(self, t):
        """Pointwise value at t > 0 (right-continuous)."""
        if t <= 0.0:
            raise DomainError(f"step functions live on t > 0, got t={t}")
        n = int(math.floor(math.log2(t)))
        # Guard against log2 landing on the wrong side of a dyadic point.
        if 2.0 ** (n + 1) <= t:
            n += 1
        elif 2.0 ** n > t:
            n -= 1
        c = self.coeff_at(n)
        return c * math.exp(self.weight.log_g_pow2(n))

    def block_integral(self, n):
        """Integral over [2**n, 2**(n+1)), exactly x_n * w_n."""
        c = self.coeff_at(n)
        return 0.0 if c == 0.0 else c * math.exp(self.weight.log_w(n))


def synth_D(x, g=None):
    """Synthesize the sequence x into its dyadic step function D_g x.

    Without a weight the plain synthesis (value x_n on the n-th block) is
    produced, which is the constant weight ``g_pow(0)``.
    """
    if g is None:
        g = get_weight("g_pow(0)")
    below = None
    if x.kind == "formula" and x.side == Z_TWO_SIDED:
        if x.formula_id == "chi":
            below = 1.0
        elif x.formula_id == "const":
            below = float(x.params.get("c", 1.0))
    return StepFunction(x, g, below_lo=below)


# ---------------------------------------------------------------------------
# packed 0/1 runs: rearrangement bookkeeping in base-2 log coordinates
# ---------------------------------------------------------------------------

def _packed_shifts_log2(runs):
    """Base-2 logs of the left shifts that pack each run of ones.

    ``runs`` lists exponent intervals [a, b) on which the coefficients are 1;
    the synthesis is supported on [2**a, 2**b) for each run.  Rearrangement
    slides run j left by s_j = 2**(a_j) - C_(j-1), where C_(j-1) is the total
    length already packed.  Each log is kept as an (anchor, remainder) pair
    with an exact integer anchor, so runs at depth 4**72 keep the remainder
    to full float precision instead of losing it to the anchor's rounding.
    """
    log2_s = []
    cum = None
    for a, b in runs:
        if cum is None:
            log2_s.append((a, 0.0))
            cum = (b, math.log2(1.0 - 2.0 ** float(a - b)))
        else:
            ca, cd = cum
            gap = min(float(ca - a) + cd, 0.0)
            log2_s.append((a, math.log2(max(1.0 - 2.0 ** gap, 1e-300))))
            rise = float(ca - b) + cd
            cum = (b, math.log2(1.0 - 2.0 ** float(a - b) + 2.0 ** rise))
    return log2_s


def _packed_phi_at(runs, log2_s, g1, k):
    """Exact block average (Phi_g1 mu*)_k of a packed 0/1 rearrangement.

    The derivation: inside run j the dyadic block [2**k, 2**(k+1)) sees the
    original value g1(2**k) except on a final stretch of length s_j where the
    next value appears; before any run, the block sits entirely under the
    first run's leading value; between runs it sits under the next run's
    leading value.  Weight ratios go through log_g_rel so they survive
    astronomically deep scales.
    """
    j = None
    for i, (a, b) in enumerate(runs):
        if k < a:
            break
        j = i
    if j is None:
        return math.exp(g1.log_g_rel(runs[0][0], k))
    a, b = runs[j]
    if k < b:
        if k + 1 < b:
            ratio = math.exp(g1.log_g_rel(k + 1, k))
        elif j + 1 < len(runs):
            ratio = math.exp(g1.log_g_rel(runs[j + 1][0], k))
        else:
            ratio = 0.0
        anchor, rem = log2_s[j]
        e = float(anchor - k) + rem
        frac = 2.0 ** e if e > -1060.0 else 0.0
        return 1.0 - frac * (1.0 - ratio)
    if j + 1 < len(runs):
        return math.exp(g1.log_g_rel(runs[j + 1][0], k))
    return 0.0


def _log_weight_ratio(g1, g2, k):
    """log(g1(2**k) / g2(2**k)), stable when k is astronomically large."""
    if abs(k) <= 1 << 50:
        return float(g1.log_g_pow2(k) - g2.log_g_pow2(k))
    ref = (1 << 40) if k > 0 else -(1 << 40)
    return (g1.log_g_rel(k, ref) - g2.log_g_rel(k, ref)
            + float(g1.log_g_pow2(ref) - g2.log_g_pow2(ref)))


# ---------------------------------------------------------------------------
# nonincreasing functions on (0, oo)
# ---------------------------------------------------------------------------

class MuFunction:
    """A nonnegative nonincreasing function on (0, oo).

    Five representations, chosen by :func:`rearrange` for exactness:

    * ``dyadic_steps``: a synthesis whose values are already nonincreasing
      (the rearrangement is the identity);
    * ``steps``: explicit breakpoints from 0 with nonincreasing values and
      a tail that is either zero or a scaled weight;
    * ``closed_form``: a callable with an optional antiderivative;
    * ``packed_runs``: the rearrangement of a 0/1 coefficient synthesis,
      kept as exponent runs plus packing shifts in log2 coordinates;
    * ``sorted_hybrid``: a sorted dense head on [0, T0) and the original
      dyadic blocks from exponent k* onward, all shifted left by the same
      integer 2**k* - T0.
    """

    def __init__(self, kind, **payload):
        self.kind = kind
        for key, val in payload.items():
            setattr(self, key, val)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_breakpoints(cls, edges, values, tail=None):
        """Explicit step form: value values[j] on [edges[j], edges[j+1]).

        ``edges`` must start at 0 and increase; ``values`` has one entry per
        gap and must be nonnegative and nonincreasing.  ``tail`` is None for
        a zero tail, or a pair (weight, scale) continuing the function as
        scale * weight(t) beyond the last edge.
        """
        edges = np.asarray(edges, dtype=float)
        values = np.asarray(values, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or edges[0] != 0.0:
            raise DomainError("breakpoints must start at 0 and contain at "
                              "least one interval")
        if np.any(np.diff(edges) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        if values.size != edges.size - 1:
            raise DomainError("need exactly one value per interval")
        if np.any(values < 0):
            raise DomainError("a rearranged function cannot take negative "
                              "values")
        if np.any(values[1:] > values[:-1] * (1.0 + MONOTONE_SLACK) + 1e-300):
            raise DomainError("breakpoint values must be nonincreasing")
        if tail is not None:
            gw, scale = tail
            if scale < 0:
                raise DomainError("tail scale must be nonnegative")
            if scale * gw(float(edges[-1])) > values[-1] * (1.0 + MONOTONE_SLACK) + 1e-300:
                raise DomainError("tail would exceed the last step value")
        return cls("steps", edges=edges, values=values, tail=tail)

    @classmethod
    def from_weight(cls, g, scale=1.0):
        """The function t -> scale * g(t) with its exact antiderivative."""
        if scale < 0:
            raise DomainError("scale must be nonnegative")
        return cls("closed_form",
                   fn=lambda t: scale * g(t),
                   antiderivative=lambda t: scale * g.primitive(t),
                   base_weight=g, scale=float(scale))

    @classmethod
    def from_callable(cls, fn, antiderivative=None):
        """A closed-form nonincreasing function; integrals fall back to
        adaptive quadrature when no antiderivative is supplied."""
        return cls("closed_form", fn=fn, antiderivative=antiderivative,
                   base_weight=None, scale=None)

    # -- pointwise values ----------------------------------------------------

    def value(self, t, side="right"):
        """The value at t > 0; ``side='left'`` gives the left limit."""
        if t <= 0.0:
            raise DomainError(f"mu lives on t > 0, got t={t}")
        if side not in ("right", "left"):
            raise DomainError(f"side must be 'right' or 'left', got {side!r}")
        eps = 0.0 if side == "right" else 1.0
        if self.kind == "steps":
            j = bisect.bisect_right(list(self.edges), t) - 1
            if side == "left":
                j_left = bisect.bisect_left(list(self.edges), t) - 1
                j = j_left
            if j < 0:
                j = 0
            if j >= self.values.size:
                if self.tail is None:
                    return 0.0
                gw, scale = self.tail
                return scale * gw(t)
            return float(self.values[j])
        if self.kind == "closed_form":
            return float(self.fn(t))
        if self.kind == "dyadic_steps":
            n = int(math.floor(math.log2(t)))
            if 2.0 ** (n + 1) <= t:
                n += 1
            elif 2.0 ** n > t:
                n -= 1
            if side == "left" and 2.0 ** n == t:
                n -= 1
            return self.step.coeff_at(n) * math.exp(
                self.step.weight.log_g_pow2(n))
        if self.kind == "sorted_hybrid":
            if t <= self.t0:
                edges = list(self.head_edges)
                j = (bisect.bisect_left(edges, t) if side == "left"
                     else bisect.bisect_right(edges, t)) - 1
                if 0 <= j < len(self.head_values):
                    return float(self.head_values[j])
                if j >= len(self.head_values):
                    pass  # falls through to the shifted tail at t == t0
                else:
                    return float(self.head_values[0])
            u = t + float(self.shift)
            n = int(math.floor(math.log2(u)))
            if 2.0 ** (n + 1) <= u:
                n += 1
            elif 2.0 ** n > u:
                n -= 1
            if side == "left" and 2.0 ** n == u:
                n -= 1
            if n < self.k_star:
                n = self.k_star
            if n > self.coeffs.index_hi:
                return 0.0
            return self.coeffs.at(n) * math.exp(self.weight.log_g_pow2(n))
        raise NumericError("pointwise values of a packed rearrangement are "
                           "not supported; use its block averages")

    def sup_value(self):
        """The essential sup, i.e. the value at 0+."""
        if self.kind == "steps":
            return float(self.values[0])
        if self.kind == "closed_form":
            return float(self.fn(1e-12))
        if self.kind == "dyadic_steps":
            lo = self.step.coeffs.index_lo
            if self.step.below_lo is not None:
                # Constant coefficients below the window: the sup is the
                # deepest value of the weight, i.e. its value at 0+.
                return float(self.step.below_lo) * float(self.step.weight(1e-300))
            return self.step.coeff_at(lo) * math.exp(
                self.step.weight.log_g_pow2(lo))
        if self.kind == "sorted_hybrid":
            if len(self.head_values):
                return float(self.head_values[0])
            k = self.k_star
            return self.coeffs.at(k) * math.exp(self.weight.log_g_pow2(k))
        a0 = self.runs[0][0]
        return self.scale * math.exp(self.weight.log_g_pow2(a0))

    # -- integrals -----------------------------------------------------------

    def integral(self, t, rtol=1e-9):
        """The integral of mu over (0, t]."""
        if t < 0.0:
            raise DomainError(f"integral endpoint must be >= 0, got {t}")
        if t == 0.0:
            return 0.0
        if self.kind == "steps":
            edges = self.edges
            full = np.minimum(edges[1:], t)
            lengths = np.clip(full - edges[:-1], 0.0, None)
            total = float(np.dot(lengths, self.values))
            if self.tail is not None and t > edges[-1]:
                gw, scale = self.tail
                total += scale * (gw.primitive(t) - gw.primitive(float(edges[-1])))
            return total
        if self.kind == "closed_form":
            if self.antiderivative is not None:
                return float(self.antiderivative(t))
            val, err = integrate.quad(self.fn, 0.0, t, epsrel=rtol, limit=200)
            if err > rtol * abs(val) + 1e-300:
                raise NumericError(
                    f"quadrature achieved only {err:.3e} absolute error "
                    f"on the integral up to t={t}")
            return float(val)
        if self.kind == "dyadic_steps":
            n_hi = int(math.floor(math.log2(t)))
            if 2.0 ** (n_hi + 1) <= t:
                n_hi += 1
            elif 2.0 ** n_hi > t:
                n_hi -= 1
            total = self._dyadic_prefix_integral(n_hi)
            frac = t - 2.0 ** n_hi
            if frac > 0.0:
                total += frac * self.step.coeff_at(n_hi) * math.exp(
                    self.step.weight.log_g_pow2(n_hi))
            return total
        if self.kind == "sorted_hybrid":
            if self.k_star > SORT_MAX_EXPONENT:
                raise NumericError("integral of a hybrid rearrangement this "
                                   "deep exceeds float range; use its block "
                                   "averages")
            head_full = np.minimum(self.head_edges[1:], t)
            head_len = np.clip(head_full - self.head_edges[:-1], 0.0, None)
            total = float(np.dot(head_len, self.head_values)) if len(
                self.head_values) else 0.0
            if t > self.t0:
                u = t + float(self.shift)
                g1 = self.weight
                for s, e, v in self.coeffs.segments(self.coeffs.index_lo,
                                                    self.coeffs.index_hi):
                    if v == 0.0:
                        continue
                    t_lo = max(2.0 ** s, 2.0 ** self.k_star)
                    t_hi = min(2.0 ** e, u)
                    if t_hi <= t_lo:
                        continue
                    # Exact within a segment: the weighted block sums plus
                    # partial blocks at both ends.
                    n_a = int(math.floor(math.log2(t_lo)))
                    n_b = int(math.floor(math.log2(t_hi)))
                    acc = 0.0
                    for n in range(n_a, n_b + 1):
                        lo_t = max(2.0 ** n, t_lo)
                        hi_t = min(2.0 ** (n + 1), t_hi)
                        if hi_t > lo_t:
                            acc += (hi_t - lo_t) * math.exp(g1.log_g_pow2(n))
                    total += v * acc
            return total
        raise NumericError("integrals of a packed rearrangement are not "
                           "supported; use its block averages")

    def _dyadic_prefix_integral(self, n_hi):
        """Integral of a dyadic_steps function over (0, 2**n_hi]."""
        x = self.step.coeffs
        g = self.step.weight
        total = 0.0
        lo = x.index_lo
        if self.step.below_lo is not None and lo > -1074:
            c = float(self.step.below_lo)
            if c != 0.0:
                # Sum of w_m below the window; terms decay geometrically,
                # so 120 terms put the truncation below 2**-60 relative.
                m = np.arange(min(lo, n_hi + 1) - 120, min(lo, n_hi + 1))
                total += c * float(np.sum(np.exp(g.log_w(m))))
        if n_hi >= lo and x.kind == "runlength":
            for s, e, v in x.segments(lo, min(n_hi, x.index_hi + 1) - 1):
                if v != 0.0:
                    total += v * g.w_partial(s, e)
        elif n_hi >= lo:
            hi = min(n_hi - 1, x.index_hi)
            if hi - lo + 1 > MATERIALIZE_MAX:
                raise NumericError("prefix integral window too large to "
                                   "materialize")
            for n in range(lo, hi + 1):
                total += self.step.block_integral(n)
        return total

    # -- level sets ----------------------------------------------------------

    def level_index(self, a):
        """d(a) = inf of the set where mu(t) <= a (0 if mu(0+) <= a)."""
        if a <= 0.0:
            raise DomainError(f"level must be positive, got a={a}")
        if self.sup_value() <= a:
            return 0.0
        if self.kind == "steps":
            below = np.nonzero(self.values <= a)[0]
            if below.size:
                return float(self.edges[below[0]])
            if self.tail is None:
                return float(self.edges[-1])
            gw, scale = self.tail
            t_lo = float(self.edges[-1])
            t_hi = max(2.0 * t_lo, 2.0)
            for _ in range(2200):
                if scale * gw(t_hi) <= a:
                    break
                t_hi *= 2.0
            else:
                raise NumericError("the level set never drops below the "
                                   "threshold within float range")
            for _ in range(200):
                mid = 0.5 * (t_lo + t_hi)
                if scale * gw(mid) <= a:
                    t_hi = mid
                else:
                    t_lo = mid
            return t_hi
        if self.kind == "closed_form":
            t_lo, t_hi = 1e-12, 2.0
            for _ in range(2200):
                if self.fn(t_hi) <= a:
                    break
                t_hi *= 2.0
            else:
                raise NumericError("the level set never drops below the "
                                   "threshold within float range")
            for _ in range(200):
                mid = 0.5 * (t_lo + t_hi)
                if self.fn(mid) <= a:
                    t_hi = mid
                else:
                    t_lo = mid
            return t_hi
        if self.kind == "dyadic_steps":
            x = self.step.coeffs
            g = self.step.weight
            for n in range(x.index_lo, x.index_hi + 1):
                if x.at(n) * math.exp(g.log_g_pow2(n)) <= a:
                    if n - 1 > SORT_MAX_EXPONENT:
                        raise NumericError("level index exceeds float range")
                    return 2.0 ** n if n > x.index_lo else 0.0
            if x.index_hi + 1 > SORT_MAX_EXPONENT:
                raise NumericError("level index exceeds float range")
            return 2.0 ** (x.index_hi + 1)
        raise NumericError("level sets of this representation are not "
                           "supported; convert to breakpoints first")


def mu_from_breakpoints(edges, values, tail=None):
    """Public alias for :meth:`MuFunction.from_breakpoints`."""
    return MuFunction.from_breakpoints(edges, values, tail=tail)


def mu_from_weight(g, scale=1.0):
    """Public alias for :meth:`MuFunction.from_weight`."""
    return MuFunction.from_weight(g, scale)


# ---------------------------------------------------------------------------
# rearrangement
# ---------------------------------------------------------------------------

def _log_value(step, n):
    c = step.coeff_at(n)
    if c < 0:
        raise DomainError("rearrangement needs nonnegative values; take "
                          "absolute values first")
    if c == 0.0:
        return -math.inf
    return math.log(c) + step.weight.log_g_pow2(n)


def _runlength_coeffs(x):
    """View any small sequence as run-length blocks."""
    if x.kind == "runlength":
        return x
    if x.index_hi - x.index_lo + 1 > SORT_MAX_BLOCKS:
        raise NumericError(
            f"rearrangement of an unstructured sequence is limited to "
            f"{SORT_MAX_BLOCKS} indices")
    blocks = []
    for n in range(x.index_lo, x.index_hi + 1):
        v = x.at(n)
        if v != 0.0:
            blocks.append((n, 1, v))
    return DyadicSequence.from_blocks(blocks, x.index_lo, x.index_hi, x.side)


def _transition_ok(weight, seg0, seg1):
    """Is the synthesis value nonincreasing across two adjacent segments?

    Within a constant-coefficient segment the values x_n g(2**n) inherit the
    weight's monotonicity, so only the boundaries need checking.  A drop to
    zero is always fine; a rise out of zero never is.
    """
    s0, e0, v0 = seg0
    s1, e1, v1 = seg1
    if v1 == 0.0:
        return True
    if v0 == 0.0:
        return False
    left = math.log(v0) + weight.log_g_pow2(e0 - 1)
    right = math.log(v1) + weight.log_g_pow2(s1)
    return right <= left + MONOTONE_SLACK


def _first_nonincreasing_segment(segs, weight):
    """Index of the leftmost segment whose suffix is nonincreasing."""
    first_ok = len(segs) - 1
    for i in range(len(segs) - 2, -1, -1):
        if _transition_ok(weight, segs[i], segs[i + 1]):
            first_ok = i
        else:
            break
    return first_ok


def rearrange(f):
    """The nonincreasing rearrangement of a step synthesis, as a MuFunction.

    The representation is chosen for exactness: a synthesis whose values are
    already nonincreasing is returned as-is; 0/1 coefficients become packed
    runs handled in log2 coordinates; a general nonnegative sequence on the
    nonnegative scales becomes a sorted dense head plus a uniformly shifted
    dyadic tail; small remaining cases are sorted into explicit breakpoints.
    """
    x = f.coeffs
    g = f.weight
    # Negative values are rejected everywhere.
    if x.kind == "dense":
        if np.any(x._data < 0):
            raise DomainError("rearrangement needs nonnegative values; take "
                              "absolute values first")
    elif x.kind == "runlength":
        if any(v < 0 for _, _, v in x._blocks):
            raise DomainError("rearrangement needs nonnegative values; take "
                              "absolute values first")

    # Identity path: two-sided constant-extended synthesis, values already
    # nonincreasing at every scale.
    if f.below_lo is not None and x.side == Z_TWO_SIDED:
        if x.formula_id in ("chi", "const") and float(f.below_lo) >= 0:
            return MuFunction("dyadic_steps", step=f)

    if x.kind == "formula":
        x = _runlength_coeffs(x.restrict(x.index_lo, x.index_hi)
                              if x.index_hi - x.index_lo + 1 <= SORT_MAX_BLOCKS
                              else x)
        if x.kind == "formula":
            raise NumericError("rearrangement of a wide formula sequence "
                               "needs run-length coefficients")

    if x.kind == "dense":
        x = _runlength_coeffs(x)

    segs = [seg for seg in x.segments(x.index_lo, x.index_hi)]
    pos_vals = sorted({v for _, _, v in segs if v != 0.0})
    if not pos_vals:
        return MuFunction.from_breakpoints([0.0, 1.0], [0.0])

    # Already nonincreasing on a two-sided window with constant extension.
    if (f.below_lo is not None and
            _first_nonincreasing_segment(segs, g) == 0 and
            float(f.below_lo) * math.exp(g.log_g_pow2(x.index_lo - 1)) + 0.0
            >= math.exp(_log_value(f, x.index_lo)) * (1.0 - MONOTONE_SLACK)):
        return MuFunction("dyadic_steps", step=f)

    # Packed runs: a single positive coefficient value.
    if len(pos_vals) == 1 and x.side != Z_MINUS and x.index_lo >= 0 and \
            f.below_lo in (None, 0.0):
        c = pos_vals[0]
        runs = [(s, e) for s, e, v in segs if v != 0.0]
        merged = []
        for a, b in runs:
            if merged and merged[-1][1] == a:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        log2_s = _packed_shifts_log2(merged)
        return MuFunction("packed_runs", runs=merged, weight=g,
                          scale=float(c), log2_s=log2_s)

    if x.side == Z_MINUS or x.index_lo < 0 or f.below_lo not in (None, 0.0):
        return _sort_rearrange(f, segs)

    # Sorted hybrid: find the smallest exponent k* from which the values are
    # nonincreasing and dominated by everything sorted into the head.
    candidate_idx = _first_nonincreasing_segment(segs, g)
    while candidate_idx < len(segs):
        s_k = segs[candidate_idx][0]
        n_head = sum(e - s for s, e, v in segs[:candidate_idx] if v != 0.0)
        if n_head > SORT_MAX_BLOCKS:
            raise NumericError("the unsorted head of this rearrangement "
                               f"exceeds {SORT_MAX_BLOCKS} scales")
        head_idx = [n for s, e, v in segs[:candidate_idx] if v != 0.0
                    for n in range(s, e)]
        tail_first = None
        for i in range(candidate_idx, len(segs)):
            if segs[i][2] != 0.0:
                tail_first = segs[i]
                break
        if tail_first is None:
            return _sort_rearrange(f, segs)
        if head_idx:
            min_head = min(_log_value(f, n) for n in head_idx)
            tail_top = math.log(tail_first[2]) + g.log_g_pow2(tail_first[0])
            if tail_top > min_head + MONOTONE_SLACK:
                candidate_idx += 1
                continue
        break
    else:
        return _sort_rearrange(f, segs)

    k_star = segs[candidate_idx][0]
    if head_idx and k_star > SORT_MAX_EXPONENT:
        raise NumericError("a sorted head above scale 2**900 cannot be "
                           "represented; rearrange smaller pieces")
    if head_idx:
        decorated = sorted(
            ((-(math.exp(_log_value(f, n))), n) for n in head_idx))
        head_values = [-(val) for val, _ in decorated]
        head_lengths = [2 ** n for _, n in decorated]
        t0 = sum(head_lengths)
        head_edges = np.concatenate(([0.0], np.cumsum(
            np.asarray(head_lengths, dtype=float))))
        head_values = np.asarray(head_values, dtype=float)
    else:
        t0 = 0
        head_edges = np.asarray([0.0])
        head_values = np.asarray([], dtype=float)
    shift = (1 << k_star) - t0 if k_star >= 0 else None
    if shift is None or shift < 0:
        return _sort_rearrange(f, segs)
    tail_blocks = [(max(s, k_star), e - max(s, k_star), v)
                   for s, e, v in segs if e > k_star and v != 0.0]
    tail = DyadicSequence.from_blocks(tail_blocks, k_star, x.index_hi, Z_PLUS)
    return MuFunction("sorted_hybrid", head_edges=head_edges,
                      head_values=head_values, coeffs=tail, weight=g,
                      k_star=k_star, shift=shift, t0=float(t0))


def _sort_rearrange(f, segs):
    """Sort-based rearrangement into explicit breakpoints (dense guard)."""
    x = f.coeffs
    g = f.weight
    n_blocks = sum(1 for _, _, v in segs if v != 0.0)
    pieces = []
    for s, e, v in segs:
        if v == 0.0:
            continue
        if e - s > SORT_MAX_BLOCKS:
            raise NumericError("sort-based rearrangement needs at most "
                               f"{SORT_MAX_BLOCKS} dyadic blocks per value")
        for n in range(s, e):
            pieces.append((v * math.exp(g.log_g_pow2(n)), n))
    if len(pieces) > SORT_MAX_BLOCKS:
        raise NumericError("sort-based rearrangement is limited to "
                           f"{SORT_MAX_BLOCKS} dyadic blocks")
    if x.index_hi > SORT_MAX_EXPONENT or x.index_lo < -1060:
        raise NumericError("sort-based rearrangement needs scales between "
                           f"2**-1060 and 2**{SORT_MAX_EXPONENT}")
    pieces.sort(key=lambda p: (-p[0], p[1]))
    edges = [0.0]
    values = []
    for val, n in pieces:
        length = 2.0 ** n
        if values and val == values[-1]:
            edges[-1] += length
            continue
        values.append(val)
        edges.append(edges[-1] + length)
    return MuFunction.from_breakpoints(edges, values)


# ---------------------------------------------------------------------------
# block averages Phi_g
# ---------------------------------------------------------------------------

def _phi_window_default(mu):
    if mu.kind == "dyadic_steps":
        x = mu.step.coeffs
        return (x.index_lo, x.index_hi)
    if mu.kind == "packed_runs":
        return (0, mu.runs[-1][1] + 2)
    if mu.kind == "sorted_hybrid":
        return (0, mu.coeffs.index_hi)
    if mu.kind == "steps":
        t_end = float(mu.edges[-1])
        hi = max(1, int(math.ceil(math.log2(max(t_end, 2.0)))))
        return (0, hi if mu.tail is None else hi + 16)
    raise DomainError("a closed-form mu needs an explicit window for its "
                      "block averages")


def phi_g(mu, g, window=None, rtol=1e-9):
    """The averaged coefficients (Phi_g mu)_n over the index window.

    Each entry is the mean of mu over [2**n, 2**(n+1)) against the weight
    normalization w_n = 2**n g(2**n).  The representation of the result
    matches the input's structure so that later averaging stays exact.
    """
    if window is None:
        window = _phi_window_default(mu)
    a, b = int(window[0]), int(window[1])
    if a > b:
        raise DomainError(f"empty window [{a}, {b}]")

    if mu.kind == "dyadic_steps":
        return _phi_dyadic_steps(mu, g, a, b)
    if mu.kind == "packed_runs":
        return _phi_packed(mu, g, a, b)
    if mu.kind == "sorted_hybrid":
        return _phi_hybrid(mu, g, a, b)

    if mu.kind == "closed_form" and mu.base_weight is not None:
        # Weight-backed densities have exact primitives in the log domain,
        # so the block averages reach any depth without forming 2**n.
        if b - a + 1 > MATERIALIZE_MAX:
            raise NumericError("the block-average window is too large to "
                               "materialize for this representation")
        g1 = mu.base_weight
        ns = np.arange(a, b + 1)
        log_hi = np.asarray(g1.log_primitive_pow2(ns + 1.0), dtype=float)
        log_lo = np.asarray(g1.log_primitive_pow2(ns.astype(float)),
                            dtype=float)
        delta = -np.expm1(log_lo - log_hi)
        log_wn = np.asarray(g.log_w(ns), dtype=float)
        vals = mu.scale * np.exp(log_hi - log_wn) * delta
        if not np.all(np.isfinite(vals)):
            raise NumericError("block averages left float range on this "
                               "window; the weight normalization underflows")
        return DyadicSequence.from_values(vals, a,
                                          Z_PLUS if a >= 0 else Z_TWO_SIDED)

    # Generic path through integrals (explicit steps or closed forms).
    if b - a + 1 > MATERIALIZE_MAX:
        raise NumericError("the block-average window is too large to "
                           "materialize for this representation")
    if b > 1020:
        raise NumericError("block averages of this representation need "
                           "scales within float range (index <= 1020)")
    out = np.empty(b - a + 1)
    prev = mu.integral(2.0 ** a, rtol=rtol)
    for i, n in enumerate(range(a, b + 1)):
        nxt = mu.integral(2.0 ** (n + 1), rtol=rtol)
        out[i] = (nxt - prev) * math.exp(-g.log_w(n))
        prev = nxt
    return DyadicSequence.from_values(out, a, Z_PLUS if a >= 0 else Z_TWO_SIDED)


def _phi_dyadic_steps(mu, g, a, b):
    step = mu.step
    x = step.coeffs
    g1 = step.weight
    same = g1 is g or g1.name == g.name
    side = x.side if a < 0 else Z_PLUS

    if same:
        if x.kind == "runlength":
            blocks = []
            for s, e, v in x.segments(max(a, x.index_lo),
                                      min(b, x.index_hi)):
                if v != 0.0:
                    blocks.append((s, e - s, v))
            if step.below_lo not in (None, 0.0) and a < x.index_lo:
                blocks.insert(0, (a, x.index_lo - a, float(step.below_lo)))
            return DyadicSequence.from_blocks(blocks, a, b, side)
        fn = step.coeff_at
        hints = None
        return DyadicSequence.from_formula(
            lambda n: float(fn(n)), a, b, side, probe_hints=hints)

    def phi_at(n, _fn=step.coeff_at, _g1=g1, _g2=g):
        c = _fn(n)
        if c == 0.0:
            return 0.0
        return c * math.exp(_g1.log_w(n) - _g2.log_w(n))

    hints = None
    if x.kind == "runlength":
        hints = sorted({h for s, e, _ in x._blocks for h in (s, e - 1, e)})
    return DyadicSequence.from_formula(phi_at, a, b, side, probe_hints=hints)


def _phi_packed(mu, g, a, b):
    """Block averages of a packed 0/1 rearrangement, as run-length blocks.

    Deep inside a run the average equals the scale exactly (the dropped
    correction is below 2**-70); far before the next run it is exactly 0 for
    weights that decay, with the crossover located by bisection on the
    weight's log values.
    """
    if a < 0:
        raise DomainError("packed rearrangements live on nonnegative scales")
    g1 = mu.weight
    same = g1 is g or g1.name == g.name

    def phi_raw(k):
        val = _packed_phi_at(mu.runs, mu.log2_s, g1, k)
        if not same:
            val *= math.exp(_log_weight_ratio(g1, g, k))
        return mu.scale * val

    cut = PACKED_MARGIN * LN2
    blocks = []
    explicit = set()

    def add_explicit(lo, hi):
        lo, hi = max(lo, a), min(hi, b)
        if hi - lo >= SORT_MAX_BLOCKS:
            raise NumericError("this weight varies too slowly for a packed "
                               "rearrangement at this depth")
        for k in range(lo, hi + 1):
            explicit.add(k)

    def add_rise(target, lo, hi):
        """Explicit values on [lo, hi] where g(2**target)/g(2**k) is not yet
        negligible; below the crossover the average is 0 to float precision."""
        lo, hi = max(lo, a), min(hi, b)
        if lo > hi:
            return
        if g1.log_g_rel(target, lo) >= -cut:
            add_explicit(lo, hi)
            return
        k_lo, k_hi = lo, hi
        while k_lo < k_hi:
            mid = (k_lo + k_hi + 1) // 2
            if g1.log_g_rel(target, mid) < -cut:
                k_lo = mid
            else:
                k_hi = mid - 1
        add_explicit(k_lo + 1, hi)

    # Before the first run the block sits under the first value.
    a0 = mu.runs[0][0]
    if a < a0:
        add_rise(a0, a, a0 - 1)
    for j, (ra, rb) in enumerate(mu.runs):
        if ra > b:
            break
        add_explicit(ra, min(ra + PACKED_MARGIN, rb - 1))
        # Deep interior: the correction is below float resolution, so the
        # plateau equals the scale exactly.
        plat_lo = max(ra + PACKED_MARGIN + 1, a)
        plat_hi = min(rb - 1, b)
        if plat_lo <= plat_hi:
            if same:
                blocks.append((plat_lo, plat_hi - plat_lo + 1, mu.scale))
            else:
                add_explicit(plat_lo, plat_hi)
        if j + 1 < len(mu.runs):
            add_rise(mu.runs[j + 1][0], rb, mu.runs[j + 1][0] - 1)
        else:
            add_explicit(rb, rb + 1)
    for k in sorted(explicit):
        v = phi_raw(k)
        if v != 0.0:
            blocks.append((k, 1, v))
    blocks.sort()
    merged = []
    for s, l, v in blocks:
        if merged and merged[-1][2] == v and merged[-1][0] + merged[-1][1] == s:
            ps, pl, pv = merged.pop()
            merged.append((ps, pl + l, pv))
        else:
            merged.append((s, l, v))
    return DyadicSequence.from_blocks(merged, a, b, Z_PLUS)


def _phi_hybrid(mu, g, a, b):
    """Block averages of a sorted head plus uniformly shifted dyadic tail."""
    if a < 0:
        raise DomainError("hybrid rearrangements live on nonnegative scales")
    g1 = mu.weight
    x = mu.coeffs
    k_star = mu.k_star
    shift = mu.shift
    log2_shift = math.log2(shift) if shift > 0 else -math.inf

    def coeff(n):
        if n < k_star or n > x.index_hi:
            return 0.0
        return x.at(n)

    def phi_at(n):
        if n >= k_star:
            # mu = v_m on [2**m - shift, 2**(m+1) - shift); the block at n
            # sees v_n on its first 2**n - shift points and v_(n+1) after.
            frac = 0.0
            if n < 2048 and log2_shift - n > -1060:
                frac = 2.0 ** (log2_shift - n)
            c0, c1 = coeff(n), coeff(n + 1)
            cross = _log_weight_ratio(g1, g, n)
            val = 0.0
            if c0 != 0.0:
                val += c0 * math.exp(cross) * (1.0 - frac)
            if c1 != 0.0:
                val += c1 * math.exp(g1.log_g_rel(n + 1, n) + cross) * frac
            return val
        # Below k* the function is the sorted head on [0, t0) followed by
        # the leading tail value, which runs from t0 out to 2**k* + t0 and
        # so covers every such block from t0 on.
        if mu.t0 == 0.0 or 2.0 ** n >= mu.t0:
            c = coeff(k_star)
            if c == 0.0:
                return 0.0
            return c * math.exp(_log_weight_ratio(g1, g, n)
                                - g1.log_g_rel(n, k_star))
        t_lo, t_hi = 2.0 ** n, 2.0 ** (n + 1)
        full = np.minimum(mu.head_edges[1:], t_hi)
        start = np.maximum(mu.head_edges[:-1], t_lo)
        lengths = np.clip(full - start, 0.0, None)
        total = float(np.dot(lengths, mu.head_values)) if len(
            mu.head_values) else 0.0
        if t_hi > mu.t0:
            c = coeff(k_star)
            total += c * math.exp(g1.log_g_pow2(k_star)) * (t_hi - mu.t0)
        return total * math.exp(-g.log_w(n))

    hints = sorted({h for s, e, _ in x._blocks
                    for h in (s - 1, s, e - 1, e)} | {k_star - 1, k_star})
    return DyadicSequence.from_formula(phi_at, a, b, Z_PLUS,
                                       probe_hints=[h for h in hints
                                                    if a <= h <= b])


# ---------------------------------------------------------------------------
# averaging operators on sequences
# ---------------------------------------------------------------------------

def _require_zplus(x, opname):
    if x.index_lo < 0:
        raise DomainError(f"{opname} anchors its sums at index 0; restrict "
                          f"the sequence to nonnegative indices first")


def cesaro_g(x, g, window=None):
    """The weighted averaging operator (C_g x)_n = sum(w x)/W over m <= n.

    For run-length sequences the partial weight sums come from the weight's
    closed forms, so windows reaching astronomically deep indices are exact;
    the result is a formula-backed sequence whose probe hints mark the
    segment boundaries, between which C_g x moves monotonically toward the
    segment's value.
    """
    _require_zplus(x, "cesaro_g")
    a, b = window if window is not None else (0, x.index_hi)
    if a < 0 or a > b:
        raise DomainError(f"invalid output window [{a}, {b}]")
    if b > x.index_hi:
        raise DomainError(f"window [{a}, {b}] exceeds the sequence domain "
                          f"[{x.index_lo}, {x.index_hi}]")

    if x.kind != "runlength":
        if b + 1 > DENSE_CESARO_MAX:
            raise NumericError(
                f"dense averaging is limited to {DENSE_CESARO_MAX} indices; "
                "use run-length data for deeper windows")
        vals = x.to_dense(0, b)
        out = _cesaro_dense(vals, g)
        return DyadicSequence.from_values(out[a:], a, Z_PLUS)

    segs = x.segments(0, b)
    # Exact prefix state at each segment start: C value and log W.
    seg_starts = []
    seg_values = []
    c_pre = []       # C_(s-1) entering the segment
    logw_pre = []    # log W(s-1) entering the segment
    c_run = 0.0
    logw_run = -math.inf
    for s, e, v in segs:
        seg_starts.append(s)
        seg_values.append(v)
        c_pre.append(c_run)
        logw_pre.append(logw_run)
        logw_end = g.log_W(e - 1)
        if logw_run == -math.inf:
            c_run = v
        else:
            c_run = v + (c_run - v) * math.exp(logw_run - logw_end)
        logw_run = logw_end

    def c_at(n):
        i = bisect.bisect_right(seg_starts, n) - 1
        v = seg_values[i]
        if logw_pre[i] == -math.inf:
            base = v
            return base
        return v + (c_pre[i] - v) * math.exp(logw_pre[i] - g.log_W(n))

    hints = sorted({h for s in seg_starts for h in (s - 1, s)} |
                   {b} | {s - 1 for s in seg_starts[1:]})
    return DyadicSequence.from_formula(
        c_at, a, b, Z_PLUS, probe_hints=[h for h in hints if a <= h <= b])


def _cesaro_dense(vals, g):
    n = vals.size
    logw = np.asarray(g.log_w(np.arange(n)), dtype=float)
    spread = float(np.max(logw) - np.min(logw)) if n else 0.0
    if spread < 600.0:
        w = np.exp(logw - np.max(logw))
        big_w = np.cumsum(w)
        big_s = np.cumsum(w * vals)
        return big_s / big_w
    out = np.empty(n)
    run = 0.0
    logw_run = -math.inf
    for i in range(n):
        logw_run = np.logaddexp(logw_run, logw[i])
        r = math.exp(logw[i] - logw_run)
        run += r * (vals[i] - run)
        out[i] = run
    return out


def log_mean(x, window=None):
    """The logarithmic mean (M x)_n; exact over run-length segments.

    The harmonic partial sums come from the digamma function, so the mean is
    a two-term formula on each constant segment even at depth 4**12.
    """
    _require_zplus(x, "log_mean")
    a, b = window if window is not None else (0, x.index_hi)
    if a < 0 or a > b or b > x.index_hi:
        raise DomainError(f"invalid output window [{a}, {b}]")
    from .weights import harmonic_number

    if x.kind != "runlength":
        if b + 1 > MATERIALIZE_MAX:
            raise NumericError("dense logarithmic means are limited to "
                               f"{MATERIALIZE_MAX} indices")
        vals = x.to_dense(0, b)
        k = np.arange(1, b + 1, dtype=float)
        prefix = np.concatenate(([0.0], np.cumsum(vals[1:] / k)))
        out = np.empty(b + 1)
        out[0] = vals[0]
        if b >= 1:
            out[1:] = prefix[1:] / np.log(np.arange(2, b + 2, dtype=float))
        return DyadicSequence.from_values(out[a:], a, Z_PLUS)

    segs = x.segments(0, b)
    seg_starts = []
    seg_values = []
    pre_sum = []      # sum of x_k / k over 1 <= k < segment start
    run = 0.0
    for s, e, v in segs:
        seg_starts.append(s)
        seg_values.append(v)
        pre_sum.append(run)
        lo_k = max(s, 1)
        if v != 0.0 and e - 1 >= lo_k:
            run += v * (harmonic_number(e - 1) - harmonic_number(lo_k - 1))
    x0 = x.at(0) if x.index_lo <= 0 else 0.0

    def m_at(n):
        if n == 0:
            return x0
        i = bisect.bisect_right(seg_starts, n) - 1
        s, v = seg_starts[i], seg_values[i]
        total = pre_sum[i]
        lo_k = max(s, 1)
        if v != 0.0 and n >= lo_k:
            total += v * (harmonic_number(n) - harmonic_number(lo_k - 1))
        return total / math.log(n + 1.0)

    return DyadicSequence.from_formula(m_at, a, b, Z_PLUS)


def cesaro_inverse(x):
    """The exact left inverse of plain averaging: (n+1) x_n - n x_(n-1)."""
    _require_zplus(x, "cesaro_inverse")
    if x.index_lo != 0:
        raise DomainError("cesaro_inverse needs the full history from index "
                          f"0, got a window starting at {x.index_lo}")
    vals = x.to_dense(x.index_lo, x.index_hi)
    n = np.arange(x.index_lo, x.index_hi + 1, dtype=float)
    out = (n + 1.0) * vals
    out[1:] -= n[1:] * vals[:-1]
    return DyadicSequence.from_values(out, x.index_lo, Z_PLUS)


# ---------------------------------------------------------------------------
# norms and auxiliary maps
# ---------------------------------------------------------------------------

def n_map(x, g):
    """The weighted sample sequence n -> g(2**n) x_n.

    Multiplying by the weight samples sends the bounded sequences onto the
    weighted-tail cone without moving any entry; on nonincreasing data the
    sup of the ordering ratio (lg_norm) then recovers the sup norm exactly.
    """
    if x.kind == "runlength":
        segs = x.segments(x.index_lo, x.index_hi)
        starts = [s for s, _, _ in segs]

        def val(n, _starts=starts, _segs=segs):
            i = bisect.bisect_right(_starts, n) - 1
            v = _segs[i][2]
            if v == 0.0:
                return 0.0
            return v * math.exp(g.log_g_pow2(n))

        hints = sorted({h for s, e, _ in segs for h in (s, e - 1)})
        return DyadicSequence.from_formula(val, x.index_lo, x.index_hi,
                                           x.side, probe_hints=hints)
    if x.kind == "formula":
        fn = x._fn

        def val(n, _fn=fn):
            v = _fn(n)
            if v == 0.0:
                return 0.0
            return v * math.exp(g.log_g_pow2(n))

        return DyadicSequence.from_formula(val, x.index_lo, x.index_hi,
                                           x.side,
                                           probe_hints=x.probe_hints)
    vals = x.to_dense()
    n = np.arange(x.index_lo, x.index_hi + 1)
    scaled = vals * np.exp(np.asarray(g.log_g_pow2(n), dtype=float))
    return DyadicSequence.from_values(scaled, x.index_lo, x.side)


def lg_norm(x, g):
    """sup over n of o_n(x) / g(2**n) on the sequence's window.

    Within a constant segment of the ordering numbers the ratio is
    maximized at the right edge (the weight is nonincreasing), so the
    supremum over run-length data is exact from the segment edges.
    """
    o = ordering_numbers(x)
    if o.kind == "runlength":
        best = 0.0
        for s, e, v in o.segments(o.index_lo, o.index_hi):
            if v != 0.0:
                best = max(best, v * math.exp(-g.log_g_pow2(e - 1)))
        return best
    vals = o.to_dense()
    n = np.arange(o.index_lo, o.index_hi + 1)
    scaled = vals * np.exp(-np.asarray(g.log_g_pow2(n), dtype=float))
    return float(np.max(scaled)) if scaled.size else 0.0


def quasinorm_Lg(mu, g, t_grid=None):
    """sup over the grid of mu(t) / g(t) for a nonincreasing mu."""
    if t_grid is None:
        if mu.kind == "steps":
            t_end = float(mu.edges[-1])
            hi = int(math.ceil(math.log2(max(t_end, 2.0)))) + 1
            lo = int(math.floor(math.log2(max(float(
                mu.edges[1]), 2.0 ** -40))))
            t_grid = 2.0 ** np.arange(lo, hi + 1)
        else:
            t_grid = 2.0 ** np.arange(-20, 61)
    best = 0.0
    for t in np.asarray(t_grid, dtype=float):
        denom = g(t)
        if denom <= 0.0:
            raise DomainError("the weight must be positive on the grid")
        best = max(best, mu.value(t, side="left") / denom)
    return float(best)


def split_at_level(mu, a):
    """Split mu at value level a into (head, tail, d).

    d = d(a) is the first point where mu drops to a or below; the head is mu
    cut off at d (zero beyond), and the tail is the translate mu(. + d).
    """
    if a <= 0.0:
        raise DomainError(f"level must be positive, got a={a}")
    d = mu.level_index(a)
    if mu.kind == "steps":
        if d <= 0.0:
            head = MuFunction.from_breakpoints([0.0, 1.0], [0.0])
            return head, mu, 0.0
        edges = [float(e) for e in mu.edges]
        values = [float(v) for v in mu.values]
        head_edges = [e for e in edges if e < d] + [d]
        head_vals = values[:len(head_edges) - 1]
        head = MuFunction.from_breakpoints(head_edges, head_vals)
        if mu.tail is not None:
            # The weight continuation does not translate into breakpoint
            # form, so the tail stays a closed-form shift of mu.
            tail = MuFunction.from_callable(
                lambda t, _d=d, _mu=mu: _mu.value(t + _d))
            return head, tail, d
        tail_edges = [0.0] + [e - d for e in edges if e > d]
        tail_vals = values[len(values) - (len(tail_edges) - 1):]
        if len(tail_edges) < 2:
            tail_edges = [0.0, 1.0]
            tail_vals = [0.0]
        tail = MuFunction.from_breakpoints(tail_edges, tail_vals)
        return head, tail, d
    if mu.kind == "closed_form":
        fn = mu.fn
        head = MuFunction.from_callable(
            lambda t, _d=d: fn(t) if t < _d else 0.0)
        tail = MuFunction.from_callable(lambda t, _d=d: fn(t + _d))
        return head, tail, d
    raise NumericError("level splitting needs a breakpoint or closed form; "
                       "convert the representation first")


# ---------------------------------------------------------------------------
# transport and residuals
# ---------------------------------------------------------------------------

def transport_pushforward(mu_y, f, g, window=None):
    """Transport mu_y from the scale of f to the scale of g.

    The averaged coefficients of mu_y under f are resynthesized against g
    and rearranged: rearrange(D_g (Phi_f mu_y)).
    """
    coeffs = phi_g(mu_y, f, window=window)
    return rearrange(synth_D(coeffs, g))


def inv_residual_seq(x, g, window=None):
    """x minus the averaged coefficients of its own rearranged synthesis.

    This is the part of x invisible to rearrangement-invariant functionals
    built on g; for x that is already nonincreasing after synthesis the
    residual vanishes identically.
    """
    a, b = window if window is not None else x.window()
    mu = rearrange(synth_D(x, g))
    phi = phi_g(mu, g, window=(a, b))
    if x.kind == "runlength" and phi.kind == "runlength":
        edges = sorted({a, b + 1} |
                       {s for s, _, _ in x.segments(a, b)} |
                       {e for _, e, _ in x.segments(a, b)} |
                       {s for s, _, _ in phi.segments(a, b)} |
                       {e for _, e, _ in phi.segments(a, b)})
        blocks = []
        for lo, hi in zip(edges, edges[1:]):
            if lo > b:
                break
            v = x.at(lo) - phi.at(lo)
            if v != 0.0:
                blocks.append((lo, min(hi, b + 1) - lo, v))
        return DyadicSequence.from_blocks(blocks, a, b, x.side)
    vx = x.to_dense(a, b)
    vp = phi.to_dense(a, b)
    return DyadicSequence.from_values(vx - vp, a, x.side)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def mu_from_spec(spec, window=None):
    """Build a MuFunction from its JSON object form.

    Forms: ``{"kind": "dyadic-step", "weight": id, "coeffs": <sequence>}``
    (validated as already nonincreasing, or rearranged when the coefficients
    are flat 0/1 runs), ``{"kind": "breakpoints", "t": [...], "v": [...],
    "tail": "zero" | {"weight": id}}``, and the documented extension
    ``{"kind": "weight", "name": id, "scale": c}``.
    """
    from .seqcore import sequence_from_spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise DomainError("mu spec must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "dyadic-step":
        g = get_weight(spec.get("weight", "f_cor"))
        coeffs = sequence_from_spec(spec["coeffs"], window=window)
        return rearrange(synth_D(coeffs, g))
    if kind == "breakpoints":
        t = list(spec["t"])
        v = list(spec["v"])
        if t and t[0] != 0.0:
            t = [0.0] + t
        tail_spec = spec.get("tail", "zero")
        tail = None
        if tail_spec != "zero":
            if not isinstance(tail_spec, dict) or "weight" not in tail_spec:
                raise DomainError("tail must be 'zero' or {\"weight\": id}")
            tail = (get_weight(tail_spec["weight"]),
                    float(tail_spec.get("scale", 1.0)))
        return MuFunction.from_breakpoints(t, v, tail=tail)
    if kind == "weight":
        g = get_weight(spec["name"])
        return MuFunction.from_weight(g, float(spec.get("scale", 1.0)))
    raise DomainError(f"unknown mu kind {kind!r}")
