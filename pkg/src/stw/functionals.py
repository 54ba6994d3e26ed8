"""Singular-trace functionals on nonincreasing functions.

The central object is the window-averaged functional pipeline: a function mu
is reduced to its dyadic block averages (phi), those are run through the
weighted averaging operator, and the deep tail of the averaged sequence is
bracketed.  A state at infinity applied to that tail gives the functional's
value; the bracket reports exactly how much latitude the choice of the state
still has at the probed depth.

Two normalizations are exposed.  The windowed form evaluates to 1 on the
weight's own synthesis of the constant-one sequence, with no extra constant.
The classic form divides a plain partial sum by the weight's primitive and is
offered with three prefactor conventions, because both the bare ratio and the
log-2 corrected ratio appear in practice.
"""

import math

import numpy as np

from .errors import DomainError, NumericError
from .seqcore import (DyadicSequence, ValueEnvelope, Verdict,
                      _status_from_widths, almost_convergent,
                      banach_envelope, tail_envelope)
from .transforms import cesaro_g, phi_g, _phi_window_default

LN2 = math.log(2.0)

DEFAULT_TOL = 1e-2
DEFAULT_P_MAX = 8
MEASURE_DEPTH = 4096
MEASURE_P_CAP = 1024
CLASSIC_GRID_LO = 10
CLASSIC_GRID_HI = 20

_PREFACTORS = {"one": 1.0, "invlog2": 1.0 / LN2, "log2": LN2}


def _require_limit_scale(g, what):
    if g.summable:
        raise DomainError(
            f"{what} is degenerate for the summable weight {g.name}: its "
            "coefficient sums converge, every element of the ideal has a "
            "plain trace, and the functional collapses to a multiple of it; "
            "use a weight with divergent sums")


def _deep_half(a, b):
    return (b - max(1, (b - a) // 2), b)


def _averaged_tail(mu, g, phi_weight, window):
    """phi under phi_weight from index 0, averaged under g, plus the window.

    The block averages always start at index 0 because the averaging
    operator anchors its sums there; scales the function does not reach are
    filled with the synthesis extension (zero unless the representation
    carries a two-sided constant).  The probing window defaults to the
    deep half of the representation's own depth, wide enough to straddle a
    full oscillation cycle of block-structured data; an explicit window
    sets the depth instead.  Weight-backed closed forms default to a deep
    probe since their block averages are exact at any scale; other closed
    forms require the explicit window.
    """
    if window is None:
        if mu.kind == "closed_form" and mu.base_weight is not None:
            hi = MEASURE_DEPTH
        else:
            _, hi = _phi_window_default(mu)
        hi = max(int(hi), 8)
        window = _deep_half(0, hi)
    else:
        hi = max(int(window[1]), 8)
    phi = phi_g(mu, phi_weight, window=(0, hi))
    avg = cesaro_g(phi, g, window=(0, hi))
    return avg, window, (0, hi)


def dixmier_envelope(mu, g, window=None, p_max=None):
    """Bracket the windowed functional of mu under the weight g.

    The pipeline is block averages, then weighted averaging, then the tail
    envelope of the averaged sequence on the probing window (by default the
    deepest quarter of the available range).  Any translation-invariant
    state at infinity evaluates inside the bracket, so a narrow result pins
    the functional's value and a wide one certifies genuine ambiguity.

    ``p_max`` additionally records an invariant-mean bracket (which is never
    wider) in the envelope's meta under ``banach``.
    """
    _require_limit_scale(g, "the windowed functional")
    avg, window, phi_window = _averaged_tail(mu, g, g, window)
    env = tail_envelope(avg, window=window)
    env.meta["phi_window"] = list(phi_window)
    env.meta["weight"] = g.name
    if p_max is not None:
        env.meta["banach"] = banach_envelope(avg, int(p_max),
                                             window=window).to_dict()
    return env


def transported_envelope(mu_y, g, f, window=None, p_max=None):
    """Bracket the functional of mu_y transported from the f frame to g.

    The block averages are taken against the source weight f and the
    averaging runs with the target weight g; no rearrangement happens in
    between, so this evaluates the composite state directly on the
    transported element.
    """
    _require_limit_scale(g, "the transported functional")
    avg, window, phi_window = _averaged_tail(mu_y, g, f, window)
    env = tail_envelope(avg, window=window)
    env.meta["phi_window"] = list(phi_window)
    env.meta["source_weight"] = f.name
    env.meta["target_weight"] = g.name
    if p_max is not None:
        env.meta["banach"] = banach_envelope(avg, int(p_max),
                                             window=window).to_dict()
    return env


def _integer_values(mu, n_max):
    """mu evaluated at 1, 2, ..., n_max, vectorized per representation."""
    ks = np.arange(1, n_max + 1, dtype=float)
    if mu.kind == "closed_form":
        try:
            vals = np.asarray(mu.fn(ks), dtype=float)
            if vals.shape == ks.shape:
                return vals
        except (TypeError, ValueError):
            pass
        return np.array([mu.value(float(k)) for k in ks])
    if mu.kind == "steps":
        idx = np.searchsorted(mu.edges, ks, side="right") - 1
        vals = np.zeros_like(ks)
        inside = idx < len(mu.values)
        vals[inside] = np.asarray(mu.values)[idx[inside]]
        if mu.tail is not None:
            gw, scale = mu.tail
            beyond = ~inside
            if np.any(beyond):
                vals[beyond] = scale * gw(ks[beyond])
        return vals
    if mu.kind == "dyadic_steps":
        n = np.floor(np.log2(ks)).astype(int)
        # Guard edges against log2 rounding.
        n = np.where(2.0 ** (n + 1) <= ks, n + 1, n)
        n = np.where(2.0 ** n > ks, n - 1, n)
        vals = np.empty_like(ks)
        step = mu.step
        g1 = step.weight
        for exp in np.unique(n):
            sel = n == exp
            vals[sel] = step.coeff_at(int(exp)) * np.exp(
                g1.log_g_pow2(float(exp)))
        return vals
    return np.array([mu.value(float(k)) for k in ks])


def dixmier_classic(mu, g, prefactor_convention="one", N_grid=None):
    """The classic partial-sum ratio, bracketed across a depth grid.

    Each grid point evaluates prefactor * sum(mu(k), k <= N) / G(N), where G
    is the weight's primitive.  The mass of mu below 1 is added to the sum
    when finite so the ratio tracks the full integral.  The result is the
    bracket of the ratios with the nested-refinement status over the grid's
    deep half.

    prefactor_convention is one of "one", "invlog2", "log2"; conventions
    differing by a log-2 factor both appear in the literature because the
    dyadic and the natural-log scales are both in use.
    """
    _require_limit_scale(g, "the classic ratio")
    if prefactor_convention not in _PREFACTORS:
        raise DomainError("prefactor_convention must be one of "
                          f"{sorted(_PREFACTORS)}, got "
                          f"{prefactor_convention!r}")
    pref = _PREFACTORS[prefactor_convention]
    if N_grid is None:
        N_grid = [2 ** e for e in range(CLASSIC_GRID_LO, CLASSIC_GRID_HI + 1)]
    N_grid = sorted(int(n) for n in N_grid)
    if not N_grid or N_grid[0] < 1:
        raise DomainError("the depth grid needs positive integers")
    n_max = N_grid[-1]
    if n_max > 1 << 24:
        raise NumericError("the classic ratio materializes every integer "
                           "value of mu; keep the grid below 2**24")
    vals = _integer_values(mu, n_max)
    head = mu.sup_value()
    if not math.isfinite(head):
        head = 0.0
    sums = np.cumsum(vals)
    ratios = []
    for N in N_grid:
        G = float(g.primitive(float(N)))
        ratios.append(pref * (head + float(sums[N - 1])) / G)
    ratios = np.asarray(ratios)
    lo, hi = float(np.min(ratios)), float(np.max(ratios))
    deep = ratios[len(ratios) // 2:]
    w_full = hi - lo
    w_deep = float(np.max(deep) - np.min(deep))
    status = _status_from_widths(w_full, w_deep)
    span = max(1, N_grid[-1] - N_grid[len(N_grid) // 2])
    env = ValueEnvelope(lo=lo, hi=hi, window=(N_grid[0], N_grid[-1]),
                        trend=(w_deep - w_full) / span, status=status)
    env.meta["N_grid"] = list(N_grid)
    env.meta["ratios"] = [float(r) for r in ratios]
    env.meta["prefactor"] = prefactor_convention
    env.meta["deep_value"] = float(ratios[-1])
    return env


def measurability(mu, g, p_max=None, tol=None, window=None):
    """Decide whether the functional of mu is independent of the state.

    The block-average sequence is tested for almost convergence: yes means
    every invariant mean gives the same value (reported), no means the
    invariant-mean bracket provably stays wider than the tolerance, and
    inconclusive means the probed depth cannot separate the two.  The
    windowed functional's bracket and the classic ratio ride along as
    evidence.  ``window`` sets the probing depth for representations that
    have no depth of their own; weight-backed closed forms default to a
    deep probe since their block averages are exact at any scale.
    """
    _require_limit_scale(g, "measurability")
    if tol is None:
        tol = DEFAULT_TOL
    if window is None:
        if mu.kind == "closed_form" and mu.base_weight is not None:
            b = MEASURE_DEPTH
        else:
            _, b = _phi_window_default(mu)
    else:
        b = int(window[1])
    b = max(int(b), 8)
    if p_max is None:
        # Long averages are what wash out a transient head, so the default
        # averaging length grows with the probed depth.
        p_max = max(DEFAULT_P_MAX, min(MEASURE_P_CAP, b // 8))
    phi = phi_g(mu, g, window=(0, b))
    verdict = almost_convergent(phi, int(p_max), float(tol),
                                window=(0, b))
    evidence = {"almost_convergent": verdict.evidence,
                "weight": g.name, "p_max": int(p_max), "tol": float(tol)}
    probes = sorted({0, b // 2, b})
    evidence["phi_probes"] = {str(n): phi.at(n) for n in probes}
    try:
        env = dixmier_envelope(mu, g, window=_deep_half(0, b))
        evidence["windowed_envelope"] = env.to_dict()
    except (DomainError, NumericError) as exc:
        evidence["windowed_envelope_error"] = str(exc)
    try:
        classic = dixmier_classic(mu, g)
        evidence["classic_ratio"] = classic.meta["deep_value"]
        evidence["classic_ratio_per_log2"] = classic.meta["deep_value"] / LN2
    except (DomainError, NumericError) as exc:
        evidence["classic_error"] = str(exc)
    return Verdict(verdict.answer, verdict.value, evidence)


def support_split(x, a):
    """Split a sequence at index a: values above, values below, a dropped.

    Returns (above, below) on the same index window and side as x, with
    above carrying x on indices n > a, below carrying x on n < a, and the
    index a itself excluded from both.  Summing the two therefore recovers
    x except at a.
    """
    a = int(a)
    lo, hi = x.window()
    if x.kind == "runlength":
        up_blocks = []
        down_blocks = []
        for s, l, v in x._blocks:
            e = s + l
            if min(e, hi + 1) > a + 1:
                s2 = max(s, a + 1)
                up_blocks.append((s2, e - s2, v))
            if s < a:
                e2 = min(e, a)
                if e2 > s:
                    down_blocks.append((s, e2 - s, v))
        above = DyadicSequence.from_blocks(up_blocks, lo, hi, x.side)
        below = DyadicSequence.from_blocks(down_blocks, lo, hi, x.side)
        return above, below
    if x.kind == "dense":
        up = x.to_dense(lo, hi).copy()
        down = up.copy()
        cut = a - lo
        if 0 <= cut < len(up):
            up[:cut + 1] = 0.0
            down[cut:] = 0.0
        elif a < lo:
            down[:] = 0.0
        else:
            up[:] = 0.0
        return (DyadicSequence.from_values(up, lo, x.side),
                DyadicSequence.from_values(down, lo, x.side))
    fn = x._fn
    above = DyadicSequence.from_formula(
        lambda n, _f=fn, _a=a: _f(n) if n > _a else 0.0, lo, hi, x.side,
        probe_hints=x.probe_hints)
    below = DyadicSequence.from_formula(
        lambda n, _f=fn, _a=a: _f(n) if n < _a else 0.0, lo, hi, x.side,
        probe_hints=x.probe_hints)
    return above, below
