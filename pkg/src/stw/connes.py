"""Dyadic-shell bookkeeping for model operators and their symbols.

The objects here compare two descriptions of the same data: an operator's
eigenvalue list, grouped into shells where the frequency bracket
(1 + k**2)**(1/2) doubles, and the phase-space integral of its symbol over
the matching bracket shells.  When the per-shell residuals vanish under
window averaging, the operator-side functional can be read off the symbol
integral alone, which is the practical content of the shell comparison.

Every shell boundary is resolved in exact integer arithmetic (k belongs to
shell n when 4**n - 1 <= k**2 < 4**(n+1) - 1), so the deepest complete shell
is never off by one at the truncation edge.
"""

import math

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericError
from .seqcore import (DyadicSequence, ValueEnvelope, Verdict, Z_PLUS,
                      almost_convergent, invariance_residual)

LN2 = math.log(2.0)

DEFAULT_TOL = 5e-2
DEFAULT_P_MAX = 8
DIAG_GRID_LO = 2.0 ** 6
DIAG_GRID_HI = 2.0 ** 18
DIAG_GRID_SIZES = (33, 65)
STABLE_REL = 0.05


def bracket(x):
    """The frequency bracket (1 + x**2)**(1/2), elementwise."""
    return np.hypot(1.0, np.asarray(x, dtype=float))


def _shell_bounds(n):
    """Integer k with bracket(k) in [2**n, 2**(n+1)), as [k_lo, k_hi].

    Exact: k is in shell n iff 4**n - 1 <= k**2 < 4**(n+1) - 1.
    """
    lo2 = 4 ** n - 1
    hi2 = 4 ** (n + 1) - 1
    m = math.isqrt(lo2)
    k_lo = m if m * m == lo2 else m + 1
    k_hi = math.isqrt(hi2 - 1)
    return k_lo, k_hi


def _tabulated_factor(obj, name, lo=None, hi=None):
    """Validate a {"kind": "tabulated", "grid": [...], "values": [...]}."""
    grid = np.asarray(obj.get("grid", ()), dtype=float)
    vals = np.asarray(obj.get("values", ()), dtype=float)
    if grid.ndim != 1 or grid.shape != vals.shape or grid.size < 2:
        raise DomainError(f"a tabulated {name} factor needs matching 1-d "
                          "'grid' and 'values' with at least two points")
    if np.any(np.diff(grid) <= 0):
        raise DomainError(f"the {name} factor grid must be strictly "
                          "increasing")
    if lo is not None and (grid[0] < lo or grid[-1] > hi):
        raise DomainError(f"the {name} factor grid must stay within "
                          f"[{lo}, {hi}]")
    return grid, vals


class SymbolGrid:
    """A separable symbol p(x, xi) = a(x) b(|xi|) on [0, 1] x R.

    ``x_kind`` and ``xi_kind`` pick the factors.  The x factor is the
    indicator of (0, 1) ("indicator01") or a tabulated profile on a grid
    inside [0, 1].  The xi factor is the bracket inverse
    ("bracket-inverse", with exact asinh antiderivative), a callable of
    |xi|, or a tabulated profile of |xi| (integrated as its piecewise
    linear interpolant, zero beyond the grid).  ``xi_max`` optionally
    truncates the frequency support; a tabulated xi factor truncates at
    its last grid point automatically.
    """

    def __init__(self, x_kind="indicator01", xi_kind="bracket-inverse",
                 xi_max=None):
        if x_kind == "indicator01":
            self._x_grid = None
            self.x_kind = x_kind
        elif isinstance(x_kind, dict) and x_kind.get("kind") == "tabulated":
            self._x_grid, self._x_vals = _tabulated_factor(
                x_kind, "x", 0.0, 1.0)
            self.x_kind = dict(x_kind)
        else:
            raise DomainError(f"unknown x factor {x_kind!r}; pass "
                              "'indicator01' or a tabulated profile")
        self._xi_grid = None
        if xi_kind == "bracket-inverse":
            self._xi_fn = lambda xi: 1.0 / np.hypot(1.0, xi)
            self._exact = True
            self.xi_kind = xi_kind
        elif isinstance(xi_kind, dict) and xi_kind.get("kind") == "tabulated":
            self._xi_grid, self._xi_vals = _tabulated_factor(xi_kind, "xi")
            if self._xi_grid[0] < 0.0:
                raise DomainError("the xi factor is tabulated over |xi|, "
                                  "so its grid starts at 0 or above")
            self._xi_fn = lambda xi: np.interp(xi, self._xi_grid,
                                               self._xi_vals,
                                               left=0.0, right=0.0)
            self._exact = False
            self.xi_kind = dict(xi_kind)
            grid_end = float(self._xi_grid[-1])
            xi_max = grid_end if xi_max is None else min(float(xi_max),
                                                         grid_end)
        elif callable(xi_kind):
            self._xi_fn = xi_kind
            self._exact = False
            self.xi_kind = "callable"
        else:
            raise DomainError(f"unknown xi factor {xi_kind!r}; pass "
                              "'bracket-inverse', a tabulated profile, or "
                              "a callable of |xi|")
        self.xi_max = None if xi_max is None else float(xi_max)

    def eval(self, x, xi):
        """p(x, xi), elementwise over broadcast arrays."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self._x_grid is None:
            ax = ((x > 0.0) & (x < 1.0)).astype(float)
        else:
            ax = np.interp(x, self._x_grid, self._x_vals,
                           left=0.0, right=0.0)
        out = ax * self._xi_fn(np.abs(xi))
        return float(out) if np.ndim(out) == 0 else out

    def x_mass(self):
        """Integral of the x factor over [0, 1]."""
        if self._x_grid is None:
            return 1.0
        return float(np.trapezoid(self._x_vals, self._x_grid))

    def xi_integral(self, lo, hi, rtol=1e-9):
        """Integral of the xi factor over [lo, hi], one-sided (xi >= 0)."""
        lo, hi = float(lo), float(hi)
        if hi <= lo:
            return 0.0
        if self.xi_max is not None:
            hi = min(hi, self.xi_max)
            lo = min(lo, hi)
            if hi <= lo:
                return 0.0
        if self._exact:
            return math.asinh(hi) - math.asinh(lo)
        if self._xi_grid is not None:
            grid = self._xi_grid
            lo2, hi2 = max(lo, float(grid[0])), min(hi, float(grid[-1]))
            if hi2 <= lo2:
                return 0.0
            inner = grid[(grid > lo2) & (grid < hi2)]
            xs = np.concatenate(([lo2], inner, [hi2]))
            ys = np.interp(xs, grid, self._xi_vals)
            return float(np.trapezoid(ys, xs))
        val, err = quad(self._xi_fn, lo, hi, limit=200)
        if not math.isfinite(val) or err > rtol * max(abs(val), 1.0):
            raise NumericError("the xi factor integral did not reach the "
                               f"requested tolerance ({err:.2e} achieved)")
        return val

    def to_spec(self):
        return {"kind": "separable", "x": self.x_kind, "xi": self.xi_kind}

    @classmethod
    def from_spec(cls, obj):
        if not isinstance(obj, dict) or obj.get("kind") != "separable":
            raise DomainError("a symbol description must be an object with "
                              "kind 'separable'")
        return cls(obj.get("x", "indicator01"),
                   obj.get("xi", "bracket-inverse"),
                   xi_max=obj.get("xi_max"))


class ModelOperator:
    """A diagonal model operator with eigenvalues indexed by k in Z.

    ``eigenvalue_rule`` maps nonnegative k (vectorized) to the eigenvalue at
    both +k and -k, so k >= 1 counts twice in every sum and k = 0 once.
    ``k_max`` truncates the index range to |k| <= k_max.  ``symbol`` is the
    operator's phase-space symbol when one is attached.
    """

    def __init__(self, eigenvalue_rule, k_max, symbol=None):
        k_max = int(k_max)
        if k_max < 1:
            raise DomainError("k_max must be a positive integer")
        self.rule = eigenvalue_rule
        self.k_max = k_max
        self.symbol = symbol
        self._eigs = None

    @classmethod
    def bracket_power(cls, k_max, power=1.0, symbol=None):
        """Eigenvalues bracket(k)**-power, the canonical test model."""
        power = float(power)
        if symbol is None and power == 1.0:
            symbol = SymbolGrid()
        return cls(lambda k, _p=power: np.hypot(1.0, k) ** -_p, k_max,
                   symbol=symbol)

    def eigenvalues(self):
        """lambda_k for k = 0..k_max, computed once and cached."""
        if self._eigs is None:
            ks = np.arange(self.k_max + 1, dtype=float)
            eigs = np.asarray(self.rule(ks), dtype=float)
            if eigs.shape != ks.shape:
                raise DomainError("the eigenvalue rule must map an index "
                                  "array to an equal-shape value array")
            self._eigs = eigs
        return self._eigs

    def multiplicities(self):
        """How many indices in Z share each |k|: 1 at k = 0, else 2."""
        mult = np.full(self.k_max + 1, 2.0)
        mult[0] = 1.0
        return mult

    def max_complete_shell(self):
        """The deepest shell n fully inside the truncation |k| <= k_max."""
        n = 0
        while _shell_bounds(n + 1)[1] <= self.k_max:
            n += 1
        if _shell_bounds(n)[1] > self.k_max:
            raise DomainError("k_max is too small for even one complete "
                              "shell")
        return n

    def shell_sum(self, n):
        """Sum of |eigenvalues| over the indices of shell n."""
        k_lo, k_hi = _shell_bounds(n)
        if k_hi > self.k_max:
            raise DomainError(f"shell {n} is cut by the truncation "
                              f"k_max={self.k_max}")
        eigs = self.eigenvalues()
        mult = self.multiplicities()
        return float(math.fsum(
            (np.abs(eigs[k_lo:k_hi + 1]) * mult[k_lo:k_hi + 1]).tolist()))


def shell_integral(p, g, n, rtol=1e-9):
    """The symbol integral over bracket shell n, per unit coefficient.

    Integrates |p| over x in [0, 1] and bracket(xi) in [2**n, 2**(n+1))
    (both signs of xi), divided by the weight coefficient w_n.  Summed
    against w_n these tile the ball integral exactly, which is the
    additivity the shell comparison relies on.
    """
    n = int(n)
    if n < 0:
        raise DomainError("shells are indexed by n >= 0")
    xi_lo = 0.0 if n == 0 else math.sqrt(4.0 ** n - 1.0)
    xi_hi = math.sqrt(4.0 ** (n + 1) - 1.0)
    if p.xi_max is not None and xi_hi > p.xi_max:
        raise DomainError(f"shell {n} reaches |xi| = {xi_hi:.6g}, beyond "
                          f"the symbol truncation xi_max = {p.xi_max:.6g}")
    raw = 2.0 * p.x_mass() * p.xi_integral(xi_lo, xi_hi, rtol=rtol)
    return raw / g.w(n)


def _shell_sequence(op, g):
    """Per-shell operator sums normalized by the weight coefficients."""
    n_max = op.max_complete_shell()
    vals = np.array([op.shell_sum(n) / g.w(n) for n in range(n_max + 1)])
    return DyadicSequence.from_values(vals, 0, Z_PLUS), n_max


def trace_formula_check(op, g, window=None, p_max=None, tol=None):
    """Test whether shell sums and shell integrals agree under averaging.

    The residual r_n = shell_sum(n)/w_n - shell_integral(n) is formed for
    every complete shell and its window averages are maximized; the answer
    is yes when that invariant residual stays within the tolerance, so any
    averaging state gives the operator and the symbol the same functional.
    """
    if op.symbol is None:
        raise DomainError("the operator carries no symbol to compare "
                          "against")
    if tol is None:
        tol = DEFAULT_TOL
    shells, n_max = _shell_sequence(op, g)
    integrals = np.array([shell_integral(op.symbol, g, n)
                          for n in range(n_max + 1)])
    resid = shells.to_dense(0, n_max) - integrals
    r = DyadicSequence.from_values(resid, 0, Z_PLUS)
    if window is None:
        window = (0, n_max)
    p_used = min(int(p_max) if p_max is not None else DEFAULT_P_MAX,
                 n_max + 1)
    residual = invariance_residual(r, p_used, window=window)
    answer = "yes" if residual <= tol else "no"
    evidence = {
        "residual_sup": residual,
        "tol": float(tol),
        "p_used": p_used,
        "window": [int(window[0]), int(window[1])],
        "n_max": n_max,
        "mean_residual": float(np.mean(np.abs(resid))),
        "shell_sums": [float(v) for v in shells.to_dense(0, n_max)],
        "shell_integrals": [float(v) for v in integrals],
    }
    return Verdict(answer, residual, evidence)


def connes_measurability(op, g, p_max=None, tol=None):
    """Decide whether the operator's shell sequence is almost convergent.

    Runs the invariant-mean test on the deep half of the complete-shell
    range, where the truncation transient has died out; yes reports the
    common value of every invariant mean on the normalized shell sums.
    """
    if p_max is None:
        p_max = DEFAULT_P_MAX
    if tol is None:
        tol = DEFAULT_TOL
    shells, n_max = _shell_sequence(op, g)
    window = (n_max // 2, n_max)
    length = window[1] - window[0] + 1
    p_used = min(int(p_max), max(1, length // 2))
    verdict = almost_convergent(shells, p_used, float(tol), window=window)
    evidence = {"almost_convergent": verdict.evidence,
                "window": [window[0], window[1]],
                "p_used": p_used,
                "n_max": n_max,
                "shell_values": [float(v) for v in
                                 shells.to_dense(0, n_max)]}
    return Verdict(verdict.answer, verdict.value, evidence)


def diagonal_vs_symbol(op, g, t_grid=None):
    """Envelope of the diagonal-minus-symbol defect at scale t.

    D(t) = [sum of eigenvalues with bracket(k) <= t, minus the symbol
    integral over bracket(xi) <= t] / (t g(t)).  Evaluated on a coarse and
    a refined geometric grid; the envelope reports the refined values and
    the meta carries the sup of |D| per refinement so stability under
    refinement is visible.
    """
    if op.symbol is None:
        raise DomainError("the operator carries no symbol to compare "
                          "against")
    eigs = op.eigenvalues() * op.multiplicities()
    brackets = np.hypot(1.0, np.arange(op.k_max + 1, dtype=float))
    cum = np.cumsum(eigs)

    def defect(ts):
        out = np.empty(len(ts))
        for i, t in enumerate(ts):
            idx = int(np.searchsorted(brackets, t, side="right"))
            diag = float(cum[idx - 1]) if idx > 0 else 0.0
            xi_hi = math.sqrt(max(t * t - 1.0, 0.0))
            sym = 2.0 * op.symbol.x_mass() * op.symbol.xi_integral(0.0,
                                                                   xi_hi)
            out[i] = (diag - sym) / (t * float(g(t)))
        return out

    t_cap = float(brackets[-1])
    if t_grid is None:
        hi = min(DIAG_GRID_HI, t_cap)
        if hi <= DIAG_GRID_LO:
            raise DomainError(f"the truncation bracket {t_cap:.6g} leaves "
                              f"no room above the grid floor {DIAG_GRID_LO}")
        grids = [np.geomspace(DIAG_GRID_LO, hi, m) for m in DIAG_GRID_SIZES]
    else:
        ts = np.asarray(sorted(float(t) for t in t_grid))
        grids = [ts[::2], ts]
    for ts in grids:
        if ts[-1] > t_cap:
            raise DomainError(f"the grid reaches t={ts[-1]:.3g} beyond the "
                              f"truncation bracket {t_cap:.6g}")
    sups = []
    vals = None
    for ts in grids:
        vals = defect(ts)
        sups.append(float(np.max(np.abs(vals))))
    rel = abs(sups[-1] - sups[0]) / max(sups[0], 1e-12)
    if rel <= STABLE_REL:
        status = "converged"
    elif sups[-1] > sups[0] * (1.0 + STABLE_REL):
        status = "widening"
    else:
        status = "inconclusive"
    ts = grids[-1]
    env = ValueEnvelope(lo=float(np.min(vals)), hi=float(np.max(vals)),
                        window=(float(ts[0]), float(ts[-1])),
                        trend=(sups[-1] - sups[0]) / max(len(ts) - 1, 1),
                        status=status)
    env.meta["refinement_sup"] = sups
    env.meta["grid_sizes"] = [len(g_) for g_ in grids]
    env.meta["values"] = [float(v) for v in vals]
    env.meta["t_grid"] = [float(t) for t in ts]
    return env


def decay_estimate(p, g, t_grid=None, rtol=1e-7):
    """Envelope of the smoothed symbol mass against the weight profile.

    For each probe t the symbol is integrated against the inverse distance
    bracket 1/bracket(t - bracket(xi)) and the result is normalized by
    t g(t); a bounded envelope certifies that the symbol's spread matches
    the weight's decay.
    """
    if t_grid is None:
        t_grid = np.geomspace(2.0 ** 3, 2.0 ** 17, 29)
    ts = sorted(float(t) for t in t_grid)

    def smoothed(t):
        def integrand(u):
            return 1.0 / (math.hypot(1.0, t - u) * math.sqrt(u * u - 1.0))
        if p.xi_kind == "bracket-inverse" and p.xi_max is None:
            cut = max(2.0 * t, 4.0)

            def tail(v):
                # u = 1/v turns the tail into a bounded integrand on (0, 1].
                return 1.0 / (v * math.hypot(1.0, t - 1.0 / v)
                              * math.sqrt(1.0 - v * v))

            v1, e1 = quad(integrand, 1.0, cut,
                          points=[t] if 1.0 < t < cut else None, limit=400)
            v2, e2 = quad(tail, 0.0, 1.0 / cut, limit=400)
            val, err = v1 + v2, e1 + e2
        else:
            cap = p.xi_max if p.xi_max is not None else 10.0 * ts[-1]

            def direct(xi):
                return (p._xi_fn(xi)
                        / math.hypot(1.0, t - math.hypot(1.0, xi)))
            val, err = quad(direct, 0.0, cap, limit=400)
        if not math.isfinite(val) or err > rtol * max(abs(val), 1.0):
            raise NumericError("the smoothed symbol integral did not reach "
                               f"the requested tolerance ({err:.2e} "
                               "achieved)")
        return 2.0 * p.x_mass() * val

    vals = np.array([smoothed(t) / (t * float(g(t))) for t in ts])
    deep = vals[len(vals) // 2:]
    w_full = float(np.max(vals) - np.min(vals))
    w_deep = float(np.max(deep) - np.min(deep))
    from .seqcore import _status_from_widths
    status = _status_from_widths(w_full, w_deep)
    env = ValueEnvelope(lo=float(np.min(vals)), hi=float(np.max(vals)),
                        window=(ts[0], ts[-1]),
                        trend=(w_deep - w_full) / max(len(ts) // 2, 1),
                        status=status)
    env.meta["values"] = [float(v) for v in vals]
    env.meta["t_grid"] = [float(t) for t in ts]
    return env


def modulation_check(op, g, p):
    """Test the summability-with-weights condition at exponent p.

    The scores |lambda_k| g(bracket(k))**(-1/p) are sorted decreasingly and
    the dual-power tail sup over j of score_(j)**q / g(j+1), q = p/(p-1),
    is compared between the half and the full truncation: growth beyond ten
    percent reads as divergence (no), otherwise the sup is reported (yes).
    At p = 1 the condition degenerates to the weighted sup of the
    eigenvalues themselves, which is noted in the evidence.
    """
    p = float(p)
    if p < 1.0:
        raise DomainError("the modulation exponent needs p >= 1")
    eigs = np.abs(op.eigenvalues())
    mult = op.multiplicities().astype(int)
    brackets = np.hypot(1.0, np.arange(op.k_max + 1, dtype=float))

    def tail_sup(k_cap):
        lam = np.repeat(eigs[:k_cap + 1], mult[:k_cap + 1])
        br = np.repeat(brackets[:k_cap + 1], mult[:k_cap + 1])
        if p == 1.0:
            return float(np.max(lam / g(br)))
        scores = lam * g(br) ** (-1.0 / p)
        scores.sort()
        scores = scores[::-1]
        q = p / (p - 1.0)
        js = np.arange(1.0, len(scores) + 1.0)
        return float(np.max(scores ** q / g(js + 1.0)))

    half = tail_sup(op.k_max // 2)
    full = tail_sup(op.k_max)
    growing = full > half * 1.10
    evidence = {"sup_half": half, "sup_full": full, "p": p,
                "growth": full / max(half, 1e-300)}
    if p == 1.0:
        evidence["note"] = ("p = 1 tests the weighted eigenvalue sup "
                            "directly; a finite truncation cannot certify "
                            "the limit")
    answer = "no" if growing else "yes"
    return Verdict(answer, full if answer == "yes" else None, evidence)
