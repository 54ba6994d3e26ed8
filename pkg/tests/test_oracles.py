"""Independent oracles behind the derived constants used elsewhere.

Every expected value that is not a plain definition is recomputed here by
a second route (brute-force enumeration, closed-form prefix sums, digamma
differences, adaptive quadrature) and the frozen literals asserted in the
other test modules are checked against those routes.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import digamma

from stw.seqcore import (DyadicSequence, banach_envelope, named_sequence,
                         ordering_numbers, window_average)
from stw.weights import get_weight, dyadic_sum_ratio
from stw.transforms import (MuFunction, cesaro_g, log_mean, phi_g,
                            rearrange, synth_D)
from stw.connes import SymbolGrid, shell_integral

from conftest import random_dense, random_blocks

LN2 = math.log(2.0)


# -- window averages and the invariant-mean bracket -------------------------

def brute_average_extremes(values, offset, a, b, p):
    """inf/sup of A_p(n) by direct slicing; the banach-envelope oracle."""
    lo, hi = math.inf, -math.inf
    for n in range(a, b - p + 2):
        v = float(np.mean(values[n - offset:n - offset + p]))
        lo, hi = min(lo, v), max(hi, v)
    return lo, hi


def test_banach_envelope_matches_brute_force(rng):
    for _ in range(25):
        length = int(rng.integers(16, 80))
        x = random_dense(rng, length)
        vals = x.to_dense(0, length - 1)
        p_max = int(rng.integers(2, 9))
        env = banach_envelope(x, p_max)
        for p, lo_p, hi_p in env.meta["per_p"]:
            blo, bhi = brute_average_extremes(vals, 0, 0, length - 1, p)
            assert lo_p == pytest.approx(blo, abs=1e-12)
            assert hi_p == pytest.approx(bhi, abs=1e-12)


def test_window_average_is_exact_on_runs(rng):
    for _ in range(25):
        x = random_blocks(rng, int(rng.integers(3, 12)))
        a, b = x.window()
        vals = x.to_dense(a, b)
        p = int(rng.integers(1, b - a + 2))
        n = int(rng.integers(a, b - p + 2))
        direct = math.fsum(vals[n - a:n - a + p]) / p
        assert window_average(x, n, p) == pytest.approx(direct, abs=1e-13)


# -- the sort oracle for ordering numbers -----------------------------------

def sorted_profile_at(x_vals, offset, t):
    """Sort the dyadic cells by |value| and read the profile at t.

    Cell k of the plain synthesis has width 2**k and height |x_k|; the
    decreasing rearrangement concatenates them in decreasing height order,
    and the profile value at position t is the height of the cell the
    cumulative width reaches at t.
    """
    cells = sorted(((abs(v), 2.0 ** (offset + i))
                    for i, v in enumerate(x_vals)), reverse=True)
    pos = 0.0
    for height, width in cells:
        pos += width
        if t < pos:
            return height
    return 0.0


def test_ordering_numbers_match_sort_oracle(rng):
    # o_n is the rearranged profile as the position approaches 2**n from
    # the left.  Cell widths are integers, so 2**n - 1/2 is never a
    # breakpoint and the reading does not depend on which endpoint each
    # step owns; reading at 2**n exactly would differ whenever the cells
    # above the cut tile [0, 2**n) with no slack.
    for _ in range(40):
        length = int(rng.integers(4, 24))
        x = random_dense(rng, length, lo=-2.0, hi=2.0)
        vals = x.to_dense(0, length - 1)
        o = ordering_numbers(x)
        for n in range(length):
            assert o.at(n) == pytest.approx(
                sorted_profile_at(vals, 0, 2.0 ** n - 0.5), abs=1e-12)


# -- weighted prefix sums against digamma -----------------------------------

def test_gcor_partial_sums_match_digamma():
    g = get_weight("g_cor")
    # w_0 = 1/2 and w_n = 1/n for n >= 1, so the partial sum up to n is
    # 1/2 + H(n) = 1/2 + digamma(n + 1) - digamma(1).
    for n in (1, 2, 5, 17, 300, 4096):
        direct = math.fsum(g.w(m) for m in range(n + 1))
        closed = 0.5 + float(digamma(n + 1) - digamma(1))
        assert g.w_partial(0, n + 1) == pytest.approx(direct, rel=1e-12)
        assert g.w_partial(0, n + 1) == pytest.approx(closed, rel=1e-12)


def test_fcor_coefficients_are_one():
    g = get_weight("f_cor")
    for n in (0, 1, 7, 40):
        assert g.w(n) == pytest.approx(1.0, abs=1e-15)
    assert g.w_partial(0, 65) == pytest.approx(65.0, abs=1e-12)


# -- the 0-1 block sequence and its averaged prefix constants ----------------

def y_prefix_ones(n):
    """How many indices k <= n carry a 1 in the block pattern.

    The 1-blocks are [4**j, 2 * 4**j) for j >= 1, so the count is a sum of
    complete powers of four plus a clipped final block.
    """
    total = 0
    j = 1
    while 4 ** j <= n:
        total += min(2 * 4 ** j - 1, n) - 4 ** j + 1
        j += 1
    return total


def test_y_sequence_matches_block_count(rng):
    y = named_sequence("y_dixcor", 0, 4 ** 4)
    dense = y.to_dense(0, 4 ** 4)
    running = np.cumsum(dense)
    for n in range(4 ** 4 + 1):
        assert int(running[n]) == y_prefix_ones(n)


def test_cesaro_peak_and_dip_closed_forms():
    # Under the plain harmonic weight all coefficients are 1, so the
    # weighted mean at index n is (count of ones) / (n + 1); the block
    # geometry collapses that to closed forms at the block edges.
    hi = 2 * 4 ** 12 - 1
    y = named_sequence("y_dixcor", 0, hi)
    cy = cesaro_g(y, get_weight("f_cor"), window=(0, hi))
    for m in range(2, 13):
        peak = 2 * 4 ** m - 1
        dip = 4 ** m - 1
        assert cy.at(peak) == pytest.approx(
            (2.0 / 3.0) * (1.0 - 4.0 ** -m), rel=1e-12)
        assert cy.at(dip) == pytest.approx(
            1.0 / 3.0 - 4.0 ** (1 - m) / 3.0, rel=1e-12)
        assert cy.at(peak) == pytest.approx(
            y_prefix_ones(peak) / (peak + 1.0), rel=1e-12)


def test_log_mean_probes_match_digamma_oracle():
    hi = 2 * 4 ** 12 - 1
    y = named_sequence("y_dixcor", 0, hi)
    my = log_mean(y, window=(0, hi))

    def oracle(n):
        total = 0.0
        j = 1
        while 4 ** j <= n:
            a, b = 4 ** j, min(2 * 4 ** j - 1, n)
            total += float(digamma(b + 1) - digamma(a))
            j += 1
        return total / math.log(n + 1)

    probes = {
        2 * 4 ** 11 - 1: 0.48374751656389464,
        2 * 4 ** 12 - 1: 0.48504771609869646,
        4 ** 11: 0.4602814991192139,
        4 ** 12: 0.46359137196233613,
    }
    for n, frozen in probes.items():
        assert my.at(n) == pytest.approx(oracle(n), abs=5e-13)
        assert my.at(n) == pytest.approx(frozen, abs=1e-12)


# -- block averages: exact branch, packed runs, telescoping -----------------

def test_phi_probes_match_quadrature():
    g = get_weight("g_schro")
    mu = MuFunction.from_weight(g, 1.0)
    phi = phi_g(mu, g, window=(0, 64))
    frozen = {0: 0.9760446459144557, 10: 0.7281416140385621,
              20: 0.7104762114564475}
    for n, expect in frozen.items():
        block, _ = quad(lambda t: math.log(t + 2.0) / (t + 2.0),
                        2.0 ** n, 2.0 ** (n + 1), epsrel=1e-12)
        w = math.exp(g.log_w(n))
        assert phi.at(n) == pytest.approx(block / w, rel=1e-10)
        assert phi.at(n) == pytest.approx(expect, abs=1e-12)


def test_phi_packed_matches_literal_rearrangement():
    f = get_weight("f_cor")
    hi = 2 * 4 ** 4 - 1
    y = named_sequence("y_dixcor", 0, hi)
    mu = rearrange(synth_D(y, f))
    phi = phi_g(mu, f, window=(0, hi + 2))

    # Literal oracle: sort the nonzero cells by height (they are already
    # ordered by construction), concatenate, and integrate each dyadic
    # block of the packed profile directly.
    cells = []
    dense = y.to_dense(0, hi)
    for k, v in enumerate(dense):
        if v != 0.0:
            cells.append((v * 2.0 ** -k, 2.0 ** k))
    cells.sort(reverse=True)
    edges = [0.0]
    for _, width in cells:
        edges.append(edges[-1] + width)

    def profile(t):
        for (height, _), lo, hi2 in zip(cells, edges, edges[1:]):
            if lo <= t < hi2:
                return height
        return 0.0

    # The packed representation flushes averages below 2**-70 of the scale
    # to zero (they are invisible to any double-precision average built on
    # top), so the literal oracle is matched with that absolute floor.
    for n in range(0, hi + 2):
        a, b = 2.0 ** n, 2.0 ** (n + 1)
        pts = sorted({a, b, *(e for e in edges if a < e < b)})
        block = math.fsum(profile(lo) * (hi2 - lo)
                          for lo, hi2 in zip(pts, pts[1:]))
        assert phi.at(n) == pytest.approx(block / (2.0 ** n * f(2.0 ** n)),
                                          rel=1e-11, abs=2.0 ** -70)


def test_phi_telescopes_to_the_integral():
    for name in ("f_cor", "g_cor", "g_pow(1)", "g_schro"):
        g = get_weight(name)
        chi = named_sequence("chi", 0, 40)
        mu = rearrange(synth_D(chi, g))
        phi = phi_g(mu, g, window=(0, 44))
        total = math.fsum(g.w(n) * phi.at(n) for n in range(45))
        assert total + mu.integral(1.0) == pytest.approx(
            mu.integral(2.0 ** 45), rel=1e-12)


# -- shell integrals against adaptive quadrature ------------------------------

def test_shell_integral_matches_quad():
    g = get_weight("g_pow(1)")
    p = SymbolGrid()
    frozen = {0: 2.633915793849633, 10: 1.3862947187479175}
    for n in (0, 3, 10):
        xi_lo = 0.0 if n == 0 else math.sqrt(4.0 ** n - 1.0)
        xi_hi = math.sqrt(4.0 ** (n + 1) - 1.0)
        val, _ = quad(lambda u: 1.0 / math.hypot(1.0, u), xi_lo, xi_hi,
                      epsrel=1e-12)
        expect = 2.0 * val / g.w(n)
        assert shell_integral(p, g, n) == pytest.approx(expect, rel=1e-10)
        if n in frozen:
            assert shell_integral(p, g, n) == pytest.approx(
                frozen[n], abs=1e-12)
    # deep shells approach 2 log 2 (two half-lines, log 2 each)
    assert shell_integral(p, g, 40) == pytest.approx(2.0 * LN2, abs=1e-10)


# -- the coefficient-sum / primitive ratio -----------------------------------

def test_dyadic_sum_ratio_closed_form():
    # For the harmonic profile all coefficients are 1 while the primitive
    # is 1 + log(2**n), so the ratio at n is (n + 1) / (1 + n log 2).
    g = get_weight("g_pow(1)")
    for n in (1, 16, 512):
        expect = (n + 1.0) / (1.0 + n * LN2)
        assert dyadic_sum_ratio(g, n) == pytest.approx(expect, rel=1e-12)
    assert dyadic_sum_ratio(g, 512) == pytest.approx(1.441451135880118,
                                                     abs=1e-12)
    assert abs(dyadic_sum_ratio(g, 512) - 1.0 / LN2) <= 2e-3
