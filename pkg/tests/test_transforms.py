"""Synthesis, rearrangement, block averages, means, and transport."""

import math

import numpy as np
import pytest

from stw.errors import DomainError, NumericError
from stw.seqcore import DyadicSequence, named_sequence
from stw.weights import get_weight, weight_names
from stw.transforms import (MuFunction, cesaro_g, cesaro_inverse,
                            inv_residual_seq, lg_norm, log_mean,
                            mu_from_spec, n_map, phi_g, quasinorm_Lg,
                            rearrange, split_at_level, synth_D,
                            transport_pushforward)

from conftest import random_dense

LN2 = math.log(2.0)


def sorted_cells(values, offset, g):
    """The literal rearrangement: cells by decreasing height, cumulative."""
    cells = []
    for i, v in enumerate(values):
        k = offset + i
        if v != 0.0:
            cells.append((v * math.exp(g.log_g_pow2(k)), 2.0 ** k))
    cells.sort(key=lambda c: -c[0])
    edges = [0.0]
    for _, width in cells:
        edges.append(edges[-1] + width)
    return cells, edges


def profile_value(cells, edges, t):
    for (height, _), lo, hi in zip(cells, edges, edges[1:]):
        if lo <= t < hi:
            return height
    return 0.0


# -- synthesis ---------------------------------------------------------------

def test_block_integral_is_coefficient_times_weight(rng):
    x = random_dense(rng, 20, lo=-2.0, hi=2.0)
    for name in ("f_cor", "g_cor", "g_schro"):
        g = get_weight(name)
        f = synth_D(x, g)
        for n in (0, 3, 11, 19):
            assert f.block_integral(n) == pytest.approx(
                x.at(n) * g.w(n), rel=1e-13)


def test_plain_synthesis_value_is_the_coefficient(rng):
    x = random_dense(rng, 8)
    f = synth_D(x)
    for n in range(8):
        t = 2.0 ** n * 1.3
        assert f.value(t) == pytest.approx(x.at(n), rel=1e-13)


def test_synthesis_requires_weight_instance():
    x = DyadicSequence.from_values([1.0])
    with pytest.raises(DomainError):
        synth_D(x, g="f_cor")


# -- rearrangement -----------------------------------------------------------

def test_rearrangement_matches_sorted_cells(rng):
    for _ in range(60):
        length = int(rng.integers(3, 12))
        x = random_dense(rng, length, lo=0.0, hi=1.0)
        vals = x.to_dense(0, length - 1)
        g = get_weight("g_pow(0)")
        mu = rearrange(synth_D(x))
        cells, edges = sorted_cells(vals, 0, g)
        probes = sorted({0.25, *(e + 0.25 for e in edges),
                         *(max(e - 0.25, 0.25) for e in edges[1:])})
        for t in probes:
            assert mu.value(t) == pytest.approx(
                profile_value(cells, edges, t), rel=1e-12, abs=1e-15)


def test_rearrangement_is_nonincreasing(rng):
    x = random_dense(rng, 10, lo=0.0, hi=3.0)
    mu = rearrange(synth_D(x, get_weight("f_cor")))
    grid = np.geomspace(0.5, 2.0 ** 12, 200)
    vals = [mu.value(float(t)) for t in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_rearrangement_preserves_mass(rng):
    for name in ("g_pow(0)", "f_cor", "g_cor"):
        g = get_weight(name)
        x = random_dense(rng, 14, lo=0.0, hi=2.0)
        mu = rearrange(synth_D(x, g))
        total = math.fsum(x.at(n) * g.w(n) for n in range(14))
        assert mu.integral(2.0 ** 60) == pytest.approx(total, rel=1e-12)


def test_rearrangement_prefix_integral_majorizes(rng):
    # The packed profile front-loads the mass, so every prefix integral
    # dominates the unsorted synthesis prefix.
    x = random_dense(rng, 10, lo=0.0, hi=1.0)
    f = synth_D(x)
    mu = rearrange(f)
    prefix_f = 0.0
    for n in range(10):
        prefix_f += f.block_integral(n)
        t = 2.0 ** (n + 1)
        assert mu.integral(t) >= prefix_f - 1e-12


def test_rearrangement_rejects_negative_values():
    x = DyadicSequence.from_values([1.0, -0.5, 2.0])
    with pytest.raises(DomainError):
        rearrange(synth_D(x))


def test_packed_count_equals_ones_mass():
    # Block integrals are w_n Phi_n, and with unit coefficients the total
    # mass of the packed profile is the number of ones.
    f = get_weight("f_cor")
    hi = 2 * 4 ** 5 - 1
    y = named_sequence("y_dixcor", 0, hi)
    mu = rearrange(synth_D(y, f))
    phi = phi_g(mu, f, window=(0, hi + 2))
    total = math.fsum(f.w(n) * phi.at(n) for n in range(hi + 3))
    ones = sum(1 for n in range(hi + 1) if y.at(n) == 1.0)
    assert total == pytest.approx(float(ones), rel=1e-12)


# -- block averages -----------------------------------------------------------

def test_phi_fixes_indicator_exactly():
    # The two-sided constant extension synthesizes to the weight profile
    # itself, whose block averages are exactly 1 at every scale, for every
    # catalog weight.
    for name in weight_names():
        g = get_weight(name)
        chi = named_sequence("chi", -10, 60, side="Z_two_sided")
        mu = rearrange(synth_D(chi, g))
        assert mu.kind == "dyadic_steps"
        phi = phi_g(mu, g, window=(-5, 50))
        for n in (-5, -1, 0, 1, 17, 50):
            assert phi.at(n) == pytest.approx(1.0, abs=1e-12), name


def test_phi_of_half_line_indicator_has_edge_correction():
    # On Z_plus the packed content slides left by one unit, so the block
    # at scale k briefly sees the next value: 1 - 2**-k (1 - ratio).
    f = get_weight("f_cor")
    chi = named_sequence("chi", 0, 100, side="Z_plus")
    mu = rearrange(synth_D(chi, f))
    assert mu.kind == "packed_runs"
    phi = phi_g(mu, f, window=(0, 99))
    for k in (0, 1, 2, 10, 40):
        expect = 1.0 - 2.0 ** -(k + 1)
        assert phi.at(k) == pytest.approx(expect, rel=1e-12)
    assert phi.at(90) == 1.0


def test_phi_of_harmonic_weight_is_log_two_at_any_depth():
    g = get_weight("g_pow(1)")
    mu = MuFunction.from_weight(g)
    phi = phi_g(mu, g, window=(0, 4000))
    for n in (0, 1, 100, 999, 4000):
        assert phi.at(n) == pytest.approx(LN2, abs=1e-12)


def test_phi_exact_branch_matches_generic_integration():
    from stw.weights import primitive_eval
    g = get_weight("g_schro")
    mu_exact = MuFunction.from_weight(g)
    with_anti = MuFunction.from_callable(
        lambda t: float(g(t)),
        antiderivative=lambda t: primitive_eval(g, t))
    quad_only = MuFunction.from_callable(lambda t: float(g(t)))
    a, b = 0, 40
    fast = phi_g(mu_exact, g, window=(a, b))
    mid = phi_g(with_anti, g, window=(a, b))
    slow = phi_g(quad_only, g, window=(a, b), rtol=1e-6)
    for n in range(a, b + 1):
        assert fast.at(n) == pytest.approx(mid.at(n), rel=1e-9)
        assert fast.at(n) == pytest.approx(slow.at(n), rel=1e-5)


def test_phi_guards():
    g = get_weight("g_schro")
    mu = MuFunction.from_weight(g)
    with pytest.raises(DomainError):
        phi_g(mu, g)  # closed form has no natural window
    with pytest.raises(NumericError):
        phi_g(mu, g, window=(0, 2 ** 23))  # too many blocks
    mu_cb = MuFunction.from_callable(lambda t: 1.0 / (1.0 + t))
    with pytest.raises(NumericError):
        phi_g(mu_cb, g, window=(0, 2000))  # beyond float scales


# -- weighted and logarithmic means ---------------------------------------------

def test_cesaro_fixes_constants_for_every_weight():
    chi = named_sequence("chi", 0, 300)
    for name in weight_names():
        g = get_weight(name)
        c = cesaro_g(chi, g)
        for n in (0, 1, 7, 100, 300):
            assert c.at(n) == pytest.approx(1.0, rel=1e-12), name


def test_cesaro_is_linear(rng):
    g = get_weight("g_cor")
    x = random_dense(rng, 50)
    z = random_dense(rng, 50)
    both = DyadicSequence.from_values(
        2.0 * x.to_dense(0, 49) + 3.0 * z.to_dense(0, 49))
    lhs = cesaro_g(both, g).to_dense(0, 49)
    rhs = (2.0 * cesaro_g(x, g).to_dense(0, 49)
           + 3.0 * cesaro_g(z, g).to_dense(0, 49))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_summable_weight_keeps_point_mass():
    # With a summable weight the origin's coefficient never washes out of
    # the average: the limit is w_0 over the total mass.
    g = get_weight("g_nonreg")
    delta = DyadicSequence.from_blocks([(0, 1, 1.0)], 0, 2 ** 20)
    c = cesaro_g(delta, g)
    expect = g.w(0) / g.w_partial(0, 2 ** 20 + 1)
    assert c.at(2 ** 20) == pytest.approx(expect, rel=1e-12)
    assert c.at(2 ** 20) == pytest.approx(0.19042508344388856, abs=1e-12)
    assert c.at(2 ** 20) >= 0.1


def test_cesaro_inverse_identities(rng):
    f = get_weight("f_cor")
    for _ in range(10):
        x = random_dense(rng, 64)
        back = cesaro_g(cesaro_inverse(x), f)
        assert np.allclose(back.to_dense(0, 63), x.to_dense(0, 63),
                           atol=1e-12)
        forth = cesaro_inverse(cesaro_g(x, f))
        assert np.allclose(forth.to_dense(0, 63), x.to_dense(0, 63),
                           atol=1e-12)


def test_cesaro_inverse_needs_full_history():
    x = DyadicSequence.from_values([1.0, 2.0], offset=3)
    with pytest.raises(DomainError):
        cesaro_inverse(x)


def test_log_mean_of_inverse_shifts_by_scaled_value(rng):
    # M(C^-1 x)_n = (M x)_n + (x_n - x_0) / log(n + 1), exactly.
    for _ in range(10):
        x = random_dense(rng, 40)
        mx = log_mean(x)
        minv = log_mean(cesaro_inverse(x))
        for n in range(1, 40):
            expect = mx.at(n) + (x.at(n) - x.at(0)) / math.log(n + 1.0)
            assert minv.at(n) == pytest.approx(expect, abs=1e-11)


def test_log_mean_of_indicator_tracks_harmonic_numbers():
    from scipy.special import digamma
    chi = named_sequence("chi", 0, 4096)
    m = log_mean(chi)
    gamma = -float(digamma(1))
    for n in (1, 10, 100, 4096):
        harm = float(digamma(n + 1)) + gamma
        assert m.at(n) == pytest.approx(harm / math.log(n + 1.0), rel=1e-12)


def test_log_mean_runlength_matches_dense():
    y = named_sequence("y_dixcor", 0, 513)
    dense = DyadicSequence.from_values(y.to_dense(0, 513))
    m_rl = log_mean(y).to_dense(1, 513)
    m_dn = log_mean(dense).to_dense(1, 513)
    assert np.allclose(m_rl, m_dn, atol=1e-12)


# -- norms and maps -----------------------------------------------------------

def test_n_map_multiplies_by_weight_samples(rng):
    g = get_weight("g_cor")
    x = random_dense(rng, 30)
    nx = n_map(x, g)
    for n in (0, 1, 13, 29):
        assert nx.at(n) == pytest.approx(
            x.at(n) * math.exp(g.log_g_pow2(n)), rel=1e-13)


def test_n_map_runlength_matches_dense(rng):
    g = get_weight("g_schro")
    blocks = [(0, 3, 0.5), (3, 4, 2.0), (9, 2, 1.0)]
    x = DyadicSequence.from_blocks(blocks, 0, 12)
    dense = DyadicSequence.from_values(x.to_dense(0, 12))
    a = n_map(x, g).to_dense(0, 12)
    b = n_map(dense, g).to_dense(0, 12)
    assert np.allclose(a, b, atol=1e-14)


def test_n_map_is_isometric_on_nonincreasing_data(rng):
    # With nonincreasing nonnegative entries the ordering numbers are the
    # entries themselves, so the weighted sup recovers the plain sup.
    for name in ("f_cor", "g_cor", "g_pow(1)", "g_schro"):
        g = get_weight(name)
        vals = np.sort(rng.uniform(0.0, 2.0, size=24))[::-1]
        x = DyadicSequence.from_values(vals)
        assert lg_norm(n_map(x, g), g) == pytest.approx(float(vals[0]),
                                                        rel=1e-12)


def test_quasinorm_of_scaled_weight_profile():
    for name in ("f_cor", "g_schro", "g_pow(1)"):
        g = get_weight(name)
        mu = MuFunction.from_weight(g, scale=2.5)
        assert quasinorm_Lg(mu, g) == pytest.approx(2.5, rel=1e-12)


# -- level splitting -----------------------------------------------------------

def random_steps(rng, n_steps=6):
    widths = rng.uniform(0.5, 3.0, size=n_steps)
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    values = np.sort(rng.uniform(0.1, 5.0, size=n_steps))[::-1]
    return MuFunction.from_breakpoints([float(e) for e in edges],
                                       [float(v) for v in values])


def test_split_reassembles_the_function(rng):
    for _ in range(30):
        mu = random_steps(rng)
        a = float(rng.uniform(0.15, 4.5))
        head, tail, d = split_at_level(mu, a)
        # head carries the part strictly above the level, up to d
        for t in np.linspace(0.01, float(mu.edges[-1]) + 1.0, 40):
            t = float(t)
            if t < d:
                assert head.value(t) == pytest.approx(mu.value(t),
                                                      rel=1e-12)
                assert mu.value(t) > a - 1e-12
            else:
                assert head.value(t) == 0.0
            assert tail.value(t) == pytest.approx(mu.value(t + d),
                                                  rel=1e-12, abs=1e-15)
        if d > 0.0:
            assert mu.value(d) <= a + 1e-12


def test_split_above_sup_returns_whole_tail(rng):
    mu = random_steps(rng)
    head, tail, d = split_at_level(mu, mu.sup_value() + 1.0)
    assert d == 0.0
    for t in (0.3, 1.7, 4.0):
        assert tail.value(t) == pytest.approx(mu.value(t), rel=1e-12,
                                              abs=1e-15)


def test_split_level_must_be_positive(rng):
    mu = random_steps(rng)
    with pytest.raises(DomainError):
        split_at_level(mu, 0.0)


# -- transport and residuals ------------------------------------------------------

def test_transport_is_homogeneous():
    f = get_weight("f_cor")
    g = get_weight("g_cor")
    y = named_sequence("y_dixcor", 0, 2 * 4 ** 4 - 1)
    mu1 = rearrange(synth_D(y, f))
    nu1 = transport_pushforward(mu1, f, g)
    # scale the input coefficients by 3: packed runs carry a scale field
    mu3 = MuFunction("packed_runs", runs=mu1.runs, weight=mu1.weight,
                     scale=3.0, log2_s=mu1.log2_s)
    nu3 = transport_pushforward(mu3, f, g)
    for t in (0.5, 3.0, 70.0, 5000.0):
        assert nu3.value(t) == pytest.approx(3.0 * nu1.value(t), rel=1e-11,
                                             abs=1e-15)


def test_transport_to_same_weight_stabilizes_deep_blocks():
    g = get_weight("g_schro")
    mu = MuFunction.from_weight(g)
    nu = transport_pushforward(mu, g, g, window=(0, 256))
    phi_mu = phi_g(mu, g, window=(0, 200))
    phi_nu = phi_g(nu, g, window=(0, 200))
    for n in (64, 128, 200):
        assert phi_nu.at(n) == pytest.approx(phi_mu.at(n), rel=1e-5)


def test_residual_vanishes_on_constant_extension():
    f = get_weight("f_cor")
    chi = named_sequence("chi", -10, 60, side="Z_two_sided")
    res = inv_residual_seq(chi, f, window=(0, 50))
    assert all(res.at(n) == pytest.approx(0.0, abs=1e-12)
               for n in range(0, 51))


def test_residual_sees_the_packing_shift():
    f = get_weight("f_cor")
    chi = named_sequence("chi", 0, 100, side="Z_plus")
    res = inv_residual_seq(chi, f, window=(0, 99))
    assert res.at(0) == pytest.approx(0.5, rel=1e-12)
    assert res.at(90) == 0.0


# -- parsing -------------------------------------------------------------------

def test_mu_spec_weight_kind():
    mu = mu_from_spec({"kind": "weight", "name": "g_schro", "scale": 2.0})
    g = get_weight("g_schro")
    for t in (0.5, 3.0, 100.0):
        assert mu.value(t) == pytest.approx(2.0 * float(g(t)), rel=1e-12)


def test_mu_spec_breakpoints_kind():
    mu = mu_from_spec({"kind": "breakpoints", "t": [0.0, 1.0, 3.0],
                       "v": [2.0, 0.5], "tail": "zero"})
    assert mu.value(0.5) == 2.0
    assert mu.value(2.0) == 0.5
    assert mu.value(5.0) == 0.0


def test_mu_spec_dyadic_step_kind():
    spec = {"kind": "dyadic-step", "weight": "f_cor",
            "coeffs": {"kind": "runlength", "blocks": [[4, 4, 1.0]],
                       "index_lo": 0, "index_hi": 12}}
    mu = mu_from_spec(spec)
    assert mu.kind in ("packed_runs", "dyadic_steps")
    f = get_weight("f_cor")
    phi = phi_g(mu, f, window=(0, 14))
    total = math.fsum(f.w(n) * phi.at(n) for n in range(15))
    assert total == pytest.approx(4.0, rel=1e-12)


def test_mu_spec_rejects_garbage():
    with pytest.raises(DomainError):
        mu_from_spec({"kind": "sculpture"})
    with pytest.raises(DomainError):
        mu_from_spec(["not", "a", "dict"])
