"""Sequence container, named families, averages, and envelope verdicts."""

import math

import numpy as np
import pytest

from stw.errors import DomainError
from stw.seqcore import (DyadicSequence, almost_convergent, banach_envelope,
                         invariance_residual, named_sequence,
                         ordering_numbers, sequence_from_spec, shift,
                         tail_envelope, window_average)

from conftest import random_dense, random_blocks


# -- construction and access --------------------------------------------------

def test_dense_roundtrip_and_window():
    x = DyadicSequence.from_values([1.0, -2.0, 3.0], offset=2)
    assert (x.index_lo, x.index_hi) == (2, 4)
    assert x.at(3) == -2.0
    assert np.allclose(x.to_dense(2, 4), [1.0, -2.0, 3.0])


def test_blocks_fill_zero_and_sort():
    x = DyadicSequence.from_blocks([(6, 2, 5.0), (1, 2, -1.0)], 0, 9)
    assert np.allclose(x.to_dense(0, 9),
                       [0, -1, -1, 0, 0, 0, 5, 5, 0, 0])


def test_overlapping_blocks_rejected():
    with pytest.raises(DomainError):
        DyadicSequence.from_blocks([(0, 3, 1.0), (2, 2, 2.0)])


def test_zplus_rejects_negative_start():
    with pytest.raises(DomainError):
        DyadicSequence.from_values([1.0], offset=-1)


def test_empty_window_rejected():
    with pytest.raises(DomainError):
        DyadicSequence.from_blocks([(0, 1, 1.0)], 3, 2)


def test_window_outside_data_rejected():
    x = DyadicSequence.from_values([1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        ordering_numbers(x, window=(0, 10))


# -- named families -----------------------------------------------------------

def test_alternating_sequence_values():
    x = named_sequence("alt", 0, 6)
    assert [x.at(n) for n in range(7)] == [1, -1, 1, -1, 1, -1, 1]


def test_indicator_sequence_is_one():
    x = named_sequence("chi", 0, 100)
    assert all(x.at(n) == 1.0 for n in (0, 1, 50, 100))


def test_block_sequence_geometry():
    # 1 exactly on [4**j, 2 * 4**j) for j >= 1; in particular nothing at
    # the bottom scale and first block at [4, 8).
    y = named_sequence("y_dixcor", 0, 200)
    expected = {n: 0.0 for n in range(201)}
    for j in (1, 2, 3):
        for n in range(4 ** j, 2 * 4 ** j):
            if n <= 200:
                expected[n] = 1.0
    assert all(y.at(n) == expected[n] for n in range(201))
    assert y.at(0) == 0.0 and y.at(1) == 0.0 and y.at(3) == 0.0
    assert y.at(4) == 1.0 and y.at(7) == 1.0 and y.at(8) == 0.0


def test_unknown_named_sequence_rejected():
    with pytest.raises(DomainError):
        named_sequence("nope", 0, 4)


# -- ordering numbers ----------------------------------------------------------

def test_ordering_nonincreasing_and_dominating(rng):
    for _ in range(20):
        x = random_dense(rng, int(rng.integers(5, 60)), lo=-3.0, hi=3.0)
        o = ordering_numbers(x)
        prev = math.inf
        for n in range(x.index_lo, x.index_hi + 1):
            assert o.at(n) <= prev + 1e-15
            assert abs(x.at(n)) <= o.at(n) + 1e-15
            prev = o.at(n)


def test_ordering_idempotent_on_runs(rng):
    x = random_blocks(rng, 8, lo=0.0, hi=2.0)
    o = ordering_numbers(x)
    oo = ordering_numbers(o)
    a, b = x.window()
    assert np.allclose(o.to_dense(a, b), oo.to_dense(a, b))


def test_ordering_runlength_matches_dense(rng):
    x = random_blocks(rng, 10, lo=-1.0, hi=1.0)
    a, b = x.window()
    dense = DyadicSequence.from_values(x.to_dense(a, b), a)
    o_rl = ordering_numbers(x)
    o_dn = ordering_numbers(dense)
    assert np.allclose(o_rl.to_dense(a, b), o_dn.to_dense(a, b))


# -- shifts --------------------------------------------------------------------

def test_shift_plus_prepends_zero():
    x = DyadicSequence.from_values([5.0, 6.0])
    sx = shift(x, "plus")
    assert sx.at(0) == 0.0 and sx.at(1) == 5.0 and sx.at(2) == 6.0


def test_shift_minus_drops_head():
    x = DyadicSequence.from_values([5.0, 6.0, 7.0])
    sx = shift(x, "minus")
    assert sx.at(0) == 6.0 and sx.at(1) == 7.0


def test_shift_roundtrip_on_zplus(rng):
    x = random_dense(rng, 12)
    back = shift(shift(x, "plus"), "minus")
    assert np.allclose(back.to_dense(0, 11), x.to_dense(0, 11))


def test_shift_translates_two_sided():
    x = DyadicSequence.from_values([1.0, 2.0, 3.0], offset=-1,
                                   side="Z_two_sided")
    sx = shift(x, "plus")
    assert sx.index_lo == 0 and sx.at(0) == 1.0 and sx.at(2) == 3.0


def test_shift_runlength_matches_dense(rng):
    x = random_blocks(rng, 6)
    a, b = x.window()
    dense = DyadicSequence.from_values(x.to_dense(a, b), a)
    for direction in ("plus", "minus"):
        s_rl = shift(x, direction)
        s_dn = shift(dense, direction)
        lo = max(s_rl.index_lo, s_dn.index_lo)
        hi = min(s_rl.index_hi, s_dn.index_hi)
        assert np.allclose(s_rl.to_dense(lo, hi), s_dn.to_dense(lo, hi))


def test_shift_direction_validated():
    x = DyadicSequence.from_values([1.0])
    with pytest.raises(DomainError):
        shift(x, "sideways")


# -- window averages and residuals ----------------------------------------------

def test_single_point_average_is_the_value(rng):
    x = random_dense(rng, 10)
    for n in range(10):
        assert window_average(x, n, 1) == x.at(n)


def test_difference_sequence_residual_bound(rng):
    # Averages of z - S_plus(z) telescope to (z_(n+p-1) - z_(n-1)) / p, so
    # the residual obeys the exact 2 sup|z| / p bound.
    for _ in range(10):
        length = 64
        z = random_dense(rng, length)
        diff_vals = [z.at(0)] + [z.at(n) - z.at(n - 1)
                                 for n in range(1, length)]
        x = DyadicSequence.from_values(diff_vals)
        sup_z = max(abs(z.at(n)) for n in range(length))
        for p in (2, 5, 16, 32):
            res = invariance_residual(x, p)
            assert res <= 2.0 * sup_z / p + 1e-12
            # spot-check the telescoping identity at an interior start
            n0 = 7
            expect = (z.at(n0 + p - 1) - z.at(n0 - 1)) / p
            assert window_average(x, n0, p) == pytest.approx(expect,
                                                             abs=1e-12)


def test_banach_envelope_is_shift_invariant_exactly(rng):
    x = random_dense(rng, 40)
    sx = shift(x, "plus")
    env = banach_envelope(x, 8, window=(0, 39))
    env_s = banach_envelope(sx, 8, window=(1, 40))
    assert env_s.lo == pytest.approx(env.lo, abs=1e-14)
    assert env_s.hi == pytest.approx(env.hi, abs=1e-14)


# -- envelopes and verdicts -------------------------------------------------------

def test_tail_envelope_of_convergent_sequence():
    # The bracket spans the whole window (the head value 4.0 included);
    # convergence shows in the deep-half readings carried in meta.
    x = DyadicSequence.from_formula(
        lambda n: 3.0 + 2.0 ** -float(min(n, 60)), 0, 4096, "Z_plus")
    env = tail_envelope(x)
    assert env.status == "converged"
    assert env.lo <= 3.0 <= env.hi
    deep = env.meta["deep_hi"] - env.meta["deep_lo"]
    assert deep <= 1e-6
    assert env.meta["deep_midpoint"] == pytest.approx(3.0, abs=1e-6)


def test_tail_envelope_of_alternating_sequence():
    x = named_sequence("alt", 0, 512)
    env = tail_envelope(x)
    assert env.lo == -1.0 and env.hi == 1.0
    assert env.status in ("inconclusive", "widening")


def test_banach_inside_tail_envelope(rng):
    for _ in range(15):
        x = random_dense(rng, int(rng.integers(32, 128)), lo=-2.0, hi=2.0)
        tail = tail_envelope(x)
        ban = banach_envelope(x, 8)
        assert ban.lo >= tail.lo - 1e-12
        assert ban.hi <= tail.hi + 1e-12
        assert ban.width <= tail.width + 1e-12


def test_almost_convergence_of_alternation():
    # Every even window length averages the alternation to exactly 0.
    x = named_sequence("alt", 0, 1023)
    verdict = almost_convergent(x, 8, 1e-9)
    assert verdict.answer == "yes"
    assert verdict.value == pytest.approx(0.0, abs=1e-15)


def test_almost_convergence_of_convergent_sequence():
    # The bracket ranges over every start phase, so the head average
    # H_64 / 64 = 0.074 bounds how tight it can be at this p_max.
    x = DyadicSequence.from_formula(
        lambda n: 1.0 / (n + 1.0), 0, 8192, "Z_plus")
    verdict = almost_convergent(x, 64, 0.1)
    assert verdict.answer == "yes"
    assert verdict.value == pytest.approx(0.0, abs=0.05)


def test_almost_convergence_fails_on_long_blocks():
    # Windows much shorter than the block lengths see pure 0 and pure 1
    # phases, so the bracket stays [0, 1] at every p on the grid.
    y = named_sequence("y_dixcor", 0, 2 * 4 ** 6 - 1)
    verdict = almost_convergent(y, 64, 1e-2)
    assert verdict.answer == "no"
    env = verdict.evidence["envelope"]
    assert env["hi"] - env["lo"] == pytest.approx(1.0, abs=1e-12)


def test_banach_envelope_needs_enough_indices():
    x = DyadicSequence.from_values([1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        banach_envelope(x, 8)


# -- serialization ----------------------------------------------------------------

def test_spec_runlength_matches_constructor():
    spec = {"kind": "runlength", "blocks": [[2, 3, 1.5]], "index_lo": 0,
            "index_hi": 6}
    x = sequence_from_spec(spec)
    assert np.allclose(x.to_dense(0, 6), [0, 0, 1.5, 1.5, 1.5, 0, 0])


def test_spec_values_matches_constructor():
    x = sequence_from_spec({"kind": "values", "offset": 3,
                            "data": [1.0, 2.0]})
    assert x.index_lo == 3 and x.at(4) == 2.0


def test_spec_formula_uses_window_fallback():
    x = sequence_from_spec({"kind": "formula", "id": "alt"}, window=(0, 9))
    assert x.index_hi == 9 and x.at(1) == -1.0


def test_spec_rejects_unknown_kind():
    with pytest.raises(DomainError):
        sequence_from_spec({"kind": "mystery"})
    with pytest.raises(DomainError):
        sequence_from_spec([1, 2, 3])
    with pytest.raises(DomainError):
        sequence_from_spec({"kind": "values", "data": [1.0],
                            "side": "Z_diagonal"})
