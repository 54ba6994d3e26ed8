"""Shared fixtures: a seeded generator and random sequence builders."""

import os

import numpy as np
import pytest

from stw.seqcore import DyadicSequence

DEFAULT_SEED = 20260817


@pytest.fixture(scope="session")
def seed():
    return int(os.environ.get("STW_SEED", DEFAULT_SEED))


@pytest.fixture()
def rng(seed):
    return np.random.default_rng(seed)


def random_dense(rng, length, lo=-1.0, hi=1.0, offset=0):
    vals = rng.uniform(lo, hi, size=length)
    return DyadicSequence.from_values(vals, offset)


def random_blocks(rng, n_blocks, max_len=8, lo=0.0, hi=1.0, start=0):
    """A random run-length sequence of n_blocks constant segments."""
    blocks = []
    pos = start
    for _ in range(n_blocks):
        length = int(rng.integers(1, max_len + 1))
        blocks.append((pos, length, float(rng.uniform(lo, hi))))
        pos += length
    return DyadicSequence.from_blocks(blocks, start, pos - 1)
