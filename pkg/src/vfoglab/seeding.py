"""Derive independent, reproducible integer seeds from one run seed."""

import zlib

import numpy as np


def derive_seed(seed, *tags):
    key = [zlib.crc32(str(t).encode()) for t in tags]
    return int(np.random.SeedSequence(int(seed), spawn_key=key).generate_state(1, dtype=np.uint64)[0])


def rng_for(seed, *tags):
    return np.random.default_rng(derive_seed(seed, *tags))
