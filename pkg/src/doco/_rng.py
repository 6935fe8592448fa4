"""Named random sub-streams derived from a single run seed."""

import zlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Return a generator for sub-stream `name` of `seed`.

    The stream depends only on (seed, name), so adding a consumer never
    perturbs the draws seen by another.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
