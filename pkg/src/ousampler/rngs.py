"""Named, reproducible random streams.

All randomness in the package flows through :func:`substream`: a (seed, key)
pair maps deterministically to an independent ``numpy`` generator, so any
component can be re-run in isolation without replaying the streams consumed
by the others.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for the given seed and stream key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
