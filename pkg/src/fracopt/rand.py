"""Deterministic random streams.

All synthetic data in this package is drawn from Philox4x64 counter-based
generators keyed through numpy's SeedSequence.  Benchmark trials use
``philox_generator(master_seed, trial_index)`` so every trial owns an
independent stream and results do not depend on execution order.
"""

from __future__ import annotations

import numpy as np


def philox_generator(*key: int) -> np.random.Generator:
    """Generator backed by Philox4x64, keyed by a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def as_generator(seed: int | np.random.Generator) -> np.random.Generator:
    """Pass through an existing Generator, or key a fresh Philox one."""
    if isinstance(seed, np.random.Generator):
        return seed
    return philox_generator(int(seed))
