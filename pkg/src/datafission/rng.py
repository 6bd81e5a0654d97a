"""Seeded random-stream management.

All randomness flows through ``numpy.random.Generator`` objects. A single
master seed identifies a whole study; independent child streams are derived
with a counter-based scheme so that any unit of work (a replicate, a stage
within a replicate) can be replayed in isolation:

    child_rng(master_seed)            -> the root stream
    child_rng(master_seed, i)         -> stream for replicate i
    child_rng(master_seed, i, j)      -> stream j within replicate i

The derivation uses ``numpy.random.SeedSequence`` with the counter tuple as
``spawn_key``, which guarantees statistically independent streams and
bit-identical draws across processes and platforms.

Generators are stateful and must not be shared across parallel workers; each
worker derives its own child stream from the (seed, counters) tuple instead.
"""

from __future__ import annotations

import numpy as np

__all__ = ["child_rng"]


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Return the child generator identified by ``(seed, *key)``.

    Identical arguments always produce an identical stream; distinct ``key``
    tuples produce independent streams.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
