"""Counter-based RNG streams with deterministic per-task derivation.

A stream is identified by a root seed plus an arbitrary tuple of integer
stream ids.  Streams derived from the same (seed, ids) are bit-identical
regardless of which worker draws from them, so parallel experiments are
reproducible independent of scheduling.
"""

from __future__ import annotations

import numpy as np


def rng_stream(seed: int, *stream_ids: int) -> np.random.Generator:
    """Return a Philox generator for the given root seed and stream path."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in stream_ids))
    return np.random.Generator(np.random.Philox(seq))
