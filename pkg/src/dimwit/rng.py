"""Seeded random streams.

All stochastic code in the package draws from Philox4x64-10 counter-based
generators keyed by ``(seed, stream)``, so a 64-bit seed plus a small stream
index fully determines every draw.  Streams are independent and can be
consumed in any order (restarts, (x, y) measurement pairs, repetitions),
which is what makes parallel execution reproduce sequential results
bit for bit.
"""

import numpy as np


def philox_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Return the generator for substream ``stream`` of ``seed``.

    Key layout: Philox key word 0 = seed, word 1 = stream, counter starts
    at zero.  Same (seed, stream) -> identical draw sequence, on any
    machine and regardless of how many other streams were consumed.
    """
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
