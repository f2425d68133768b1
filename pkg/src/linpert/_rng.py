"""Keyed counter-based random streams.

Every stream is a Philox generator keyed on ``(seed, *keys)``, so a draw
depends only on its key and never on how many other streams were consumed
before it. This is what keeps parallel trials reproducible.
"""

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & _MASK64


def rng_for(seed, *keys):
    """Return an independent generator for the stream ``(seed, *keys)``."""
    entropy = [_word(seed)] + [_word(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """Derive a 63-bit child seed; used to hand sub-tasks their own seed."""
    return int(rng_for(seed, "derive", *keys).integers(0, 2**63 - 1))
