"""Named, seed-derived random streams."""

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 32-bit key for a stream name (md5, like the chunk ids)."""
    return int(hashlib.md5(name.encode()).hexdigest()[:8], 16)


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for `name` under experiment seed `seed`."""
    return np.random.default_rng([int(seed), stream_key(name)])
