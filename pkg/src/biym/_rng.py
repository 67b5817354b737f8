"""Counter-based random streams keyed by ``(seed, purpose tag)``."""
import zlib

import numpy as np


def stream(seed, tag):
    """Return an independent Philox generator for ``(seed, tag)``.

    The tag is hashed with CRC-32 so that the key is stable across processes
    and Python versions (``hash()`` is salted).
    """
    key = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF, zlib.crc32(str(tag).encode())]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
