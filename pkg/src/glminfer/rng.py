"""Reproducible random streams built on the Philox counter-based generator.

Every stochastic component takes an explicit integer seed and derives an
independent 128-bit Philox key from it with a cryptographic hash, so streams
for (cell, grid point, replication, purpose) never collide and parallel
execution reproduces sequential output bit for bit.
"""

import hashlib

import numpy as np


def derive_key(*parts) -> int:
    """Map a tuple of ints/strings to a 128-bit key, stable across platforms."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (bool, np.bool_)):
            raise TypeError("boolean key parts are ambiguous; use ints or strings")
        if isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        elif isinstance(part, str):
            h.update(b"s" + part.encode("utf-8") + b"\x00")
        else:
            raise TypeError(f"unsupported key part type {type(part).__name__}")
    return int.from_bytes(h.digest()[:16], "little")


def generator(*parts) -> np.random.Generator:
    """Independent Generator for the stream named by ``parts``."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))
