"""Seeded random-number streams.

All randomness in the package flows from one root seed, split into named
streams so that e.g. parameter init can be held fixed while the
scheduled-sampling stream varies. Stream derivation uses crc32 of the
stream name, so it is stable across processes (unlike ``hash()``).
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(root_seed: int, name: str) -> np.random.Generator:
    """Return a Generator for the named stream derived from ``root_seed``."""
    return np.random.default_rng([root_seed & 0xFFFFFFFF, zlib.crc32(name.encode())])
