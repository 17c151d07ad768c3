"""Seeded randomness.

All draws go through numpy's PCG64 bit generator.  Child seeds are derived
by hashing a tuple of labels so that any cell of an experiment can be
regenerated on its own.
"""

import hashlib
import json

import numpy as np

RNG_NAME = "numpy.PCG64"
RNG_VERSION = 1


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of JSON-serialisable labels."""
    blob = json.dumps([RNG_VERSION, *parts], separators=(",", ":")).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big") >> 1


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
