"""Seed derivation so every component draws from its own reproducible stream."""
import hashlib
import random


def derive_seed(seed, *labels):
    h = hashlib.sha256(repr(seed).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(seed, *labels):
    """Return a ``random.Random`` keyed on ``seed`` and a label path."""
    return random.Random(derive_seed(seed, *labels))


def random_bytes(rng, n):
    return rng.getrandbits(8 * n).to_bytes(n, "big")
