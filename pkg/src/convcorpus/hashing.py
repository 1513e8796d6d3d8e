"""Deterministic seeded hashing behind every sampling decision.

Anything random-looking in the pipeline (diversity sampling, noise
replacements, style draws, mixture interleaves) is a pure function of a
64-bit seed plus string keys.  That makes results identical across runs,
input orderings, and worker counts, which the shard/manifest determinism
guarantees rely on.
"""

from __future__ import annotations

import hashlib

_U64 = 2**64


def stable_hash64(seed: int, *parts: str) -> int:
    """Hash (seed, *parts) to a uniform unsigned 64-bit integer.

    Parts are length-prefixed so ("ab", "c") and ("a", "bc") differ.
    """
    h = hashlib.blake2b(digest_size=8, key=(seed % _U64).to_bytes(8, "little"))
    for part in parts:
        data = part.encode("utf-8")
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def unit_interval(seed: int, *parts: str) -> float:
    """Map (seed, *parts) to a float in [0, 1)."""
    return stable_hash64(seed, *parts) / _U64


def derive_seed(seed: int, label: str) -> int:
    """Derive an independent per-stage seed from the global seed."""
    return stable_hash64(seed, "seed:" + label)
