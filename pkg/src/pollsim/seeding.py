"""Keyed-hash seed derivation so per-task randomness is order independent."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *parts: object) -> int:
    """Map ``(master_seed, *parts)`` to a 64-bit integer seed.

    Parts are joined with an unprintable separator so ("a|b", "c") and
    ("a", "b|c") do not collide.
    """
    key = str(int(master_seed)).encode("ascii")
    msg = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(msg, key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def task_rng(master_seed: int, *parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))
