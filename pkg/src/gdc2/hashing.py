"""Hash function and table sizing shared by both hash tables.

Both the k-mer index over the reference and the tuple-substring index
use FNV-1a (64-bit) with open addressing and linear probing.  The hash,
the probe order and the sizing rule are pinned here because the pure
and compiled backends must populate byte-identical tables.
"""

from __future__ import annotations

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1

MAX_LOAD_NUM = 7  # load factor cap 0.7, kept as a ratio of integers
MAX_LOAD_DEN = 10


def fnv1a(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def table_size_for(n_keys: int, min_size: int = 2) -> int:
    """Smallest power of two holding n_keys at load <= 0.7."""
    size = min_size
    while n_keys * MAX_LOAD_DEN > size * MAX_LOAD_NUM:
        size <<= 1
    return size
