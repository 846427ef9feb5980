"""k-mer hash index over the reference sequence.

The table is sized once up front for all |R| - h1m + 1 keys (power of
two, load factor <= 0.7) and filled with the 0-based start position of
every overlapping h1m-mer, inserted in ascending position order with
linear probing.  Queries verify candidates against the raw sequence
data, so hash collisions only cost time.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import ConfigError
from .hashing import FNV_OFFSET, FNV_PRIME, fnv1a, table_size_for

MAX_CANDIDATES = 64  # verified candidates examined per probe chain


def lce(a: bytes, i: int, b: bytes, j: int) -> int:
    """Longest common extension of a[i:] and b[j:], in symbols."""
    n = 0
    la, lb = len(a), len(b)
    step = 512
    while i + n + step <= la and j + n + step <= lb and a[i + n : i + n + step] == b[j + n : j + n + step]:
        n += step
    while i + n < la and j + n < lb and a[i + n] == b[j + n]:
        n += 1
    return n


def _build_table_py(ref: bytes, h1m: int) -> np.ndarray:
    n_keys = len(ref) - h1m + 1
    size = table_size_for(n_keys)
    mask = size - 1
    table = np.full(size, -1, dtype=np.int64)

    arr = np.frombuffer(ref, dtype=np.uint8).astype(np.uint64)
    h = np.full(n_keys, FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    for j in range(h1m):
        h ^= arr[j : j + n_keys]
        h *= prime
    slots = (h & np.uint64(mask)).astype(np.int64)

    t = table
    for pos in range(n_keys):
        idx = slots[pos]
        while t[idx] != -1:
            idx = (idx + 1) & mask
        t[idx] = pos
    return table


class RefIndex:
    """Immutable k-mer index over one reference."""

    __slots__ = ("reference", "h1m", "table", "max_candidates")

    def __init__(self, reference: bytes, h1m: int, table: np.ndarray, max_candidates: int):
        self.reference = reference
        self.h1m = h1m
        self.table = table
        self.max_candidates = max_candidates

    @classmethod
    def build(cls, reference: bytes, h1m: int, max_candidates: int = MAX_CANDIDATES) -> "RefIndex":
        if h1m < 1:
            raise ConfigError(f"h1m must be >= 1, got {h1m}")
        if len(reference) < h1m:
            raise ConfigError(
                f"reference ({len(reference)} symbols) shorter than h1m ({h1m})"
            )
        k = backend.kernels()
        if k is not None:
            table = k.build_ref_table(reference, h1m)
        else:
            table = _build_table_py(reference, h1m)
        return cls(reference, h1m, table, max_candidates)

    @property
    def table_size(self) -> int:
        return len(self.table)

    @property
    def n_keys(self) -> int:
        return len(self.reference) - self.h1m + 1

    def longest_match(self, seq: bytes, pos: int) -> tuple[int, int] | None:
        """Longest reference match for the suffix of seq starting at pos.

        pos is 1-based.  Returns (ref_pos 1-based, length) with length
        >= h1m, smallest ref_pos among equally long candidates, or None
        when no indexed k-mer matches.
        """
        got = self.match0(seq, pos - 1)
        if got is None:
            return None
        return got[0] + 1, got[1]

    def match0(self, seq: bytes, i: int) -> tuple[int, int] | None:
        """Like longest_match but 0-based on both sides."""
        if i < 0 or i + self.h1m > len(seq):
            return None
        k = backend.kernels()
        if k is not None:
            p, ln = k.ref_longest_match(
                self.reference, self.table, self.h1m, self.max_candidates, seq, i
            )
            return (p, ln) if ln > 0 else None
        return self._match_py(seq, i)

    def _match_py(self, seq: bytes, i: int) -> tuple[int, int] | None:
        ref = self.reference
        h1m = self.h1m
        table = self.table
        mask = len(table) - 1
        kmer = seq[i : i + h1m]
        idx = fnv1a(kmer) & mask
        best_pos = -1
        best_len = 0
        checked = 0
        while True:
            p = int(table[idx])
            if p == -1:
                break
            if ref[p : p + h1m] == kmer:
                ln = h1m + lce(seq, i + h1m, ref, p + h1m)
                if ln > best_len or (ln == best_len and p < best_pos):
                    best_pos = p
                    best_len = ln
                checked += 1
                if checked >= self.max_candidates:
                    break
            idx = (idx + 1) & mask
        if best_len == 0:
            return None
        return best_pos, best_len
