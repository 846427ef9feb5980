"""Core value types and the packed array representation of tuple streams.

Factoring output is held in parallel numpy arrays rather than lists of
objects: a stream of T elements is (kinds, f0, f1[, f2]) where kinds is
uint8 and the payload columns are int64.  Per element:

  kind LITERAL: f0 = symbol byte, f1 = 1 (symbol coverage), f2 = 0
  kind MATCH1:  f0 = reference position (1-based), f1 = length, f2 = 0
  kind MATCH2:  f0 = source stream ordinal u, f1 = tuple position p
                (1-based), f2 = tuple count

f1 doubles as per-element symbol coverage for LITERAL/MATCH1 rows, so
coverage prefix sums are a plain cumsum.  The dataclass forms below are
the convenient API for small inputs and tests; everything hot works on
the arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError

LITERAL = 0
MATCH1 = 1
MATCH2 = 2


@dataclass(frozen=True)
class Params:
    """Compression parameters.

    h1m: minimum length for a fresh level-1 match.
    h1e: minimum length for a match resumed after a variant check.
    h2: minimum weight of a level-2 match.
    indel2: also check two-symbol insertions/deletions when resuming.
    ref_fraction: fraction of the collection whose tuple streams are
        indexed for level 2 (the first ceil(f*n) in processing order).
    l1_workers: number of level-1 factoring threads.
    """

    h1m: int = 15
    h1e: int = 4
    h2: int = 11
    literal_weight: int = 1
    match_weight: int = 7
    indel2: bool = False
    ref_fraction: Fraction = Fraction(1)
    l1_workers: int = 3

    def __post_init__(self):
        if self.h1m < 1:
            raise ConfigError(f"h1m must be >= 1, got {self.h1m}")
        if self.h1e < 1:
            raise ConfigError(f"h1e must be >= 1, got {self.h1e}")
        if self.h1e > self.h1m:
            raise ConfigError(f"h1e ({self.h1e}) must not exceed h1m ({self.h1m})")
        if self.h2 < 1:
            raise ConfigError(f"h2 must be >= 1, got {self.h2}")
        if self.literal_weight < 1 or self.match_weight < 1:
            raise ConfigError("element weights must be >= 1")
        f = self.ref_fraction
        if not isinstance(f, Fraction):
            raise ConfigError("ref_fraction must be a Fraction")
        if not (0 < f <= 1):
            raise ConfigError(f"ref_fraction must be in (0, 1], got {f}")
        if self.l1_workers < 1:
            raise ConfigError("l1_workers must be >= 1")

    def ref_limit(self, n: int) -> int:
        """Number of streams indexed for level 2 in a collection of n."""
        return math.ceil(self.ref_fraction * n)


@dataclass(frozen=True)
class Sequence:
    """One sequence of the collection, symbols as raw bytes."""

    id: str
    ordinal: int
    symbols: bytes
    source_file: str = ""
    line_width: int = 60


@dataclass(frozen=True)
class L1Tuple:
    """Level-1 element: a literal symbol or a reference match."""

    kind: int
    symbol: int = 0
    ref_pos: int = 0  # 1-based
    length: int = 0

    @classmethod
    def lit(cls, symbol: int) -> "L1Tuple":
        return cls(LITERAL, symbol=symbol)

    @classmethod
    def match(cls, ref_pos: int, length: int) -> "L1Tuple":
        return cls(MATCH1, ref_pos=ref_pos, length=length)

    @property
    def coverage(self) -> int:
        return 1 if self.kind == LITERAL else self.length


@dataclass(frozen=True)
class L2Element:
    """Level-2 element: a passed-through level-1 tuple or a stream match."""

    kind: int
    inner: L1Tuple | None = None
    seq_id: int = 0  # ordinal u of the source stream
    tuple_pos: int = 0  # 1-based position in L^u
    tuple_len: int = 0

    @classmethod
    def passthrough(cls, t: L1Tuple) -> "L2Element":
        return cls(t.kind, inner=t)

    @classmethod
    def match(cls, u: int, p: int, n: int) -> "L2Element":
        return cls(MATCH2, seq_id=u, tuple_pos=p, tuple_len=n)


@dataclass(frozen=True)
class StoredStream:
    """A level-1 stream retained for level-2 matching.

    prefix[i] = symbols covered by the first i tuples, prefix[0] = 0.
    """

    kinds: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    prefix: np.ndarray

    @property
    def tuple_count(self) -> int:
        return len(self.kinds)


def coverage_prefix(f1: np.ndarray) -> np.ndarray:
    """Symbol-coverage prefix sums of a packed level-1 stream."""
    out = np.empty(len(f1) + 1, dtype=np.int64)
    out[0] = 0
    np.cumsum(f1, out=out[1:])
    return out


def make_stored(kinds: np.ndarray, f0: np.ndarray, f1: np.ndarray) -> StoredStream:
    return StoredStream(kinds, f0, f1, coverage_prefix(f1))


def weight(tuples, params: Params) -> int:
    """Total weight of a run of level-1 tuples."""
    w = 0
    for t in tuples:
        w += params.literal_weight if t.kind == LITERAL else params.match_weight
    return w


def symbol_coverage(elems, store: dict[int, StoredStream]) -> int:
    """Symbols a run of level-2 elements expands to.

    store must contain every stream ordinal referenced by a MATCH2.
    """
    total = 0
    for e in elems:
        if e.kind == MATCH2:
            p = store[e.seq_id].prefix
            total += int(p[e.tuple_pos + e.tuple_len - 1] - p[e.tuple_pos - 1])
        elif e.kind == MATCH1:
            total += e.inner.length
        else:
            total += 1
    return total


def pack_l1(tuples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(tuples)
    kinds = np.empty(n, dtype=np.uint8)
    f0 = np.empty(n, dtype=np.int64)
    f1 = np.empty(n, dtype=np.int64)
    for i, t in enumerate(tuples):
        kinds[i] = t.kind
        if t.kind == LITERAL:
            f0[i] = t.symbol
            f1[i] = 1
        else:
            f0[i] = t.ref_pos
            f1[i] = t.length
    return kinds, f0, f1


def unpack_l1(kinds: np.ndarray, f0: np.ndarray, f1: np.ndarray) -> list[L1Tuple]:
    out = []
    for i in range(len(kinds)):
        if kinds[i] == LITERAL:
            out.append(L1Tuple.lit(int(f0[i])))
        else:
            out.append(L1Tuple.match(int(f0[i]), int(f1[i])))
    return out


def pack_l2(elems) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n = len(elems)
    kinds = np.empty(n, dtype=np.uint8)
    e0 = np.empty(n, dtype=np.int64)
    e1 = np.empty(n, dtype=np.int64)
    e2 = np.zeros(n, dtype=np.int64)
    for i, e in enumerate(elems):
        kinds[i] = e.kind
        if e.kind == MATCH2:
            e0[i] = e.seq_id
            e1[i] = e.tuple_pos
            e2[i] = e.tuple_len
        elif e.kind == LITERAL:
            e0[i] = e.inner.symbol
            e1[i] = 1
        else:
            e0[i] = e.inner.ref_pos
            e1[i] = e.inner.length
    return kinds, e0, e1, e2


def unpack_l2(kinds, e0, e1, e2) -> list[L2Element]:
    out = []
    for i in range(len(kinds)):
        k = int(kinds[i])
        if k == MATCH2:
            out.append(L2Element.match(int(e0[i]), int(e1[i]), int(e2[i])))
        elif k == LITERAL:
            out.append(L2Element.passthrough(L1Tuple.lit(int(e0[i]))))
        else:
            out.append(L2Element.passthrough(L1Tuple.match(int(e0[i]), int(e1[i]))))
    return out
