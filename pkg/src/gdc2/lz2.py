"""Level 2: factor tuple streams against previously indexed streams.

Every position of an indexed stream contributes one key: the shortest
run of tuples starting there whose weight (literal_weight per literal,
match_weight per match) reaches h2.  Keys are hashed over a canonical
byte serialization of the tuples; candidates found by probing are
verified tuple by tuple and extended as far as the streams stay equal.
The best candidate is the one with the largest matched weight, ties
broken by smaller source ordinal, then smaller tuple position.

Streams are inserted in ordinal order and positions in ascending
order; the table grows by doubling before a stream is added, re-adding
old entries in their original insertion order.  Both rules exist so
the pure and compiled backends keep identical tables and therefore
identical output.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import CorruptArchiveError, Gdc2Error
from .hashing import FNV_OFFSET, fnv1a
from .model import (
    LITERAL,
    MATCH2,
    L2Element,
    StoredStream,
    make_stored,
    pack_l1,
    pack_l2,
    unpack_l2,
)

TUPLE_CAND_CAP = 64
START_SIZE = 1024


def serialize_tuple(kind: int, a: int, b: int) -> bytes:
    """Canonical bytes of one level-1 tuple, used only for hashing."""
    if kind == LITERAL:
        return bytes((LITERAL, a))
    return b"\x01" + a.to_bytes(8, "little") + b.to_bytes(4, "little")


def _serials(kinds, f0, f1) -> list[bytes]:
    return [
        serialize_tuple(int(kinds[i]), int(f0[i]), int(f1[i]))
        for i in range(len(kinds))
    ]


def _weight_prefix(kinds: np.ndarray, wlit: int, wmat: int) -> np.ndarray:
    w = np.where(kinds == LITERAL, np.int64(wlit), np.int64(wmat))
    out = np.empty(len(kinds) + 1, dtype=np.int64)
    out[0] = 0
    np.cumsum(w, out=out[1:])
    return out


def _key_ends(wprefix: np.ndarray, h2: int) -> np.ndarray:
    """key_ends[i] = end index of the key starting at tuple i.

    A value > T means no run starting at i reaches weight h2.
    """
    t = len(wprefix) - 1
    return np.searchsorted(wprefix, wprefix[:t] + h2, side="left")


def _equal_run(ak, a0, a1, i, bk, b0, b1, j, limit) -> int:
    """Length of the longest equal tuple run, capped at limit."""
    n = 0
    step = 256
    while n < limit:
        m = min(step, limit - n)
        eq = (
            (ak[i + n : i + n + m] == bk[j + n : j + n + m])
            & (a0[i + n : i + n + m] == b0[j + n : j + n + m])
            & (a1[i + n : i + n + m] == b1[j + n : j + n + m])
        )
        if eq.all():
            n += m
            continue
        return n + int(np.argmin(eq))
    return n


class _PyTupleTable:
    """Pure-Python tuple-substring hash table."""

    def __init__(self, h2: int, wlit: int, wmat: int):
        self.h2 = h2
        self.wlit = wlit
        self.wmat = wmat
        self.size = START_SIZE
        self.mask = START_SIZE - 1
        self.table = np.full(START_SIZE, -1, dtype=np.int64)
        self.count = 0
        self.entry_hash: list[int] = []
        self.entry_val: list[int] = []
        self.store: dict[int, tuple] = {}  # u -> (kinds, f0, f1)

    @property
    def table_size(self) -> int:
        return self.size

    @property
    def entry_count(self) -> int:
        return self.count

    def _insert(self, h: int, val: int) -> None:
        idx = h & self.mask
        t = self.table
        while t[idx] != -1:
            idx = (idx + 1) & self.mask
        t[idx] = val

    def _grow_for(self, extra: int) -> None:
        size = self.size
        while (self.count + extra) * 10 > size * 7:
            size <<= 1
        if size == self.size:
            return
        self.size = size
        self.mask = size - 1
        self.table = np.full(size, -1, dtype=np.int64)
        for h, v in zip(self.entry_hash, self.entry_val):
            self._insert(h, v)

    def add_stream(self, u: int, kinds, f0, f1) -> None:
        self.store[u] = (kinds, f0, f1)
        serials = _serials(kinds, f0, f1)
        wprefix = _weight_prefix(kinds, self.wlit, self.wmat)
        ends = _key_ends(wprefix, self.h2)
        t = len(kinds)
        new: list[tuple[int, int]] = []
        for i in range(t):
            end = int(ends[i])
            if end > t:
                break  # later suffixes are lighter still
            h = FNV_OFFSET
            for j in range(i, end):
                h = fnv1a(serials[j], h)
            new.append((h, (u << 32) | i))
        self._grow_for(len(new))
        for h, v in new:
            self.entry_hash.append(h)
            self.entry_val.append(v)
            self._insert(h, v)
        self.count += len(new)

    def factor(self, kinds, f0, f1):
        t_cur = len(kinds)
        serials = _serials(kinds, f0, f1)
        wprefix = _weight_prefix(kinds, self.wlit, self.wmat)
        ends = _key_ends(wprefix, self.h2)
        table = self.table
        mask = self.mask
        store = self.store

        out_kinds = np.empty(t_cur, dtype=np.uint8)
        out_e0 = np.empty(t_cur, dtype=np.int64)
        out_e1 = np.empty(t_cur, dtype=np.int64)
        out_e2 = np.zeros(t_cur, dtype=np.int64)
        n_out = 0

        i = 0
        while i < t_cur:
            best_w = -1
            best_u = 0
            best_p0 = 0
            best_run = 0
            end = int(ends[i])
            if end <= t_cur:
                key_len = end - i
                h = FNV_OFFSET
                for j in range(i, end):
                    h = fnv1a(serials[j], h)
                idx = h & mask
                checked = 0
                while table[idx] != -1:
                    val = int(table[idx])
                    idx = (idx + 1) & mask
                    u = val >> 32
                    p0 = val & 0xFFFFFFFF
                    uk, u0, u1 = store[u]
                    limit = min(t_cur - i, len(uk) - p0)
                    if limit < key_len:
                        continue
                    run = _equal_run(kinds, f0, f1, i, uk, u0, u1, p0, limit)
                    if run < key_len:
                        continue
                    w = int(wprefix[i + run] - wprefix[i])
                    if (
                        w > best_w
                        or (w == best_w and u < best_u)
                        or (w == best_w and u == best_u and p0 < best_p0)
                    ):
                        best_w, best_u, best_p0, best_run = w, u, p0, run
                    checked += 1
                    if checked >= TUPLE_CAND_CAP:
                        break
            if best_w >= 0:
                out_kinds[n_out] = MATCH2
                out_e0[n_out] = best_u
                out_e1[n_out] = best_p0 + 1
                out_e2[n_out] = best_run
                n_out += 1
                i += best_run
            else:
                out_kinds[n_out] = kinds[i]
                out_e0[n_out] = f0[i]
                out_e1[n_out] = f1[i]
                n_out += 1
                i += 1

        return (
            out_kinds[:n_out].copy(),
            out_e0[:n_out].copy(),
            out_e1[:n_out].copy(),
            out_e2[:n_out].copy(),
        )


class TupleIndex:
    """Level-2 index plus the retained streams it refers to."""

    def __init__(self, h2: int, literal_weight: int, match_weight: int):
        self.h2 = h2
        self.literal_weight = literal_weight
        self.match_weight = match_weight
        self.store: dict[int, StoredStream] = {}
        k = backend.kernels()
        if k is not None:
            self._impl = k.TupleTable(h2, literal_weight, match_weight)
        else:
            self._impl = _PyTupleTable(h2, literal_weight, match_weight)

    @property
    def table_size(self) -> int:
        return self._impl.table_size

    @property
    def entry_count(self) -> int:
        return self._impl.entry_count

    @property
    def prefix_map(self) -> dict[int, np.ndarray]:
        return {u: s.prefix for u, s in self.store.items()}

    def add_reference(self, u: int, kinds, f0, f1) -> None:
        if u < 1:
            raise Gdc2Error(f"stream ordinal must be >= 1, got {u}")
        if u in self.store:
            raise Gdc2Error(f"stream {u} already indexed")
        self.store[u] = make_stored(kinds, f0, f1)
        self._impl.add_stream(u, kinds, f0, f1)

    def factor(self, kinds, f0, f1):
        return self._impl.factor(kinds, f0, f1)

    def factor_elements(self, tuples) -> list[L2Element]:
        kinds, f0, f1 = pack_l1(tuples)
        return unpack_l2(*self.factor(kinds, f0, f1))


def expand_packed(kinds, e0, e1, e2, store: dict[int, StoredStream]):
    """Rebuild packed level-1 arrays from a packed level-2 stream."""
    matches = np.flatnonzero(kinds == MATCH2)
    if len(matches) == 0:
        return kinds, e0, e1
    parts_k: list[np.ndarray] = []
    parts_0: list[np.ndarray] = []
    parts_1: list[np.ndarray] = []
    prev = 0
    for j in matches:
        j = int(j)
        if j > prev:
            parts_k.append(kinds[prev:j])
            parts_0.append(e0[prev:j])
            parts_1.append(e1[prev:j])
        u = int(e0[j])
        p0 = int(e1[j]) - 1
        tl = int(e2[j])
        src = store.get(u)
        if src is None:
            raise CorruptArchiveError(f"match refers to stream {u} which is not indexed")
        if p0 < 0 or tl < 1 or p0 + tl > src.tuple_count:
            raise CorruptArchiveError(
                f"match ({u}, {p0 + 1}, {tl}) outside stream of {src.tuple_count} tuples"
            )
        parts_k.append(src.kinds[p0 : p0 + tl])
        parts_0.append(src.f0[p0 : p0 + tl])
        parts_1.append(src.f1[p0 : p0 + tl])
        prev = j + 1
    if prev < len(kinds):
        parts_k.append(kinds[prev:])
        parts_0.append(e0[prev:])
        parts_1.append(e1[prev:])
    return (
        np.concatenate(parts_k),
        np.concatenate(parts_0),
        np.concatenate(parts_1),
    )


def expand(elems: list[L2Element], store: dict[int, StoredStream]):
    from .model import unpack_l1

    kinds, e0, e1, e2 = pack_l2(elems)
    k, f0, f1 = expand_packed(kinds, e0, e1, e2, store)
    return unpack_l1(k, f0, f1)
