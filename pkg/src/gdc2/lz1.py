"""Level 1: factor a sequence against the reference.

Greedy parse: at each position either the longest indexed reference
match of length >= h1m, or a single literal.  While the previous
element is a match, small variants are checked first, in fixed order
(substitution, 1-symbol insertion, 1-symbol deletion, then the
2-symbol forms when enabled); the first variant whose resumed match
reaches h1e symbols wins over a fresh index query.  A deletion emits
no literal, only the resumed match.

Origin codes record how each element was produced so tests can replay
the parse decisions:

  0 literal after a failed fresh query
  1 fresh match from the index
  2 match resumed after a variant check
  3 literal emitted by a substitution/insertion variant
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import CorruptArchiveError
from .model import LITERAL, MATCH1, L1Tuple, pack_l1, unpack_l1
from .refindex import RefIndex, lce

ORIGIN_LITERAL = 0
ORIGIN_FRESH = 1
ORIGIN_CONT_MATCH = 2
ORIGIN_CONT_LITERAL = 3


def factor_packed(seq: bytes, idx: RefIndex, h1e: int, indel2: bool):
    """Factor seq, returning packed arrays (kinds, f0, f1, origins)."""
    k = backend.kernels()
    if k is not None:
        return k.lz1_factor(idx.reference, idx.table, idx.h1m, h1e, idx.max_candidates, indel2, seq)
    return _factor_py(seq, idx, h1e, indel2)


def _factor_py(seq: bytes, idx: RefIndex, h1e: int, indel2: bool):
    ref = idx.reference
    n = len(seq)
    kinds: list[int] = []
    f0: list[int] = []
    f1: list[int] = []
    origins: list[int] = []

    def emit_lit(sym: int, origin: int) -> None:
        kinds.append(LITERAL)
        f0.append(sym)
        f1.append(1)
        origins.append(origin)

    def emit_match(pos0: int, length: int, origin: int) -> None:
        kinds.append(MATCH1)
        f0.append(pos0 + 1)
        f1.append(length)
        origins.append(origin)

    i = 0
    rc = 0  # next reference position after the last match
    in_match = False
    while i < n:
        if in_match:
            # substitution: S[i] and R[rc] differ, match resumes past both
            ln = lce(seq, i + 1, ref, rc + 1)
            if ln >= h1e:
                emit_lit(seq[i], ORIGIN_CONT_LITERAL)
                emit_match(rc + 1, ln, ORIGIN_CONT_MATCH)
                i += 1 + ln
                rc += 1 + ln
                continue
            # insertion of S[i], match resumes at the same reference spot
            ln = lce(seq, i + 1, ref, rc)
            if ln >= h1e:
                emit_lit(seq[i], ORIGIN_CONT_LITERAL)
                emit_match(rc, ln, ORIGIN_CONT_MATCH)
                i += 1 + ln
                rc += ln
                continue
            # deletion of R[rc], nothing emitted for the lost symbol
            ln = lce(seq, i, ref, rc + 1)
            if ln >= h1e:
                emit_match(rc + 1, ln, ORIGIN_CONT_MATCH)
                i += ln
                rc += 1 + ln
                continue
            if indel2:
                # ln >= 1 implies i + 2 < n, so seq[i + 1] exists
                ln = lce(seq, i + 2, ref, rc)
                if ln >= h1e:
                    emit_lit(seq[i], ORIGIN_CONT_LITERAL)
                    emit_lit(seq[i + 1], ORIGIN_CONT_LITERAL)
                    emit_match(rc, ln, ORIGIN_CONT_MATCH)
                    i += 2 + ln
                    rc += ln
                    continue
                ln = lce(seq, i, ref, rc + 2)
                if ln >= h1e:
                    emit_match(rc + 2, ln, ORIGIN_CONT_MATCH)
                    i += ln
                    rc += 2 + ln
                    continue
        got = idx.match0(seq, i)
        if got is not None:
            p, ln = got
            emit_match(p, ln, ORIGIN_FRESH)
            i += ln
            rc = p + ln
            in_match = True
        else:
            emit_lit(seq[i], ORIGIN_LITERAL)
            i += 1
            in_match = False

    return (
        np.array(kinds, dtype=np.uint8),
        np.array(f0, dtype=np.int64),
        np.array(f1, dtype=np.int64),
        np.array(origins, dtype=np.uint8),
    )


def factor(seq: bytes, idx: RefIndex, h1e: int, indel2: bool = False) -> list[L1Tuple]:
    kinds, f0, f1, _ = factor_packed(seq, idx, h1e, indel2)
    return unpack_l1(kinds, f0, f1)


def expand_packed(kinds: np.ndarray, f0: np.ndarray, f1: np.ndarray, ref: bytes, out_len: int | None = None) -> bytes:
    """Rebuild the raw symbols of a packed level-1 stream."""
    k = backend.kernels()
    if k is not None:
        return k.lz1_expand(kinds, f0, f1, ref, -1 if out_len is None else out_len)
    nref = len(ref)
    parts: list[bytes] = []
    total = 0
    for t in range(len(kinds)):
        if kinds[t] == LITERAL:
            parts.append(bytes([f0[t]]))
            total += 1
        else:
            pos0 = int(f0[t]) - 1
            ln = int(f1[t])
            if pos0 < 0 or ln < 1 or pos0 + ln > nref:
                raise CorruptArchiveError(
                    f"match ({pos0 + 1}, {ln}) outside reference of {nref} symbols"
                )
            parts.append(ref[pos0 : pos0 + ln])
            total += ln
    if out_len is not None and total != out_len:
        raise CorruptArchiveError(f"expanded to {total} symbols, expected {out_len}")
    return b"".join(parts)


def expand(tuples: list[L1Tuple], ref: bytes) -> bytes:
    kinds, f0, f1 = pack_l1(tuples)
    return expand_packed(kinds, f0, f1, ref)
