"""Entropy coding of tuple streams, the reference and the descriptor.

Tuple streams are coded with a byte-renormalising range coder driven
by adaptive frequency models (counts start at 1, grow by 32, halve
when the total reaches 2^16).  Positions are not coded directly:
both sides maintain identical prediction state, the coder transmits a
class (perfect / near / far) plus a small residual.  All models and
all prediction state are per sequence, so any block can be decoded
knowing only the retained streams it refers to; that is what allows
extraction to skip blocks.

The pure-Python classes here are the behavioural reference; the
compiled kernels reproduce their output byte for byte.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from . import backend
from .errors import CorruptArchiveError, Gdc2Error, UnsupportedInputError
from .fasta import FastaRecordMeta
from .model import LITERAL, MATCH1, MATCH2

TOP = 1 << 24
MODEL_INC = 32
RESCALE_AT = 1 << 16

FLAG_L1_LITERAL = 0
FLAG_L1_MATCH = 1
FLAG_L2_MATCH = 2

MODERATE_ALPHABET = 480  # (|diff| - 16) * 2 + sign for 16 <= |diff| < 256

REF_MAGIC = b"G2RF"
MAX_REF_SYMBOLS = 40


# ---------------------------------------------------------------------------
# range coder


class RangeEncoder:
    __slots__ = ("low", "range", "cache", "cache_size", "out")

    def __init__(self):
        self.low = 0
        self.range = 0xFFFFFFFF
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, start: int, size: int, total: int) -> None:
        r = self.range // total
        self.low += r * start
        self.range = r * size
        while self.range < TOP:
            self._shift_low()
            self.range = (self.range << 8) & 0xFFFFFFFF

    def _shift_low(self) -> None:
        low = self.low
        if low < 0xFF000000 or low > 0xFFFFFFFF:
            carry = low >> 32
            self.out.append((self.cache + carry) & 0xFF)
            if self.cache_size > 1:
                self.out.extend(((0xFF + carry) & 0xFF,) * (self.cache_size - 1))
            self.cache = (low >> 24) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (low << 8) & 0xFFFFFFFF

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    __slots__ = ("data", "pos", "range", "code", "_r")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = 0xFFFFFFFF
        self.code = 0
        self._r = 0
        for _ in range(5):
            self.code = ((self.code << 8) | self._byte()) & 0xFFFFFFFF

    def _byte(self) -> int:
        # reads past the end return 0; a valid stream never needs them
        d = self.data
        p = self.pos
        if p >= len(d):
            return 0
        self.pos = p + 1
        return d[p]

    def get_freq(self, total: int) -> int:
        self._r = self.range // total
        v = self.code // self._r
        return total - 1 if v >= total else v

    def consume(self, start: int, size: int) -> None:
        r = self._r
        self.code -= r * start
        self.range = r * size
        while self.range < TOP:
            self.code = ((self.code << 8) | self._byte()) & 0xFFFFFFFF
            self.range = (self.range << 8) & 0xFFFFFFFF


# ---------------------------------------------------------------------------
# adaptive model (Fenwick tree over symbol counts)


class AdaptiveModel:
    __slots__ = ("n", "counts", "tree", "total", "_highbit")

    def __init__(self, n: int):
        self.n = n
        self.counts = [1] * n
        self.total = n
        self._highbit = 1 << (n.bit_length() - 1)
        self._rebuild()

    def _rebuild(self) -> None:
        n = self.n
        tree = [0] * (n + 1)
        counts = self.counts
        for i in range(1, n + 1):
            tree[i] += counts[i - 1]
            j = i + (i & -i)
            if j <= n:
                tree[j] += tree[i]
        self.tree = tree

    def _cum(self, sym: int) -> int:
        s = 0
        tree = self.tree
        i = sym
        while i:
            s += tree[i]
            i -= i & -i
        return s

    def _find(self, v: int) -> tuple[int, int]:
        """Symbol whose interval contains v, and its cumulative start."""
        pos = 0
        rem = v
        bit = self._highbit
        n = self.n
        tree = self.tree
        while bit:
            nxt = pos + bit
            if nxt <= n and tree[nxt] <= rem:
                rem -= tree[nxt]
                pos = nxt
            bit >>= 1
        return pos, v - rem

    def _bump(self, sym: int) -> None:
        self.counts[sym] += MODEL_INC
        tree = self.tree
        n = self.n
        i = sym + 1
        while i <= n:
            tree[i] += MODEL_INC
            i += i & -i
        self.total += MODEL_INC
        if self.total >= RESCALE_AT:
            counts = self.counts
            total = 0
            for k in range(n):
                c = (counts[k] + 1) >> 1
                counts[k] = c
                total += c
            self.total = total
            self._rebuild()

    def encode(self, rc: RangeEncoder, sym: int) -> None:
        rc.encode(self._cum(sym), self.counts[sym], self.total)
        self._bump(sym)

    def decode(self, rc: RangeDecoder) -> int:
        sym, start = self._find(rc.get_freq(self.total))
        rc.consume(start, self.counts[sym])
        self._bump(sym)
        return sym


# ---------------------------------------------------------------------------
# residual classification (shared by encoder, decoder and tests)


def zigzag(v: int) -> int:
    return (v << 1) if v >= 0 else ((-v) << 1) - 1


def unzigzag(z: int) -> int:
    return (z >> 1) if (z & 1) == 0 else -((z + 1) >> 1)


def _le_bytes(v: int, n: int) -> tuple[int, ...]:
    return tuple((v >> (8 * k)) & 0xFF for k in range(n))


def _from_le(payload) -> int:
    v = 0
    for k, b in enumerate(payload):
        v |= b << (8 * k)
    return v


def classify_l1_rel(rel: int) -> tuple[int, tuple[int, ...]]:
    if rel == 0:
        return 0, ()
    if -64 < rel < 64:
        return 1, (rel + 64,)
    if not -(1 << 31) < rel < (1 << 31):
        raise UnsupportedInputError(f"match position residual {rel} out of range")
    return 2, _le_bytes(zigzag(rel), 4)


def l1_rel_payload_len(cls: int) -> int:
    return (0, 1, 4)[cls]


def rebuild_l1_rel(cls: int, payload) -> int:
    if cls == 0:
        return 0
    if cls == 1:
        return payload[0] - 64
    return unzigzag(_from_le(payload))


def classify_l1_len(ln: int) -> tuple[int, tuple[int, ...]]:
    if ln <= 256:
        return 0, (ln - 1,)
    if ln <= 65792:
        return 1, _le_bytes(ln - 257, 2)
    if ln - 1 >= (1 << 32):
        raise UnsupportedInputError(f"match length {ln} out of range")
    return 2, _le_bytes(ln - 1, 4)


def l1_len_payload_len(cls: int) -> int:
    return (1, 2, 4)[cls]


def rebuild_l1_len(cls: int, payload) -> int:
    if cls == 0:
        return payload[0] + 1
    if cls == 1:
        return _from_le(payload) + 257
    return _from_le(payload) + 1


def classify_l2_diff(diff: int) -> tuple[int, tuple[int, ...]]:
    if diff == 0:
        return 0, ()
    a = -diff if diff < 0 else diff
    if a < 16:
        return 1, (diff + 16,)
    if a < 256:
        return 2, ((a - 16) * 2 + (1 if diff < 0 else 0),)
    if not -(1 << 31) < diff < (1 << 31):
        raise UnsupportedInputError(f"tuple position residual {diff} out of range")
    return 3, _le_bytes(zigzag(diff), 4)


def l2_diff_payload_len(cls: int) -> int:
    return (0, 1, 1, 4)[cls]


def rebuild_l2_diff(cls: int, payload) -> int:
    if cls == 0:
        return 0
    if cls == 1:
        return payload[0] - 16
    if cls == 2:
        a = (payload[0] >> 1) + 16
        return -a if payload[0] & 1 else a
    return unzigzag(_from_le(payload))


def classify_l2_len(tl: int) -> tuple[int, tuple[int, ...]]:
    if tl <= 16:
        return 0, (tl - 1,)
    if tl <= 48:
        return 1, (tl - 17,)
    if tl <= 176:
        return 2, (tl - 49,)
    if tl <= 432:
        return 3, (tl - 177,)
    if tl - 433 >= (1 << 32):
        raise UnsupportedInputError(f"tuple run length {tl} out of range")
    return 4, _le_bytes(tl - 433, 4)


def l2_len_payload_len(cls: int) -> int:
    return (1, 1, 1, 1, 4)[cls]


def rebuild_l2_len(cls: int, payload) -> int:
    if cls == 0:
        return payload[0] + 1
    if cls == 1:
        return payload[0] + 17
    if cls == 2:
        return payload[0] + 49
    if cls == 3:
        return payload[0] + 177
    return _from_le(payload) + 433


# ---------------------------------------------------------------------------
# prediction state


class PredictionState:
    __slots__ = (
        "flag2",
        "flag1",
        "prev_lit",
        "last_pos",
        "last_len",
        "lits_since",
        "l2_syms",
        "done",
        "aux",
    )

    def __init__(self):
        self.flag2 = FLAG_L1_LITERAL
        self.flag1 = FLAG_L1_LITERAL
        self.prev_lit = 0
        self.last_pos = 1
        self.last_len = 0
        self.lits_since = 0
        self.l2_syms = 0
        self.done = 0  # symbols represented so far
        self.aux = {}  # u -> (last tuple_pos, symbols done before that match)


def predict_l1_pos(st: PredictionState) -> int:
    return st.last_pos + st.last_len + st.lits_since + st.l2_syms


def predict_l2_pos(st: PredictionState, u: int, prefix: np.ndarray) -> int:
    p_last, s_last = st.aux.get(u, (1, 0))
    target = int(prefix[p_last - 1]) + (st.done - s_last)
    t = int(np.searchsorted(prefix, target, side="right")) - 1
    return t + 1


class _Models:
    __slots__ = (
        "flag",
        "lit",
        "l1p_cls",
        "l1p_good",
        "l1p_poor",
        "l1l_cls",
        "l1l_short",
        "l1l_long",
        "l1l_vlong",
        "id_pre",
        "id_suf",
        "l2p_cls",
        "l2p_good",
        "l2p_mod",
        "l2p_poor",
        "l2l_cls",
        "l2l_pay",
        "l2l_elong",
    )

    def __init__(self):
        self.flag = [AdaptiveModel(3) for _ in range(9)]
        self.lit: list[AdaptiveModel | None] = [None] * 256
        self.l1p_cls = AdaptiveModel(3)
        self.l1p_good = AdaptiveModel(256)
        self.l1p_poor: list[AdaptiveModel | None] = [None] * 4
        self.l1l_cls = AdaptiveModel(3)
        self.l1l_short = AdaptiveModel(256)
        self.l1l_long: list[AdaptiveModel | None] = [None] * 2
        self.l1l_vlong: list[AdaptiveModel | None] = [None] * 4
        self.id_pre = AdaptiveModel(256)
        self.id_suf: list[AdaptiveModel | None] = [None] * 256
        self.l2p_cls = AdaptiveModel(4)
        self.l2p_good = AdaptiveModel(256)
        self.l2p_mod = AdaptiveModel(MODERATE_ALPHABET)
        self.l2p_poor: list[AdaptiveModel | None] = [None] * 4
        self.l2l_cls = AdaptiveModel(5)
        self.l2l_pay = [AdaptiveModel(256) for _ in range(4)]
        self.l2l_elong: list[AdaptiveModel | None] = [None] * 4


def _slot(models: list, idx: int, alphabet: int = 256) -> AdaptiveModel:
    m = models[idx]
    if m is None:
        m = AdaptiveModel(alphabet)
        models[idx] = m
    return m


# ---------------------------------------------------------------------------
# stream codec


class StreamEncoder:
    """Codes one sequence's level-2 stream; state is block local."""

    def __init__(self, prefix_map):
        self.rc = RangeEncoder()
        self.m = _Models()
        self.st = PredictionState()
        self.prefix_map = prefix_map

    def _flag(self, f: int) -> None:
        st = self.st
        self.m.flag[st.flag2 * 3 + st.flag1].encode(self.rc, f)
        st.flag2 = st.flag1
        st.flag1 = f

    def put_literal(self, sym: int) -> None:
        st = self.st
        self._flag(FLAG_L1_LITERAL)
        _slot(self.m.lit, st.prev_lit).encode(self.rc, sym)
        st.prev_lit = sym
        st.lits_since += 1
        st.done += 1

    def put_match1(self, pos: int, ln: int) -> None:
        st = self.st
        m = self.m
        rc = self.rc
        self._flag(FLAG_L1_MATCH)
        cls, payload = classify_l1_rel(predict_l1_pos(st) - pos)
        m.l1p_cls.encode(rc, cls)
        if cls == 1:
            m.l1p_good.encode(rc, payload[0])
        elif cls == 2:
            for k in range(4):
                _slot(m.l1p_poor, k).encode(rc, payload[k])
        cls, payload = classify_l1_len(ln)
        m.l1l_cls.encode(rc, cls)
        if cls == 0:
            m.l1l_short.encode(rc, payload[0])
        elif cls == 1:
            for k in range(2):
                _slot(m.l1l_long, k).encode(rc, payload[k])
        else:
            for k in range(4):
                _slot(m.l1l_vlong, k).encode(rc, payload[k])
        st.last_pos = pos
        st.last_len = ln
        st.lits_since = 0
        st.l2_syms = 0
        st.done += ln

    def put_match2(self, u: int, p: int, tl: int) -> None:
        st = self.st
        m = self.m
        rc = self.rc
        if u < 1 or u > 0xFFFF:
            raise UnsupportedInputError(f"stream ordinal {u} not codable")
        prefix = self.prefix_map.get(u)
        if prefix is None:
            raise Gdc2Error(f"stream {u} referenced before being indexed")
        self._flag(FLAG_L2_MATCH)
        m.id_pre.encode(rc, u >> 8)
        _slot(m.id_suf, u >> 8).encode(rc, u & 0xFF)
        cls, payload = classify_l2_diff(predict_l2_pos(st, u, prefix) - p)
        m.l2p_cls.encode(rc, cls)
        if cls == 1:
            m.l2p_good.encode(rc, payload[0])
        elif cls == 2:
            m.l2p_mod.encode(rc, payload[0])
        elif cls == 3:
            for k in range(4):
                _slot(m.l2p_poor, k).encode(rc, payload[k])
        cls, payload = classify_l2_len(tl)
        m.l2l_cls.encode(rc, cls)
        if cls < 4:
            m.l2l_pay[cls].encode(rc, payload[0])
        else:
            for k in range(4):
                _slot(m.l2l_elong, k).encode(rc, payload[k])
        coverage = int(prefix[p + tl - 1] - prefix[p - 1])
        st.aux[u] = (p, st.done)
        st.l2_syms += coverage
        st.done += coverage

    def put(self, kind: int, a: int, b: int, c: int) -> None:
        if kind == LITERAL:
            self.put_literal(a)
        elif kind == MATCH1:
            self.put_match1(a, b)
        else:
            self.put_match2(a, b, c)

    def finish(self) -> bytes:
        return self.rc.finish()


class StreamDecoder:
    def __init__(self, data: bytes, prefix_map):
        self.rc = RangeDecoder(data)
        self.m = _Models()
        self.st = PredictionState()
        self.prefix_map = prefix_map

    def get(self) -> tuple[int, int, int, int]:
        st = self.st
        m = self.m
        rc = self.rc
        f = m.flag[st.flag2 * 3 + st.flag1].decode(rc)
        st.flag2 = st.flag1
        st.flag1 = f
        if f == FLAG_L1_LITERAL:
            sym = _slot(m.lit, st.prev_lit).decode(rc)
            st.prev_lit = sym
            st.lits_since += 1
            st.done += 1
            return LITERAL, sym, 1, 0
        if f == FLAG_L1_MATCH:
            cls = m.l1p_cls.decode(rc)
            if cls == 0:
                payload = ()
            elif cls == 1:
                payload = (m.l1p_good.decode(rc),)
            else:
                payload = tuple(_slot(m.l1p_poor, k).decode(rc) for k in range(4))
            pos = predict_l1_pos(st) - rebuild_l1_rel(cls, payload)
            cls = m.l1l_cls.decode(rc)
            if cls == 0:
                payload = (m.l1l_short.decode(rc),)
            elif cls == 1:
                payload = tuple(_slot(m.l1l_long, k).decode(rc) for k in range(2))
            else:
                payload = tuple(_slot(m.l1l_vlong, k).decode(rc) for k in range(4))
            ln = rebuild_l1_len(cls, payload)
            if pos < 1:
                raise CorruptArchiveError(f"decoded match position {pos} < 1")
            st.last_pos = pos
            st.last_len = ln
            st.lits_since = 0
            st.l2_syms = 0
            st.done += ln
            return MATCH1, pos, ln, 0
        # level-2 match
        pre = m.id_pre.decode(rc)
        u = (pre << 8) | _slot(m.id_suf, pre).decode(rc)
        prefix = self.prefix_map.get(u)
        if prefix is None:
            raise CorruptArchiveError(f"match refers to stream {u} which is not indexed")
        cls = m.l2p_cls.decode(rc)
        if cls == 0:
            payload = ()
        elif cls == 1:
            payload = (m.l2p_good.decode(rc),)
        elif cls == 2:
            payload = (m.l2p_mod.decode(rc),)
        else:
            payload = tuple(_slot(m.l2p_poor, k).decode(rc) for k in range(4))
        p = predict_l2_pos(st, u, prefix) - rebuild_l2_diff(cls, payload)
        cls = m.l2l_cls.decode(rc)
        if cls < 4:
            payload = (m.l2l_pay[cls].decode(rc),)
        else:
            payload = tuple(_slot(m.l2l_elong, k).decode(rc) for k in range(4))
        tl = rebuild_l2_len(cls, payload)
        if p < 1 or p + tl > len(prefix):
            raise CorruptArchiveError(
                f"decoded tuple match ({u}, {p}, {tl}) outside stream bounds"
            )
        coverage = int(prefix[p + tl - 1] - prefix[p - 1])
        st.aux[u] = (p, st.done)
        st.l2_syms += coverage
        st.done += coverage
        return MATCH2, u, p, tl


def encode_block(kinds, e0, e1, e2, prefix_map) -> bytes:
    """Range-code one packed level-2 stream into a standalone block."""
    for u in prefix_map:
        if not 1 <= u <= 0xFFFF:
            raise UnsupportedInputError(f"stream ordinal {u} out of range")
    k = backend.kernels()
    if k is not None:
        return k.codec_encode_block(kinds, e0, e1, e2, prefix_map)
    enc = StreamEncoder(prefix_map)
    for i in range(len(kinds)):
        enc.put(int(kinds[i]), int(e0[i]), int(e1[i]), int(e2[i]))
    return enc.finish()


def decode_block(data: bytes, count: int, prefix_map):
    """Decode a block of count elements back into packed arrays."""
    k = backend.kernels()
    if k is not None:
        return k.codec_decode_block(data, count, prefix_map)
    dec = StreamDecoder(data, prefix_map)
    kinds = np.empty(count, dtype=np.uint8)
    e0 = np.empty(count, dtype=np.int64)
    e1 = np.empty(count, dtype=np.int64)
    e2 = np.zeros(count, dtype=np.int64)
    for i in range(count):
        kind, a, b, c = dec.get()
        kinds[i] = kind
        e0[i] = a
        e1[i] = b
        e2[i] = c
    return kinds, e0, e1, e2


# ---------------------------------------------------------------------------
# reference coder: three symbols per range-coded token


def encode_reference(ref: bytes) -> bytes:
    arr = np.frombuffer(ref, dtype=np.uint8)
    syms, first = np.unique(arr, return_index=True)
    order = np.argsort(first, kind="stable")
    syms = syms[order]  # first-appearance order
    m = len(syms)
    if m > MAX_REF_SYMBOLS:
        raise UnsupportedInputError(
            f"reference uses {m} distinct symbols, limit is {MAX_REF_SYMBOLS}"
        )
    lut = np.zeros(256, dtype=np.uint8)
    lut[syms] = np.arange(m, dtype=np.uint8)
    codes = lut[arr]
    pad = (-len(codes)) % 3
    if pad:
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)])
    c = codes.reshape(-1, 3).astype(np.int32)
    tokens = c[:, 0] * (m * m) + c[:, 1] * m + c[:, 2]
    k = backend.kernels()
    if k is not None:
        payload = k.triple_encode(tokens, m)
    else:
        model = AdaptiveModel(m * m * m)
        rc = RangeEncoder()
        for t in tokens:
            model.encode(rc, int(t))
        payload = rc.finish()
    head = REF_MAGIC + bytes([m]) + bytes(syms) + struct.pack("<Q", len(ref))
    return head + payload


def decode_reference(data: bytes) -> bytes:
    if len(data) < 5 or data[:4] != REF_MAGIC:
        raise CorruptArchiveError("bad reference stream magic")
    m = data[4]
    if not 1 <= m <= MAX_REF_SYMBOLS:
        raise CorruptArchiveError(f"reference symbol table size {m} invalid")
    if len(data) < 5 + m + 8:
        raise CorruptArchiveError("reference stream header truncated")
    syms = np.frombuffer(data[5 : 5 + m], dtype=np.uint8)
    (n,) = struct.unpack_from("<Q", data, 5 + m)
    payload = data[5 + m + 8 :]
    n_tokens = (n + 2) // 3
    k = backend.kernels()
    if k is not None:
        tokens = k.triple_decode(payload, m, n_tokens)
    else:
        model = AdaptiveModel(m * m * m)
        rc = RangeDecoder(payload)
        tokens = np.empty(n_tokens, dtype=np.int32)
        for i in range(n_tokens):
            tokens[i] = model.decode(rc)
    codes = np.empty(n_tokens * 3, dtype=np.uint8)
    codes[0::3] = tokens // (m * m)
    codes[1::3] = (tokens // m) % m
    codes[2::3] = tokens % m
    return np.asarray(syms)[codes[:n]].tobytes()


# ---------------------------------------------------------------------------
# descriptor coder


def encode_descriptor(metas: list[FastaRecordMeta]) -> bytes:
    if not metas:
        raise Gdc2Error("cannot archive an empty collection")
    buf = bytearray(struct.pack("<I", len(metas)))
    for meta in metas:
        fn = meta.file_name.encode("utf-8")
        sid = meta.seq_id.encode("latin-1")
        if len(fn) > 0xFFFF or len(sid) > 0xFFFF:
            raise UnsupportedInputError("file name or sequence id longer than 65535 bytes")
        buf += struct.pack("<H", len(fn))
        buf += fn
        buf += struct.pack("<H", len(sid))
        buf += sid
        buf += struct.pack("<QII", meta.seq_len, meta.line_width, meta.archive_ordinal)
    comp = zlib.compressobj(9, zlib.DEFLATED, -15)
    return comp.compress(bytes(buf)) + comp.flush()


def decode_descriptor(data: bytes) -> list[FastaRecordMeta]:
    try:
        raw = zlib.decompress(data, -15)
    except zlib.error as exc:
        raise CorruptArchiveError(f"descriptor does not inflate: {exc}") from None
    try:
        (n,) = struct.unpack_from("<I", raw, 0)
        off = 4
        metas = []
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", raw, off)
            off += 2
            fn = raw[off : off + ln].decode("utf-8")
            off += ln
            (ln,) = struct.unpack_from("<H", raw, off)
            off += 2
            sid = raw[off : off + ln].decode("latin-1")
            off += ln
            seq_len, width, ordinal = struct.unpack_from("<QII", raw, off)
            off += 16
            metas.append(FastaRecordMeta(fn, sid, seq_len, width, ordinal))
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptArchiveError(f"descriptor is malformed: {exc}") from None
    if off != len(raw):
        raise CorruptArchiveError("descriptor has trailing bytes")
    if not metas:
        raise CorruptArchiveError("descriptor lists no sequences")
    return metas
