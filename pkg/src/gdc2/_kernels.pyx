# cython: language_level=3
"""Compiled kernels: hash tables, factoring and the block codec.

Every routine here reproduces the output of its pure-Python
counterpart byte for byte; the test suite compares them directly.
Keep the two in lockstep when touching either side.
"""

import numpy as np

cimport numpy as cnp
from cpython.bytes cimport PyBytes_FromStringAndSize
from libc.stdlib cimport calloc, free, malloc, realloc
from libc.string cimport memcmp, memcpy, memset

cnp.import_array()

ctypedef unsigned long long u64
ctypedef long long i64
ctypedef unsigned int u32
ctypedef unsigned char u8

cdef u64 FNV_OFFSET = 0xCBF29CE484222325ULL
cdef u64 FNV_PRIME = 0x100000001B3ULL

cdef enum:
    TOP = 1 << 24
    MODEL_INC = 32
    RESCALE_AT = 1 << 16
    CAND_CAP = 64
    MAX_U = 1 << 16
    MODERATE_ALPHABET = 480

cdef enum:
    KIND_LITERAL = 0
    KIND_MATCH1 = 1
    KIND_MATCH2 = 2

cdef enum:
    ORIGIN_LITERAL = 0
    ORIGIN_FRESH = 1
    ORIGIN_CONT_MATCH = 2
    ORIGIN_CONT_LITERAL = 3

cdef enum:
    ERR_NONE = 0
    ERR_MEMORY = 1
    ERR_RANGE = 2
    ERR_MISSING_STREAM = 3
    ERR_BOUNDS = 4


# ---------------------------------------------------------------------------
# shared helpers

cdef inline u64 _hash_bytes(const u8* p, Py_ssize_t n) noexcept nogil:
    cdef u64 h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ p[i]) * FNV_PRIME
    return h


cdef inline Py_ssize_t _lce(const u8* a, Py_ssize_t i, Py_ssize_t la,
                            const u8* b, Py_ssize_t j, Py_ssize_t lb) noexcept nogil:
    cdef Py_ssize_t n = 0
    cdef Py_ssize_t rem = la - i
    if lb - j < rem:
        rem = lb - j
    while n + 8 <= rem and memcmp(a + i + n, b + j + n, 8) == 0:
        n += 8
    while n < rem and a[i + n] == b[j + n]:
        n += 1
    return n


cdef inline Py_ssize_t _pow2_for(Py_ssize_t n_keys, Py_ssize_t start) noexcept nogil:
    cdef Py_ssize_t size = start
    while n_keys * 10 > size * 7:
        size <<= 1
    return size


# ---------------------------------------------------------------------------
# reference k-mer index

def build_ref_table(const u8[::1] ref, int h1m):
    cdef Py_ssize_t n_keys = ref.shape[0] - h1m + 1
    cdef Py_ssize_t size = _pow2_for(n_keys, 2)
    cdef cnp.ndarray out = np.full(size, -1, dtype=np.int64)
    cdef i64[::1] table = out
    cdef Py_ssize_t mask = size - 1
    cdef Py_ssize_t pos, idx
    with nogil:
        for pos in range(n_keys):
            idx = _hash_bytes(&ref[pos], h1m) & mask
            while table[idx] != -1:
                idx = (idx + 1) & mask
            table[idx] = pos
    return out


cdef inline void _ref_query(const u8* ref, Py_ssize_t nref, const i64* table,
                            Py_ssize_t mask, int h1m, long max_cand,
                            const u8* seq, Py_ssize_t nseq, Py_ssize_t i,
                            Py_ssize_t* out_pos, Py_ssize_t* out_len) noexcept nogil:
    cdef Py_ssize_t best_pos = -1, best_len = 0
    cdef Py_ssize_t idx, p, ln
    cdef long checked = 0
    idx = _hash_bytes(seq + i, h1m) & mask
    while table[idx] != -1:
        p = table[idx]
        if memcmp(seq + i, ref + p, h1m) == 0:
            ln = h1m + _lce(seq, i + h1m, nseq, ref, p + h1m, nref)
            if ln > best_len or (ln == best_len and p < best_pos):
                best_pos = p
                best_len = ln
            checked += 1
            if checked >= max_cand:
                break
        idx = (idx + 1) & mask
    out_pos[0] = best_pos
    out_len[0] = best_len


def ref_longest_match(const u8[::1] ref, i64[::1] table, int h1m,
                      long max_cand, const u8[::1] seq, long i):
    cdef Py_ssize_t pos = -1, ln = 0
    if i + h1m <= seq.shape[0]:
        with nogil:
            _ref_query(&ref[0], ref.shape[0], &table[0], table.shape[0] - 1,
                       h1m, max_cand, &seq[0], seq.shape[0], i, &pos, &ln)
    return pos, ln


# ---------------------------------------------------------------------------
# level-1 factoring

cdef struct _L1Out:
    u8* kinds
    i64* f0
    i64* f1
    u8* orig
    Py_ssize_t cnt
    Py_ssize_t cap


cdef inline bint _l1_grow(_L1Out* o) noexcept nogil:
    o.cap <<= 1
    o.kinds = <u8*> realloc(o.kinds, o.cap)
    o.f0 = <i64*> realloc(o.f0, o.cap * sizeof(i64))
    o.f1 = <i64*> realloc(o.f1, o.cap * sizeof(i64))
    o.orig = <u8*> realloc(o.orig, o.cap)
    return o.kinds != NULL and o.f0 != NULL and o.f1 != NULL and o.orig != NULL


cdef inline bint _l1_lit(_L1Out* o, u8 sym, u8 origin) noexcept nogil:
    if o.cnt == o.cap and not _l1_grow(o):
        return False
    o.kinds[o.cnt] = KIND_LITERAL
    o.f0[o.cnt] = sym
    o.f1[o.cnt] = 1
    o.orig[o.cnt] = origin
    o.cnt += 1
    return True


cdef inline bint _l1_match(_L1Out* o, Py_ssize_t pos0, Py_ssize_t ln, u8 origin) noexcept nogil:
    if o.cnt == o.cap and not _l1_grow(o):
        return False
    o.kinds[o.cnt] = KIND_MATCH1
    o.f0[o.cnt] = pos0 + 1
    o.f1[o.cnt] = ln
    o.orig[o.cnt] = origin
    o.cnt += 1
    return True


def lz1_factor(const u8[::1] ref, i64[::1] table, int h1m, int h1e,
               long max_cand, bint indel2, const u8[::1] seq):
    cdef Py_ssize_t n = seq.shape[0]
    cdef Py_ssize_t nref = ref.shape[0]
    cdef Py_ssize_t mask = table.shape[0] - 1
    cdef const u8* s = &seq[0] if n else <const u8*> NULL
    cdef const u8* r = &ref[0]
    cdef const i64* tab = &table[0]

    cdef _L1Out o
    o.cap = 256
    o.cnt = 0
    o.kinds = <u8*> malloc(o.cap)
    o.f0 = <i64*> malloc(o.cap * sizeof(i64))
    o.f1 = <i64*> malloc(o.cap * sizeof(i64))
    o.orig = <u8*> malloc(o.cap)
    if o.kinds == NULL or o.f0 == NULL or o.f1 == NULL or o.orig == NULL:
        free(o.kinds); free(o.f0); free(o.f1); free(o.orig)
        raise MemoryError

    cdef Py_ssize_t i = 0, rc = 0, ln, p
    cdef bint in_match = False
    cdef bint oom = False
    with nogil:
        while i < n:
            if in_match:
                ln = _lce(s, i + 1, n, r, rc + 1, nref)
                if ln >= h1e:
                    if not (_l1_lit(&o, s[i], ORIGIN_CONT_LITERAL)
                            and _l1_match(&o, rc + 1, ln, ORIGIN_CONT_MATCH)):
                        oom = True; break
                    i += 1 + ln
                    rc += 1 + ln
                    continue
                ln = _lce(s, i + 1, n, r, rc, nref)
                if ln >= h1e:
                    if not (_l1_lit(&o, s[i], ORIGIN_CONT_LITERAL)
                            and _l1_match(&o, rc, ln, ORIGIN_CONT_MATCH)):
                        oom = True; break
                    i += 1 + ln
                    rc += ln
                    continue
                ln = _lce(s, i, n, r, rc + 1, nref)
                if ln >= h1e:
                    if not _l1_match(&o, rc + 1, ln, ORIGIN_CONT_MATCH):
                        oom = True; break
                    i += ln
                    rc += 1 + ln
                    continue
                if indel2:
                    ln = _lce(s, i + 2, n, r, rc, nref)
                    if ln >= h1e:
                        if not (_l1_lit(&o, s[i], ORIGIN_CONT_LITERAL)
                                and _l1_lit(&o, s[i + 1], ORIGIN_CONT_LITERAL)
                                and _l1_match(&o, rc, ln, ORIGIN_CONT_MATCH)):
                            oom = True; break
                        i += 2 + ln
                        rc += ln
                        continue
                    ln = _lce(s, i, n, r, rc + 2, nref)
                    if ln >= h1e:
                        if not _l1_match(&o, rc + 2, ln, ORIGIN_CONT_MATCH):
                            oom = True; break
                        i += ln
                        rc += 2 + ln
                        continue
            p = -1
            ln = 0
            if i + h1m <= n:
                _ref_query(r, nref, tab, mask, h1m, max_cand, s, n, i, &p, &ln)
            if ln > 0:
                if not _l1_match(&o, p, ln, ORIGIN_FRESH):
                    oom = True; break
                i += ln
                rc = p + ln
                in_match = True
            else:
                if not _l1_lit(&o, s[i], ORIGIN_LITERAL):
                    oom = True; break
                i += 1
                in_match = False

    if oom:
        free(o.kinds); free(o.f0); free(o.f1); free(o.orig)
        raise MemoryError

    cdef cnp.ndarray kinds = np.empty(o.cnt, dtype=np.uint8)
    cdef cnp.ndarray f0 = np.empty(o.cnt, dtype=np.int64)
    cdef cnp.ndarray f1 = np.empty(o.cnt, dtype=np.int64)
    cdef cnp.ndarray orig = np.empty(o.cnt, dtype=np.uint8)
    if o.cnt:
        memcpy(cnp.PyArray_DATA(kinds), o.kinds, o.cnt)
        memcpy(cnp.PyArray_DATA(f0), o.f0, o.cnt * sizeof(i64))
        memcpy(cnp.PyArray_DATA(f1), o.f1, o.cnt * sizeof(i64))
        memcpy(cnp.PyArray_DATA(orig), o.orig, o.cnt)
    free(o.kinds); free(o.f0); free(o.f1); free(o.orig)
    return kinds, f0, f1, orig


def lz1_expand(const u8[::1] kinds, const i64[::1] f0, const i64[::1] f1,
               const u8[::1] ref, long out_len):
    cdef Py_ssize_t t = kinds.shape[0]
    cdef Py_ssize_t nref = ref.shape[0]
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t j
    cdef i64 pos0, ln
    cdef bint bad = False
    with nogil:
        for j in range(t):
            if kinds[j] == KIND_LITERAL:
                total += 1
            else:
                pos0 = f0[j] - 1
                ln = f1[j]
                if pos0 < 0 or ln < 1 or pos0 + ln > nref:
                    bad = True
                    break
                total += ln
    if bad:
        from .errors import CorruptArchiveError
        raise CorruptArchiveError(f"match outside reference of {nref} symbols")
    if out_len >= 0 and total != out_len:
        from .errors import CorruptArchiveError
        raise CorruptArchiveError(f"expanded to {total} symbols, expected {out_len}")
    if total == 0:
        return b""

    buf = bytearray(total)
    cdef u8[::1] mv = buf
    cdef u8* dst = &mv[0]
    cdef Py_ssize_t w = 0
    with nogil:
        for j in range(t):
            if kinds[j] == KIND_LITERAL:
                dst[w] = <u8> f0[j]
                w += 1
            else:
                memcpy(dst + w, &ref[f0[j] - 1], f1[j])
                w += f1[j]
    return bytes(buf)


# ---------------------------------------------------------------------------
# tuple-substring index

cdef inline u64 _hash_tuple(u64 h, u8 kind, i64 a, i64 b) noexcept nogil:
    cdef int k
    h = (h ^ kind) * FNV_PRIME
    if kind == KIND_LITERAL:
        h = (h ^ <u8> a) * FNV_PRIME
    else:
        for k in range(8):
            h = (h ^ <u8> ((<u64> a >> (8 * k)) & 0xFF)) * FNV_PRIME
        for k in range(4):
            h = (h ^ <u8> ((<u64> b >> (8 * k)) & 0xFF)) * FNV_PRIME
    return h


cdef struct _Stream:
    const u8* k
    const i64* a
    const i64* b
    Py_ssize_t n


cdef inline Py_ssize_t _tuple_run(const u8* ak, const i64* a0, const i64* a1,
                                  Py_ssize_t i, const u8* bk, const i64* b0,
                                  const i64* b1, Py_ssize_t j,
                                  Py_ssize_t limit) noexcept nogil:
    cdef Py_ssize_t n = 0
    while (n < limit and ak[i + n] == bk[j + n]
           and a0[i + n] == b0[j + n] and a1[i + n] == b1[j + n]):
        n += 1
    return n


cdef class TupleTable:
    cdef int h2, wlit, wmat
    cdef Py_ssize_t size, mask, count
    cdef i64* table
    cdef u64* ehash
    cdef i64* eval_
    cdef Py_ssize_t ecap
    cdef _Stream* streams
    cdef dict refs  # u -> arrays, keeps buffers alive

    def __cinit__(self, int h2, int wlit, int wmat):
        self.h2 = h2
        self.wlit = wlit
        self.wmat = wmat
        self.size = 1024
        self.mask = 1023
        self.count = 0
        self.table = <i64*> malloc(self.size * sizeof(i64))
        self.ecap = 1024
        self.ehash = <u64*> malloc(self.ecap * sizeof(u64))
        self.eval_ = <i64*> malloc(self.ecap * sizeof(i64))
        self.streams = <_Stream*> calloc(MAX_U, sizeof(_Stream))
        if (self.table == NULL or self.ehash == NULL or self.eval_ == NULL
                or self.streams == NULL):
            raise MemoryError
        cdef Py_ssize_t i
        for i in range(self.size):
            self.table[i] = -1
        self.refs = {}

    def __dealloc__(self):
        free(self.table)
        free(self.ehash)
        free(self.eval_)
        free(self.streams)

    @property
    def table_size(self):
        return self.size

    @property
    def entry_count(self):
        return self.count

    cdef inline void _insert(self, u64 h, i64 val) noexcept nogil:
        cdef Py_ssize_t idx = h & self.mask
        while self.table[idx] != -1:
            idx = (idx + 1) & self.mask
        self.table[idx] = val

    cdef int _grow_for(self, Py_ssize_t extra) except -1:
        cdef Py_ssize_t size = self.size
        cdef Py_ssize_t i
        while (self.count + extra) * 10 > size * 7:
            size <<= 1
        if size == self.size:
            return 0
        free(self.table)
        self.table = <i64*> malloc(size * sizeof(i64))
        if self.table == NULL:
            raise MemoryError
        self.size = size
        self.mask = size - 1
        with nogil:
            for i in range(size):
                self.table[i] = -1
            for i in range(self.count):
                self._insert(self.ehash[i], self.eval_[i])
        return 0

    def add_stream(self, long u, const u8[::1] kinds, const i64[::1] f0,
                   const i64[::1] f1):
        if not 1 <= u < MAX_U:
            raise ValueError(f"stream ordinal {u} out of range")
        if self.streams[u].k != NULL:
            raise ValueError(f"stream {u} already indexed")
        self.refs[u] = (
            np.asarray(kinds), np.asarray(f0), np.asarray(f1)
        )
        cdef Py_ssize_t t = kinds.shape[0]
        cdef _Stream st
        st.k = &kinds[0] if t else <const u8*> NULL
        st.a = &f0[0] if t else <const i64*> NULL
        st.b = &f1[0] if t else <const i64*> NULL
        st.n = t
        self.streams[u] = st
        if t == 0:
            return

        # per-position key hashes via a sliding weight window
        cdef u64* hashes = <u64*> malloc(t * sizeof(u64))
        if hashes == NULL:
            raise MemoryError
        cdef Py_ssize_t q = 0
        cdef Py_ssize_t i = 0, end = 0
        cdef i64 acc = 0
        cdef u64 h
        cdef Py_ssize_t j
        with nogil:
            while i < t:
                while end < t and acc < self.h2:
                    acc += self.wlit if kinds[end] == KIND_LITERAL else self.wmat
                    end += 1
                if acc < self.h2:
                    break  # no later start can reach h2 either
                h = FNV_OFFSET
                for j in range(i, end):
                    h = _hash_tuple(h, kinds[j], f0[j], f1[j])
                hashes[i] = h
                q += 1
                acc -= self.wlit if kinds[i] == KIND_LITERAL else self.wmat
                i += 1

        if self.count + q > self.ecap:
            while self.ecap < self.count + q:
                self.ecap <<= 1
            self.ehash = <u64*> realloc(self.ehash, self.ecap * sizeof(u64))
            self.eval_ = <i64*> realloc(self.eval_, self.ecap * sizeof(i64))
            if self.ehash == NULL or self.eval_ == NULL:
                free(hashes)
                raise MemoryError
        self._grow_for(q)
        cdef i64 val
        with nogil:
            for i in range(q):
                val = (<i64> u << 32) | i
                self.ehash[self.count] = hashes[i]
                self.eval_[self.count] = val
                self.count += 1
                self._insert(hashes[i], val)
        free(hashes)

    def factor(self, const u8[::1] kinds, const i64[::1] f0, const i64[::1] f1):
        cdef Py_ssize_t t = kinds.shape[0]
        out_kinds = np.empty(t, dtype=np.uint8)
        out_e0 = np.empty(t, dtype=np.int64)
        out_e1 = np.empty(t, dtype=np.int64)
        out_e2 = np.zeros(t, dtype=np.int64)
        if t == 0:
            return out_kinds, out_e0, out_e1, out_e2
        cdef u8[::1] ok = out_kinds
        cdef i64[::1] o0 = out_e0
        cdef i64[::1] o1 = out_e1
        cdef i64[::1] o2 = out_e2

        cdef i64* wp = <i64*> malloc((t + 1) * sizeof(i64))
        if wp == NULL:
            raise MemoryError
        cdef Py_ssize_t j
        wp[0] = 0
        for j in range(t):
            wp[j + 1] = wp[j] + (self.wlit if kinds[j] == KIND_LITERAL else self.wmat)

        cdef const u8* ck = &kinds[0]
        cdef const i64* c0 = &f0[0]
        cdef const i64* c1 = &f1[0]
        cdef Py_ssize_t n_out = 0
        cdef Py_ssize_t i = 0, end = 0
        cdef i64 acc = 0
        cdef u64 h
        cdef Py_ssize_t idx, p0, limit, run, key_len
        cdef i64 val, w
        cdef long u, checked
        cdef i64 best_w
        cdef long best_u
        cdef Py_ssize_t best_p0, best_run
        cdef _Stream st

        with nogil:
            while i < t:
                while end < t and acc < self.h2:
                    acc += self.wlit if ck[end] == KIND_LITERAL else self.wmat
                    end += 1
                best_w = -1
                best_u = 0
                best_p0 = 0
                best_run = 0
                if acc >= self.h2:
                    key_len = end - i
                    h = FNV_OFFSET
                    for j in range(i, end):
                        h = _hash_tuple(h, ck[j], c0[j], c1[j])
                    idx = h & self.mask
                    checked = 0
                    while self.table[idx] != -1:
                        val = self.table[idx]
                        idx = (idx + 1) & self.mask
                        u = <long> (val >> 32)
                        p0 = <Py_ssize_t> (val & 0xFFFFFFFFULL)
                        st = self.streams[u]
                        limit = t - i
                        if st.n - p0 < limit:
                            limit = st.n - p0
                        if limit < key_len:
                            continue
                        run = _tuple_run(ck, c0, c1, i, st.k, st.a, st.b, p0, limit)
                        if run < key_len:
                            continue
                        w = wp[i + run] - wp[i]
                        if (w > best_w
                                or (w == best_w and u < best_u)
                                or (w == best_w and u == best_u and p0 < best_p0)):
                            best_w = w
                            best_u = u
                            best_p0 = p0
                            best_run = run
                        checked += 1
                        if checked >= CAND_CAP:
                            break
                if best_w >= 0:
                    ok[n_out] = KIND_MATCH2
                    o0[n_out] = best_u
                    o1[n_out] = best_p0 + 1
                    o2[n_out] = best_run
                    n_out += 1
                    i += best_run
                    if end < i:
                        end = i
                        acc = 0
                    else:
                        acc = wp[end] - wp[i]
                else:
                    ok[n_out] = ck[i]
                    o0[n_out] = c0[i]
                    o1[n_out] = c1[i]
                    n_out += 1
                    acc -= self.wlit if ck[i] == KIND_LITERAL else self.wmat
                    i += 1
        free(wp)
        return (
            out_kinds[:n_out].copy(),
            out_e0[:n_out].copy(),
            out_e1[:n_out].copy(),
            out_e2[:n_out].copy(),
        )


# ---------------------------------------------------------------------------
# adaptive model

cdef struct Model:
    int n
    int highbit
    u32 total
    u32* counts
    u32* tree


cdef int _model_init(Model* m, int n) noexcept nogil:
    cdef int i
    m.n = n
    m.total = n
    i = 1
    while (i << 1) <= n:
        i <<= 1
    m.highbit = i
    m.counts = <u32*> malloc(n * sizeof(u32))
    m.tree = <u32*> malloc((n + 1) * sizeof(u32))
    if m.counts == NULL or m.tree == NULL:
        return -1
    for i in range(n):
        m.counts[i] = 1
    # Fenwick tree of all-ones: node i covers (i & -i) leaves
    m.tree[0] = 0
    for i in range(1, n + 1):
        m.tree[i] = i & (-i)
    return 0


cdef void _model_free(Model* m) noexcept nogil:
    if m.counts != NULL:
        free(m.counts)
        m.counts = NULL
    if m.tree != NULL:
        free(m.tree)
        m.tree = NULL


cdef inline u32 _model_cum(Model* m, int sym) noexcept nogil:
    cdef u32 s = 0
    cdef int i = sym
    while i:
        s += m.tree[i]
        i -= i & (-i)
    return s


cdef inline int _model_find(Model* m, u32 v, u32* start) noexcept nogil:
    cdef int pos = 0
    cdef u32 rem = v
    cdef int bit = m.highbit
    cdef int nxt
    while bit:
        nxt = pos + bit
        if nxt <= m.n and m.tree[nxt] <= rem:
            rem -= m.tree[nxt]
            pos = nxt
        bit >>= 1
    start[0] = v - rem
    return pos


cdef inline void _model_bump(Model* m, int sym) noexcept nogil:
    cdef int i = sym + 1
    cdef u32 total
    cdef int k, j
    while i <= m.n:
        m.tree[i] += MODEL_INC
        i += i & (-i)
    m.counts[sym] += MODEL_INC
    m.total += MODEL_INC
    if m.total >= RESCALE_AT:
        total = 0
        for k in range(m.n):
            m.counts[k] = (m.counts[k] + 1) >> 1
            total += m.counts[k]
        m.total = total
        for k in range(m.n + 1):
            m.tree[k] = 0
        for k in range(1, m.n + 1):
            m.tree[k] += m.counts[k - 1]
            j = k + (k & (-k))
            if j <= m.n:
                m.tree[j] += m.tree[k]


# ---------------------------------------------------------------------------
# range coder

cdef struct REnc:
    u64 low
    u32 rng
    u8 cache
    u64 cache_size
    u8* out
    Py_ssize_t len
    Py_ssize_t cap


cdef int _renc_init(REnc* e) noexcept nogil:
    e.low = 0
    e.rng = 0xFFFFFFFFU
    e.cache = 0
    e.cache_size = 1
    e.len = 0
    e.cap = 4096
    e.out = <u8*> malloc(e.cap)
    return -1 if e.out == NULL else 0


cdef inline int _renc_byte(REnc* e, u8 b) noexcept nogil:
    if e.len == e.cap:
        e.cap <<= 1
        e.out = <u8*> realloc(e.out, e.cap)
        if e.out == NULL:
            return -1
    e.out[e.len] = b
    e.len += 1
    return 0


cdef inline int _renc_shift_low(REnc* e) noexcept nogil:
    cdef u64 low = e.low
    cdef u64 carry
    cdef u64 k
    if low < 0xFF000000UL or low > 0xFFFFFFFFUL:
        carry = low >> 32
        if _renc_byte(e, <u8> ((e.cache + carry) & 0xFF)) < 0:
            return -1
        k = e.cache_size
        while k > 1:
            if _renc_byte(e, <u8> ((0xFF + carry) & 0xFF)) < 0:
                return -1
            k -= 1
        e.cache = <u8> ((low >> 24) & 0xFF)
        e.cache_size = 0
    e.cache_size += 1
    e.low = (low << 8) & 0xFFFFFFFFUL
    return 0


cdef inline int _renc_encode(REnc* e, u32 start, u32 size, u32 total) noexcept nogil:
    cdef u32 r = e.rng // total
    e.low += <u64> r * start
    e.rng = r * size
    while e.rng < TOP:
        if _renc_shift_low(e) < 0:
            return -1
        e.rng = e.rng << 8
    return 0


cdef int _renc_finish(REnc* e) noexcept nogil:
    cdef int i
    for i in range(5):
        if _renc_shift_low(e) < 0:
            return -1
    return 0


cdef struct RDec:
    const u8* data
    Py_ssize_t len
    Py_ssize_t pos
    u32 rng
    u32 code
    u32 r


cdef inline u8 _rdec_byte(RDec* d) noexcept nogil:
    if d.pos >= d.len:
        return 0
    d.pos += 1
    return d.data[d.pos - 1]


cdef void _rdec_init(RDec* d, const u8* data, Py_ssize_t n) noexcept nogil:
    cdef int i
    d.data = data
    d.len = n
    d.pos = 0
    d.rng = 0xFFFFFFFFU
    d.code = 0
    for i in range(5):
        d.code = (d.code << 8) | _rdec_byte(d)


cdef inline u32 _rdec_get_freq(RDec* d, u32 total) noexcept nogil:
    cdef u32 v
    d.r = d.rng // total
    v = d.code // d.r
    return total - 1 if v >= total else v


cdef inline void _rdec_consume(RDec* d, u32 start, u32 size) noexcept nogil:
    d.code -= start * d.r
    d.rng = d.r * size
    while d.rng < TOP:
        d.code = (d.code << 8) | _rdec_byte(d)
        d.rng = d.rng << 8


cdef inline int _model_encode(Model* m, REnc* e, int sym) noexcept nogil:
    if _renc_encode(e, _model_cum(m, sym), m.counts[sym], m.total) < 0:
        return -1
    _model_bump(m, sym)
    return 0


cdef inline int _model_decode(Model* m, RDec* d) noexcept nogil:
    cdef u32 start = 0
    cdef int sym = _model_find(m, _rdec_get_freq(d, m.total), &start)
    _rdec_consume(d, start, m.counts[sym])
    _model_bump(m, sym)
    return sym


# ---------------------------------------------------------------------------
# block codec

cdef struct BlockCtx:
    Model flag[9]
    Model* lit[256]
    Model l1p_cls
    Model l1p_good
    Model l1p_poor[4]
    Model l1l_cls
    Model l1l_short
    Model l1l_long[2]
    Model l1l_vlong[4]
    Model id_pre
    Model* id_suf[256]
    Model l2p_cls
    Model l2p_good
    Model l2p_mod
    Model l2p_poor[4]
    Model l2l_cls
    Model l2l_pay[4]
    Model l2l_elong[4]
    # prediction state
    int flag1
    int flag2
    int prev_lit
    i64 last_pos
    i64 last_len
    i64 lits_since
    i64 l2_syms
    i64 done
    i64* aux_p
    i64* aux_s
    # indexed stream coverage prefixes
    const i64** pfx
    Py_ssize_t* pfx_len


cdef int _ctx_init(BlockCtx* c) noexcept nogil:
    cdef int i
    memset(c, 0, sizeof(BlockCtx))
    for i in range(9):
        if _model_init(&c.flag[i], 3) < 0:
            return -1
    for i in range(256):
        c.lit[i] = NULL
        c.id_suf[i] = NULL
    if _model_init(&c.l1p_cls, 3) < 0: return -1
    if _model_init(&c.l1p_good, 256) < 0: return -1
    for i in range(4):
        if _model_init(&c.l1p_poor[i], 256) < 0: return -1
    if _model_init(&c.l1l_cls, 3) < 0: return -1
    if _model_init(&c.l1l_short, 256) < 0: return -1
    for i in range(2):
        if _model_init(&c.l1l_long[i], 256) < 0: return -1
    for i in range(4):
        if _model_init(&c.l1l_vlong[i], 256) < 0: return -1
    if _model_init(&c.id_pre, 256) < 0: return -1
    if _model_init(&c.l2p_cls, 4) < 0: return -1
    if _model_init(&c.l2p_good, 256) < 0: return -1
    if _model_init(&c.l2p_mod, MODERATE_ALPHABET) < 0: return -1
    for i in range(4):
        if _model_init(&c.l2p_poor[i], 256) < 0: return -1
    if _model_init(&c.l2l_cls, 5) < 0: return -1
    for i in range(4):
        if _model_init(&c.l2l_pay[i], 256) < 0: return -1
    for i in range(4):
        if _model_init(&c.l2l_elong[i], 256) < 0: return -1
    c.flag1 = 0
    c.flag2 = 0
    c.prev_lit = 0
    c.last_pos = 1
    c.last_len = 0
    c.lits_since = 0
    c.l2_syms = 0
    c.done = 0
    c.aux_p = <i64*> calloc(MAX_U, sizeof(i64))
    c.aux_s = <i64*> calloc(MAX_U, sizeof(i64))
    c.pfx = <const i64**> calloc(MAX_U, sizeof(i64*))
    c.pfx_len = <Py_ssize_t*> calloc(MAX_U, sizeof(Py_ssize_t))
    if c.aux_p == NULL or c.aux_s == NULL or c.pfx == NULL or c.pfx_len == NULL:
        return -1
    return 0


cdef void _ctx_free(BlockCtx* c) noexcept nogil:
    cdef int i
    for i in range(9):
        _model_free(&c.flag[i])
    for i in range(256):
        if c.lit[i] != NULL:
            _model_free(c.lit[i])
            free(c.lit[i])
        if c.id_suf[i] != NULL:
            _model_free(c.id_suf[i])
            free(c.id_suf[i])
    _model_free(&c.l1p_cls)
    _model_free(&c.l1p_good)
    for i in range(4):
        _model_free(&c.l1p_poor[i])
    _model_free(&c.l1l_cls)
    _model_free(&c.l1l_short)
    for i in range(2):
        _model_free(&c.l1l_long[i])
    for i in range(4):
        _model_free(&c.l1l_vlong[i])
    _model_free(&c.id_pre)
    _model_free(&c.l2p_cls)
    _model_free(&c.l2p_good)
    _model_free(&c.l2p_mod)
    for i in range(4):
        _model_free(&c.l2p_poor[i])
    _model_free(&c.l2l_cls)
    for i in range(4):
        _model_free(&c.l2l_pay[i])
    for i in range(4):
        _model_free(&c.l2l_elong[i])
    free(c.aux_p)
    free(c.aux_s)
    free(c.pfx)
    free(c.pfx_len)


cdef Model* _ctx_lazy(Model** slot, int alphabet) noexcept nogil:
    if slot[0] == NULL:
        slot[0] = <Model*> malloc(sizeof(Model))
        if slot[0] == NULL:
            return NULL
        if _model_init(slot[0], alphabet) < 0:
            return NULL
    return slot[0]


cdef inline int _ctx_flag(BlockCtx* c, REnc* e, int f) noexcept nogil:
    if _model_encode(&c.flag[c.flag2 * 3 + c.flag1], e, f) < 0:
        return -1
    c.flag2 = c.flag1
    c.flag1 = f
    return 0


cdef inline i64 _predict_l1(BlockCtx* c) noexcept nogil:
    return c.last_pos + c.last_len + c.lits_since + c.l2_syms


cdef inline i64 _predict_l2(BlockCtx* c, long u) noexcept nogil:
    cdef i64 p_last = c.aux_p[u]
    cdef i64 s_last = c.aux_s[u]
    if p_last == 0:
        p_last = 1
        s_last = 0
    cdef const i64* P = c.pfx[u]
    cdef i64 target = P[p_last - 1] + (c.done - s_last)
    cdef Py_ssize_t lo = 0, hi = c.pfx_len[u] - 1, mid
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if P[mid] <= target:
            lo = mid
        else:
            hi = mid - 1
    return lo + 1


cdef inline u64 _zigzag(i64 v) noexcept nogil:
    return (<u64> v << 1) if v >= 0 else ((<u64> (-v) << 1) - 1)


cdef inline i64 _unzigzag(u64 z) noexcept nogil:
    return <i64> (z >> 1) if (z & 1) == 0 else -(<i64> ((z + 1) >> 1))


cdef int _encode_element(BlockCtx* c, REnc* e, u8 kind, i64 a, i64 b, i64 d2) noexcept nogil:
    cdef Model* m
    cdef i64 rel, diff, expected, coverage
    cdef u64 z
    cdef int k, cls
    cdef long u
    cdef const i64* P

    if kind == KIND_LITERAL:
        if _ctx_flag(c, e, 0) < 0:
            return -ERR_MEMORY
        m = _ctx_lazy(&c.lit[c.prev_lit], 256)
        if m == NULL:
            return -ERR_MEMORY
        if _model_encode(m, e, <int> a) < 0:
            return -ERR_MEMORY
        c.prev_lit = <int> a
        c.lits_since += 1
        c.done += 1
        return 0

    if kind == KIND_MATCH1:
        if _ctx_flag(c, e, 1) < 0:
            return -ERR_MEMORY
        rel = _predict_l1(c) - a
        if rel == 0:
            if _model_encode(&c.l1p_cls, e, 0) < 0:
                return -ERR_MEMORY
        elif -64 < rel < 64:
            if _model_encode(&c.l1p_cls, e, 1) < 0:
                return -ERR_MEMORY
            if _model_encode(&c.l1p_good, e, <int> (rel + 64)) < 0:
                return -ERR_MEMORY
        else:
            if rel <= -(<i64> 1 << 31) or rel >= (<i64> 1 << 31):
                return -ERR_RANGE
            if _model_encode(&c.l1p_cls, e, 2) < 0:
                return -ERR_MEMORY
            z = _zigzag(rel)
            for k in range(4):
                if _model_encode(&c.l1p_poor[k], e, <int> ((z >> (8 * k)) & 0xFF)) < 0:
                    return -ERR_MEMORY
        if b <= 256:
            if _model_encode(&c.l1l_cls, e, 0) < 0:
                return -ERR_MEMORY
            if _model_encode(&c.l1l_short, e, <int> (b - 1)) < 0:
                return -ERR_MEMORY
        elif b <= 65792:
            if _model_encode(&c.l1l_cls, e, 1) < 0:
                return -ERR_MEMORY
            for k in range(2):
                if _model_encode(&c.l1l_long[k], e, <int> (((b - 257) >> (8 * k)) & 0xFF)) < 0:
                    return -ERR_MEMORY
        else:
            if b - 1 >= (<i64> 1 << 32):
                return -ERR_RANGE
            if _model_encode(&c.l1l_cls, e, 2) < 0:
                return -ERR_MEMORY
            for k in range(4):
                if _model_encode(&c.l1l_vlong[k], e, <int> (((b - 1) >> (8 * k)) & 0xFF)) < 0:
                    return -ERR_MEMORY
        c.last_pos = a
        c.last_len = b
        c.lits_since = 0
        c.l2_syms = 0
        c.done += b
        return 0

    # level-2 match
    u = <long> a
    if u < 1 or u >= MAX_U:
        return -ERR_RANGE
    if c.pfx[u] == NULL:
        return -ERR_MISSING_STREAM
    if b < 1 or b + d2 > c.pfx_len[u]:
        return -ERR_BOUNDS
    if _ctx_flag(c, e, 2) < 0:
        return -ERR_MEMORY
    if _model_encode(&c.id_pre, e, <int> (u >> 8)) < 0:
        return -ERR_MEMORY
    m = _ctx_lazy(&c.id_suf[u >> 8], 256)
    if m == NULL:
        return -ERR_MEMORY
    if _model_encode(m, e, <int> (u & 0xFF)) < 0:
        return -ERR_MEMORY
    expected = _predict_l2(c, u)
    diff = expected - b
    if diff == 0:
        if _model_encode(&c.l2p_cls, e, 0) < 0:
            return -ERR_MEMORY
    elif -16 < diff < 16:
        if _model_encode(&c.l2p_cls, e, 1) < 0:
            return -ERR_MEMORY
        if _model_encode(&c.l2p_good, e, <int> (diff + 16)) < 0:
            return -ERR_MEMORY
    elif -256 < diff < 256:
        if _model_encode(&c.l2p_cls, e, 2) < 0:
            return -ERR_MEMORY
        k = <int> ((diff if diff > 0 else -diff) - 16) * 2 + (1 if diff < 0 else 0)
        if _model_encode(&c.l2p_mod, e, k) < 0:
            return -ERR_MEMORY
    else:
        if diff <= -(<i64> 1 << 31) or diff >= (<i64> 1 << 31):
            return -ERR_RANGE
        if _model_encode(&c.l2p_cls, e, 3) < 0:
            return -ERR_MEMORY
        z = _zigzag(diff)
        for k in range(4):
            if _model_encode(&c.l2p_poor[k], e, <int> ((z >> (8 * k)) & 0xFF)) < 0:
                return -ERR_MEMORY
    if d2 <= 16:
        if _model_encode(&c.l2l_cls, e, 0) < 0: return -ERR_MEMORY
        if _model_encode(&c.l2l_pay[0], e, <int> (d2 - 1)) < 0: return -ERR_MEMORY
    elif d2 <= 48:
        if _model_encode(&c.l2l_cls, e, 1) < 0: return -ERR_MEMORY
        if _model_encode(&c.l2l_pay[1], e, <int> (d2 - 17)) < 0: return -ERR_MEMORY
    elif d2 <= 176:
        if _model_encode(&c.l2l_cls, e, 2) < 0: return -ERR_MEMORY
        if _model_encode(&c.l2l_pay[2], e, <int> (d2 - 49)) < 0: return -ERR_MEMORY
    elif d2 <= 432:
        if _model_encode(&c.l2l_cls, e, 3) < 0: return -ERR_MEMORY
        if _model_encode(&c.l2l_pay[3], e, <int> (d2 - 177)) < 0: return -ERR_MEMORY
    else:
        if d2 - 433 >= (<i64> 1 << 32):
            return -ERR_RANGE
        if _model_encode(&c.l2l_cls, e, 4) < 0: return -ERR_MEMORY
        for k in range(4):
            if _model_encode(&c.l2l_elong[k], e, <int> (((d2 - 433) >> (8 * k)) & 0xFF)) < 0:
                return -ERR_MEMORY
    P = c.pfx[u]
    coverage = P[b + d2 - 1] - P[b - 1]
    c.aux_p[u] = b
    c.aux_s[u] = c.done
    c.l2_syms += coverage
    c.done += coverage
    return 0


cdef int _decode_element(BlockCtx* c, RDec* d, u8* kind, i64* a, i64* b, i64* d2) noexcept nogil:
    cdef Model* m
    cdef int f, cls, k, sym
    cdef i64 rel, diff, pos, ln, tl, coverage
    cdef u64 z
    cdef long u
    cdef const i64* P

    f = _model_decode(&c.flag[c.flag2 * 3 + c.flag1], d)
    c.flag2 = c.flag1
    c.flag1 = f

    if f == 0:
        m = _ctx_lazy(&c.lit[c.prev_lit], 256)
        if m == NULL:
            return -ERR_MEMORY
        sym = _model_decode(m, d)
        c.prev_lit = sym
        c.lits_since += 1
        c.done += 1
        kind[0] = KIND_LITERAL
        a[0] = sym
        b[0] = 1
        d2[0] = 0
        return 0

    if f == 1:
        cls = _model_decode(&c.l1p_cls, d)
        if cls == 0:
            rel = 0
        elif cls == 1:
            rel = _model_decode(&c.l1p_good, d) - 64
        else:
            z = 0
            for k in range(4):
                z |= (<u64> _model_decode(&c.l1p_poor[k], d)) << (8 * k)
            rel = _unzigzag(z)
        pos = _predict_l1(c) - rel
        cls = _model_decode(&c.l1l_cls, d)
        if cls == 0:
            ln = _model_decode(&c.l1l_short, d) + 1
        elif cls == 1:
            ln = 0
            for k in range(2):
                ln |= (<i64> _model_decode(&c.l1l_long[k], d)) << (8 * k)
            ln += 257
        else:
            ln = 0
            for k in range(4):
                ln |= (<i64> _model_decode(&c.l1l_vlong[k], d)) << (8 * k)
            ln += 1
        if pos < 1:
            return -ERR_BOUNDS
        c.last_pos = pos
        c.last_len = ln
        c.lits_since = 0
        c.l2_syms = 0
        c.done += ln
        kind[0] = KIND_MATCH1
        a[0] = pos
        b[0] = ln
        d2[0] = 0
        return 0

    sym = _model_decode(&c.id_pre, d)
    m = _ctx_lazy(&c.id_suf[sym], 256)
    if m == NULL:
        return -ERR_MEMORY
    u = (<long> sym << 8) | _model_decode(m, d)
    if u < 1 or c.pfx[u] == NULL:
        return -ERR_MISSING_STREAM
    cls = _model_decode(&c.l2p_cls, d)
    if cls == 0:
        diff = 0
    elif cls == 1:
        diff = _model_decode(&c.l2p_good, d) - 16
    elif cls == 2:
        k = _model_decode(&c.l2p_mod, d)
        diff = (k >> 1) + 16
        if k & 1:
            diff = -diff
    else:
        z = 0
        for k in range(4):
            z |= (<u64> _model_decode(&c.l2p_poor[k], d)) << (8 * k)
        diff = _unzigzag(z)
    pos = _predict_l2(c, u) - diff
    cls = _model_decode(&c.l2l_cls, d)
    if cls == 0:
        tl = _model_decode(&c.l2l_pay[0], d) + 1
    elif cls == 1:
        tl = _model_decode(&c.l2l_pay[1], d) + 17
    elif cls == 2:
        tl = _model_decode(&c.l2l_pay[2], d) + 49
    elif cls == 3:
        tl = _model_decode(&c.l2l_pay[3], d) + 177
    else:
        tl = 0
        for k in range(4):
            tl |= (<i64> _model_decode(&c.l2l_elong[k], d)) << (8 * k)
        tl += 433
    if pos < 1 or pos + tl > c.pfx_len[u]:
        return -ERR_BOUNDS
    P = c.pfx[u]
    coverage = P[pos + tl - 1] - P[pos - 1]
    c.aux_p[u] = pos
    c.aux_s[u] = c.done
    c.l2_syms += coverage
    c.done += coverage
    kind[0] = KIND_MATCH2
    a[0] = u
    b[0] = pos
    d2[0] = tl
    return 0


cdef int _ctx_load_prefixes(BlockCtx* c, dict prefix_map, list keep) except -1:
    cdef long u
    cdef const i64[::1] view
    for key, arr in prefix_map.items():
        u = key
        if not 1 <= u < MAX_U:
            raise ValueError(f"stream ordinal {u} out of range")
        view = arr
        keep.append(arr)
        c.pfx[u] = &view[0]
        c.pfx_len[u] = view.shape[0]
    return 0


cdef object _codec_error(int err):
    from .errors import CorruptArchiveError, UnsupportedInputError
    if err == -ERR_MEMORY:
        return MemoryError()
    if err == -ERR_RANGE:
        return UnsupportedInputError("element field out of codable range")
    if err == -ERR_MISSING_STREAM:
        return CorruptArchiveError("match refers to a stream that is not indexed")
    return CorruptArchiveError("decoded element fails bounds check")


def codec_encode_block(const u8[::1] kinds, const i64[::1] e0,
                       const i64[::1] e1, const i64[::1] e2, dict prefix_map):
    cdef BlockCtx c
    cdef REnc enc
    cdef Py_ssize_t t = kinds.shape[0]
    cdef Py_ssize_t i
    cdef int err = 0
    cdef list keep = []
    enc.out = NULL
    if _ctx_init(&c) < 0:
        _ctx_free(&c)
        raise MemoryError
    try:
        _ctx_load_prefixes(&c, prefix_map, keep)
        if _renc_init(&enc) < 0:
            raise MemoryError
        with nogil:
            for i in range(t):
                err = _encode_element(&c, &enc, kinds[i], e0[i], e1[i], e2[i])
                if err < 0:
                    break
            if err == 0:
                if _renc_finish(&enc) < 0:
                    err = -ERR_MEMORY
        if err < 0:
            raise _codec_error(err)
        return PyBytes_FromStringAndSize(<char*> enc.out, enc.len)
    finally:
        _ctx_free(&c)
        free(enc.out)


def codec_decode_block(const u8[::1] data, long count, dict prefix_map):
    cdef BlockCtx c
    cdef RDec dec
    cdef Py_ssize_t i
    cdef int err = 0
    cdef list keep = []
    kinds = np.empty(count, dtype=np.uint8)
    e0 = np.empty(count, dtype=np.int64)
    e1 = np.empty(count, dtype=np.int64)
    e2 = np.zeros(count, dtype=np.int64)
    cdef u8[::1] ok = kinds
    cdef i64[::1] o0 = e0
    cdef i64[::1] o1 = e1
    cdef i64[::1] o2 = e2
    if _ctx_init(&c) < 0:
        _ctx_free(&c)
        raise MemoryError
    try:
        _ctx_load_prefixes(&c, prefix_map, keep)
        _rdec_init(&dec, &data[0] if data.shape[0] else <const u8*> NULL, data.shape[0])
        with nogil:
            for i in range(count):
                err = _decode_element(&c, &dec, &ok[i], &o0[i], &o1[i], &o2[i])
                if err < 0:
                    break
        if err < 0:
            raise _codec_error(err)
        return kinds, e0, e1, e2
    finally:
        _ctx_free(&c)


# ---------------------------------------------------------------------------
# reference triple coder

def triple_encode(const int[::1] tokens, int m):
    cdef Model model
    cdef REnc enc
    cdef Py_ssize_t i
    cdef int err = 0
    if _model_init(&model, m * m * m) < 0:
        _model_free(&model)
        raise MemoryError
    if _renc_init(&enc) < 0:
        _model_free(&model)
        raise MemoryError
    with nogil:
        for i in range(tokens.shape[0]):
            if _model_encode(&model, &enc, tokens[i]) < 0:
                err = -1
                break
        if err == 0 and _renc_finish(&enc) < 0:
            err = -1
    _model_free(&model)
    if err < 0:
        free(enc.out)
        raise MemoryError
    out = PyBytes_FromStringAndSize(<char*> enc.out, enc.len)
    free(enc.out)
    return out


def triple_decode(const u8[::1] data, int m, long n_tokens):
    cdef Model model
    cdef RDec dec
    cdef Py_ssize_t i
    out = np.empty(n_tokens, dtype=np.int32)
    cdef int[::1] view = out
    if _model_init(&model, m * m * m) < 0:
        _model_free(&model)
        raise MemoryError
    _rdec_init(&dec, &data[0] if data.shape[0] else <const u8*> NULL, data.shape[0])
    with nogil:
        for i in range(n_tokens):
            view[i] = _model_decode(&model, &dec)
    _model_free(&model)
    return out
