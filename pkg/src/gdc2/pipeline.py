"""End-to-end compression, decompression and single-sequence extraction.

Compression runs as a small producer-consumer pipeline: one reader
thread parses FASTA records and feeds a bounded queue, l1_workers
threads factor sequences against the reference, and the main thread
consumes factored streams in arrival order, runs level 2, codes the
block and writes it out.  Arrival order assigns archive ordinals, so
with several workers the on-disk stream order may differ from input
order; the descriptor maps records to ordinals either way.

Decompression decodes blocks sequentially (block k may refer to any
indexed stream j < k), then expands and writes records in original
input order with a small thread pool.  Extraction of sequence m only
touches blocks 1..min(m-1, ref_limit) plus block m itself.
"""

from __future__ import annotations

import os
import queue
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import backend, codec, fasta, lz1, lz2
from .archive import ArchiveHeader, ArchiveReader, ArchiveWriter
from .errors import CorruptArchiveError, Gdc2Error, UnsupportedInputError
from .model import Params, make_stored
from .refindex import RefIndex

DEFAULT_THREADS = 4

_QUIT = object()


@dataclass
class CompressStats:
    n: int
    raw_bytes: int
    rc_bytes: int
    desc_bytes: int
    ref_bytes: int
    ratio: float
    elapsed: float
    mb_per_s: float
    ref_table_size: int
    tuple_table_size: int
    tuple_entries: int
    l2_matches: int
    backend: str


@dataclass
class DecompressStats:
    n: int
    raw_bytes: int
    elapsed: float
    mb_per_s: float


@dataclass
class ExtractStats:
    streams_decoded: int
    elapsed: float


def _put(q, item, stop) -> bool:
    while not stop.is_set():
        try:
            q.put(item, timeout=0.05)
            return True
        except queue.Full:
            pass
    return False


def _get(q, stop):
    while not stop.is_set():
        try:
            return q.get(timeout=0.05)
        except queue.Empty:
            pass
    return _QUIT


def compress(
    inputs,
    reference,
    params: Params,
    out_prefix,
    *,
    level2: bool = True,
    store_ref: bool = True,
) -> CompressStats:
    t0 = time.perf_counter()
    inputs = [str(p) for p in inputs]
    if not inputs:
        raise Gdc2Error("no input files given")

    ref_rec = fasta.read_single(reference)
    ref = ref_rec.symbols

    n = sum(fasta.count_records(p) for p in inputs)
    if n < 1:
        raise Gdc2Error("input files contain no sequences")
    ref_limit = params.ref_limit(n)
    if ref_limit > 0xFFFF:
        raise UnsupportedInputError(
            f"{ref_limit} indexed streams requested but the format codes at most 65535; "
            "lower --ref-fraction"
        )

    idx = RefIndex.build(ref, params.h1m)
    tindex = lz2.TupleIndex(params.h2, params.literal_weight, params.match_weight)
    prefixes: dict[int, np.ndarray] = {}

    workers = params.l1_workers
    in_q: queue.Queue = queue.Queue(maxsize=2 * workers)
    out_q: queue.Queue = queue.Queue(maxsize=2 * workers)
    stop = threading.Event()
    errors: list[BaseException] = []

    meta_stub: list[tuple | None] = [None] * n
    ordinal_of: list[int] = [0] * n

    def reader() -> None:
        i = 0
        try:
            for path in inputs:
                base = os.path.basename(path)
                for rec in fasta.iter_records(path):
                    if i >= n:
                        raise Gdc2Error(f"{path}: more records than first scan found")
                    meta_stub[i] = (base, rec.seq_id, len(rec.symbols), rec.line_width)
                    if not _put(in_q, (i, rec.symbols), stop):
                        return
                    i += 1
            if i != n:
                raise Gdc2Error("inputs changed while reading: record count mismatch")
        except BaseException as exc:
            errors.append(exc)
            stop.set()
        finally:
            for _ in range(workers):
                _put(in_q, _QUIT, stop)

    def worker() -> None:
        try:
            while True:
                item = _get(in_q, stop)
                if item is _QUIT:
                    break
                i, symbols = item
                kinds, f0, f1, _ = lz1.factor_packed(symbols, idx, params.h1e, params.indel2)
                if not _put(out_q, (i, kinds, f0, f1), stop):
                    return
        except BaseException as exc:
            errors.append(exc)
            stop.set()
        finally:
            _put(out_q, _QUIT, stop)

    header = ArchiveHeader(
        params=params,
        n=n,
        ref_limit=ref_limit,
        ref_len=len(ref),
        ref_stored=store_ref,
    )
    writer = ArchiveWriter(out_prefix, header)

    threads = [threading.Thread(target=reader, name="gdc2-reader", daemon=True)]
    threads += [
        threading.Thread(target=worker, name=f"gdc2-l1-{w}", daemon=True)
        for w in range(workers)
    ]

    l2_matches = 0
    done = 0
    quits = 0
    try:
        for t in threads:
            t.start()
        while done < n and quits < workers and not stop.is_set():
            item = _get(out_q, stop)
            if item is _QUIT:
                quits += 1
                continue
            i, kinds, f0, f1 = item
            done += 1
            k = done  # archive ordinal, assigned in arrival order
            ordinal_of[i] = k
            if level2:
                dk, d0, d1, d2 = tindex.factor(kinds, f0, f1)
            else:
                dk, d0, d1, d2 = kinds, f0, f1, np.zeros(len(kinds), dtype=np.int64)
            coded = codec.encode_block(dk, d0, d1, d2, prefixes)
            writer.add_block(len(dk), coded)
            l2_matches += int(np.count_nonzero(dk == 2))
            if level2 and k <= ref_limit:
                tindex.add_reference(k, kinds, f0, f1)
                prefixes[k] = tindex.store[k].prefix
        if errors:
            raise errors[0]
        if done < n:
            raise Gdc2Error("factoring stopped early: inputs changed while reading?")
        metas = [
            fasta.FastaRecordMeta(*meta_stub[i], ordinal_of[i]) for i in range(n)
        ]
        writer.write_descriptor(codec.encode_descriptor(metas))
        if store_ref:
            writer.write_reference(codec.encode_reference(ref))
        writer.close()
    except BaseException:
        stop.set()
        writer.abort()
        raise
    finally:
        stop.set()
        for t in threads:
            t.join(timeout=5.0)

    desc_path, rc_path, ref_path = (
        str(out_prefix) + s for s in (".gdc2_desc", ".gdc2_rc", ".gdc2_ref")
    )
    raw_bytes = sum(m.seq_len for m in metas)
    rc_bytes = os.path.getsize(rc_path)
    desc_bytes = os.path.getsize(desc_path)
    ref_bytes = os.path.getsize(ref_path) if store_ref else 0
    elapsed = time.perf_counter() - t0
    return CompressStats(
        n=n,
        raw_bytes=raw_bytes,
        rc_bytes=rc_bytes,
        desc_bytes=desc_bytes,
        ref_bytes=ref_bytes,
        ratio=raw_bytes / (rc_bytes + desc_bytes),
        elapsed=elapsed,
        mb_per_s=raw_bytes / (1 << 20) / elapsed if elapsed > 0 else 0.0,
        ref_table_size=idx.table_size,
        tuple_table_size=tindex.table_size if level2 else 0,
        tuple_entries=tindex.entry_count if level2 else 0,
        l2_matches=l2_matches,
        backend=backend.active_backend(),
    )


def _load_reference(reader: ArchiveReader, reference) -> bytes:
    if reference is not None:
        ref = fasta.read_single(reference).symbols
        if len(ref) != reader.header.ref_len:
            raise CorruptArchiveError(
                f"reference file has {len(ref)} symbols, archive expects "
                f"{reader.header.ref_len}"
            )
        return ref
    ref = codec.decode_reference(reader.read_reference())
    if len(ref) != reader.header.ref_len:
        raise CorruptArchiveError("stored reference length disagrees with header")
    return ref


def _decode_streams(reader: ArchiveReader, upto: int, keep_all: bool):
    """Decode blocks 1..upto; retain indexed streams for back references.

    Returns (streams, store) where streams maps ordinal -> packed level-1
    arrays (all ordinals when keep_all, else only indexed ones implicitly
    via store).
    """
    ref_limit = reader.header.ref_limit
    store: dict[int, object] = {}
    prefixes: dict[int, np.ndarray] = {}
    streams: dict[int, tuple] = {}
    for k in range(1, upto + 1):
        count, data = reader.read_block(k)
        dk, d0, d1, d2 = codec.decode_block(data, count, prefixes)
        lk, l0, l1 = lz2.expand_packed(dk, d0, d1, d2, store)
        if keep_all:
            streams[k] = (lk, l0, l1)
        if k <= ref_limit:
            stored = make_stored(lk, l0, l1)
            store[k] = stored
            prefixes[k] = stored.prefix
    return streams, store


def decompress(
    prefix,
    out_dir=".",
    *,
    to_stdout: bool = False,
    reference=None,
    threads: int | None = None,
) -> DecompressStats:
    t0 = time.perf_counter()
    pool_size = max(1, (threads or DEFAULT_THREADS) - 1)
    with ArchiveReader(prefix) as reader:
        header = reader.header
        metas = codec.decode_descriptor(reader.read_descriptor())
        if len(metas) != header.n:
            raise CorruptArchiveError(
                f"descriptor lists {len(metas)} sequences, header says {header.n}"
            )
        if sorted(m.archive_ordinal for m in metas) != list(range(1, header.n + 1)):
            raise CorruptArchiveError("descriptor ordinals are not a permutation")
        ref = _load_reference(reader, reference)
        streams, _ = _decode_streams(reader, header.n, keep_all=True)

    raw_bytes = 0
    handles: dict[str, object] = {}
    try:
        if not to_stdout:
            os.makedirs(str(out_dir), exist_ok=True)
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            window: deque = deque()
            pending = list(metas)

            def emit(meta: fasta.FastaRecordMeta, fut) -> None:
                nonlocal raw_bytes
                symbols = fut.result()
                raw_bytes += len(symbols)
                if to_stdout:
                    out = sys.stdout.buffer
                else:
                    out = handles.get(meta.file_name)
                    if out is None:
                        out = open(os.path.join(str(out_dir), meta.file_name), "wb")
                        handles[meta.file_name] = out
                fasta.write_record(out, meta.seq_id, symbols, meta.line_width)

            for meta in pending:
                arrays = streams[meta.archive_ordinal]
                fut = pool.submit(lz1.expand_packed, *arrays, ref, meta.seq_len)
                window.append((meta, fut))
                if len(window) > 2 * pool_size:
                    emit(*window.popleft())
            while window:
                emit(*window.popleft())
    finally:
        for fh in handles.values():
            fh.close()

    elapsed = time.perf_counter() - t0
    return DecompressStats(
        n=header.n,
        raw_bytes=raw_bytes,
        elapsed=elapsed,
        mb_per_s=raw_bytes / (1 << 20) / elapsed if elapsed > 0 else 0.0,
    )


def extract(
    prefix,
    *,
    ordinal: int | None = None,
    seq_id: str | None = None,
    reference=None,
) -> tuple[fasta.FastaRecordMeta, bytes, ExtractStats]:
    if (ordinal is None) == (seq_id is None):
        raise Gdc2Error("give exactly one of ordinal or sequence id")
    t0 = time.perf_counter()
    with ArchiveReader(prefix) as reader:
        header = reader.header
        metas = codec.decode_descriptor(reader.read_descriptor())
        if ordinal is not None:
            if not 1 <= ordinal <= header.n:
                raise Gdc2Error(f"ordinal {ordinal} outside 1..{header.n}")
            matching = [m for m in metas if m.archive_ordinal == ordinal]
            if not matching:
                raise CorruptArchiveError(f"descriptor lacks ordinal {ordinal}")
            meta = matching[0]
        else:
            matching = [m for m in metas if m.seq_id == seq_id]
            if not matching:
                raise Gdc2Error(f"no sequence with id {seq_id!r} in archive")
            meta = matching[0]
        ref = _load_reference(reader, reference)
        m = meta.archive_ordinal
        upto = min(m - 1, header.ref_limit)
        _, store = _decode_streams(reader, upto, keep_all=False)
        prefixes = {u: s.prefix for u, s in store.items()}
        count, data = reader.read_block(m)
        dk, d0, d1, d2 = codec.decode_block(data, count, prefixes)
        lk, l0, l1 = lz2.expand_packed(dk, d0, d1, d2, store)
        symbols = lz1.expand_packed(lk, l0, l1, ref, meta.seq_len)
    stats = ExtractStats(streams_decoded=upto + 1, elapsed=time.perf_counter() - t0)
    return meta, symbols, stats


def describe(prefix) -> dict:
    """Archive summary for the info command."""
    with ArchiveReader(prefix) as reader:
        header = reader.header
        metas = codec.decode_descriptor(reader.read_descriptor())
        p = header.params
        rc_size = os.path.getsize(reader.rc_path)
        desc_size = os.path.getsize(reader.desc_path)
        ref_size = (
            os.path.getsize(reader.ref_path)
            if header.ref_stored and os.path.exists(reader.ref_path)
            else 0
        )
        raw = sum(m.seq_len for m in metas)
        return {
            "sequences": header.n,
            "raw_bytes": raw,
            "rc_bytes": rc_size,
            "desc_bytes": desc_size,
            "ref_bytes": ref_size,
            "ratio": raw / (rc_size + desc_size) if rc_size + desc_size else 0.0,
            "ref_len": header.ref_len,
            "ref_stored": header.ref_stored,
            "indexed_streams": header.ref_limit,
            "h1m": p.h1m,
            "h1e": p.h1e,
            "h2": p.h2,
            "literal_weight": p.literal_weight,
            "match_weight": p.match_weight,
            "indel2": p.indel2,
            "ref_fraction": str(p.ref_fraction),
            "files": sorted({m.file_name for m in metas}),
        }
