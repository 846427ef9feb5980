"""Synthetic collection generator for tests and benchmarks.

Draws one random ACGT reference, then a pool of candidate variants
along it: substitution sites (with a fixed alternative base) and indel
sites (insertion or deletion, geometric(0.5) length).  The pool is
sampled at twice the requested per-sequence rate and each sequence
includes each site independently with probability 1/2, so a sequence
carries the requested expected number of variants while any two
sequences share about half of them, the way related genomes share
variation.  Optionally overlays N runs and lowercase (soft-masked)
runs on each sequence.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError

_BASES = np.frombuffer(b"ACGT", dtype=np.uint8)


def gen_collection(
    length: int,
    count: int,
    snp_rate: float,
    indel_rate: float,
    seed: int,
    *,
    n_run_rate: float = 0.0,
    lowercase_rate: float = 0.0,
) -> tuple[bytes, list[bytes]]:
    if length < 1:
        raise ConfigError(f"reference length must be >= 1, got {length}")
    if count < 1:
        raise ConfigError(f"sequence count must be >= 1, got {count}")
    for name, rate in (
        ("snp", snp_rate),
        ("indel", indel_rate),
        ("n-run", n_run_rate),
        ("lowercase", lowercase_rate),
    ):
        if not 0.0 <= rate <= 0.5:
            raise ConfigError(f"{name} rate must be in [0, 0.5], got {rate}")

    rng = np.random.default_rng(seed)
    ref_codes = rng.integers(0, 4, size=length, dtype=np.uint8)

    snp_pos = np.flatnonzero(rng.random(length) < 2.0 * snp_rate)
    snp_shift = rng.integers(1, 4, size=len(snp_pos), dtype=np.uint8)

    ind_pos = np.flatnonzero(rng.random(length) < 2.0 * indel_rate)
    ind_is_ins = rng.random(len(ind_pos)) < 0.5
    ind_len = rng.geometric(0.5, size=len(ind_pos)).astype(np.int64)
    ind_bases = [
        rng.integers(0, 4, size=int(ind_len[j]), dtype=np.uint8) if ind_is_ins[j] else None
        for j in range(len(ind_pos))
    ]

    seqs: list[bytes] = []
    for _ in range(count):
        inc_snp = rng.random(len(snp_pos)) < 0.5
        inc_ind = rng.random(len(ind_pos)) < 0.5
        codes = ref_codes.copy()
        sp = snp_pos[inc_snp]
        codes[sp] = (codes[sp] + snp_shift[inc_snp]) % 4
        picked = np.flatnonzero(inc_ind)
        if len(picked):
            parts = []
            prev = 0
            for j in picked:
                pos = int(ind_pos[j])
                if pos < prev:
                    continue  # swallowed by a previous deletion
                parts.append(codes[prev:pos])
                if ind_is_ins[j]:
                    parts.append(ind_bases[j])
                    prev = pos
                else:
                    prev = min(len(codes), pos + int(ind_len[j]))
            parts.append(codes[prev:])
            codes = np.concatenate(parts)
        sym = _BASES[codes]
        if n_run_rate > 0.0:
            starts = np.flatnonzero(rng.random(len(sym)) < n_run_rate)
            lens = rng.geometric(0.05, size=len(starts))
            for s, ln in zip(starts, lens):
                sym[s : s + ln] = ord("N")
        if lowercase_rate > 0.0:
            starts = np.flatnonzero(rng.random(len(sym)) < lowercase_rate)
            lens = rng.geometric(0.01, size=len(starts))
            for s, ln in zip(starts, lens):
                sym[s : s + ln] |= 0x20
        seqs.append(sym.tobytes())

    return _BASES[ref_codes].tobytes(), seqs


def write_corpus(
    out_dir,
    ref: bytes,
    seqs: list[bytes],
    *,
    line_width: int = 70,
    ref_name: str = "reference.fa",
    collection_name: str = "collection.fa",
) -> tuple[Path, Path]:
    from .fasta import write_record

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ref_path = out_dir / ref_name
    col_path = out_dir / collection_name
    with open(ref_path, "wb") as fh:
        write_record(fh, "reference", ref, line_width)
    with open(col_path, "wb") as fh:
        for i, s in enumerate(seqs):
            write_record(fh, f"seq_{i + 1:04d}", s, line_width)
    return ref_path, col_path
