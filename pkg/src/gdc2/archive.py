"""Three-file archive container.

An archive with prefix P consists of:

  P.gdc2_desc  deflated descriptor (file names, ids, lengths, widths)
  P.gdc2_rc    fixed header, per-sequence range-coded blocks, then a
               table of n+1 absolute block offsets
  P.gdc2_ref   coded reference symbols (optional, see --no-ref)

Each rc block starts with a u32 element count followed by the coded
bytes; blocks are self-contained so a reader can seek straight to any
of them through the offset table.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from fractions import Fraction

from .errors import CorruptArchiveError, Gdc2Error
from .model import Params

MAGIC = b"GDC2"
VERSION = 1
FLAG_REF_STORED = 1

_FIXED = struct.Struct("<4sBBIIIIIBQQQQQQ")

DESC_SUFFIX = ".gdc2_desc"
RC_SUFFIX = ".gdc2_rc"
REF_SUFFIX = ".gdc2_ref"


def paths(prefix) -> tuple[str, str, str]:
    p = str(prefix)
    return p + DESC_SUFFIX, p + RC_SUFFIX, p + REF_SUFFIX


@dataclass
class ArchiveHeader:
    params: Params
    n: int
    ref_limit: int
    ref_len: int
    ref_stored: bool
    offsets: list[int] | None = None  # n+1 absolute offsets into the rc file

    def block_span(self, ordinal: int) -> tuple[int, int]:
        """Byte range [start, end) of block ordinal (1-based) in the rc file."""
        if not 1 <= ordinal <= self.n:
            raise Gdc2Error(f"ordinal {ordinal} outside 1..{self.n}")
        return self.offsets[ordinal - 1], self.offsets[ordinal]


def _pack_fixed(h: ArchiveHeader, offset_table_pos: int) -> bytes:
    p = h.params
    flags = FLAG_REF_STORED if h.ref_stored else 0
    return _FIXED.pack(
        MAGIC,
        VERSION,
        flags,
        p.h1m,
        p.h1e,
        p.h2,
        p.literal_weight,
        p.match_weight,
        1 if p.indel2 else 0,
        p.ref_fraction.numerator,
        p.ref_fraction.denominator,
        h.n,
        h.ref_limit,
        h.ref_len,
        offset_table_pos,
    )


HEADER_SIZE = _FIXED.size


class ArchiveWriter:
    """Streams rc blocks to disk, then patches the offset table in."""

    def __init__(self, prefix, header: ArchiveHeader):
        self.prefix = str(prefix)
        self.header = header
        self._desc_path, self._rc_path, self._ref_path = paths(prefix)
        self._rc = open(self._rc_path, "wb")
        self._rc.write(_pack_fixed(header, 0))
        self._offsets = [HEADER_SIZE]
        self._closed = False

    def add_block(self, count: int, coded: bytes) -> None:
        self._rc.write(struct.pack("<I", count))
        self._rc.write(coded)
        self._offsets.append(self._offsets[-1] + 4 + len(coded))

    def write_descriptor(self, desc: bytes) -> None:
        with open(self._desc_path, "wb") as fh:
            fh.write(desc)

    def write_reference(self, coded_ref: bytes) -> None:
        with open(self._ref_path, "wb") as fh:
            fh.write(coded_ref)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        table_pos = self._offsets[-1]
        for off in self._offsets:
            self._rc.write(struct.pack("<Q", off))
        self._rc.seek(0)
        self._rc.write(_pack_fixed(self.header, table_pos))
        self._rc.close()
        self.header.offsets = self._offsets

    def abort(self) -> None:
        if not self._closed:
            self._closed = True
            self._rc.close()
            for p in (self._desc_path, self._rc_path, self._ref_path):
                if os.path.exists(p):
                    os.unlink(p)


def read_header(rc_path: str) -> tuple[ArchiveHeader, int]:
    """Header plus the rc file size, with structural validation."""
    size = os.path.getsize(rc_path)
    with open(rc_path, "rb") as fh:
        fixed = fh.read(HEADER_SIZE)
        if len(fixed) < HEADER_SIZE:
            raise CorruptArchiveError(f"{rc_path}: file shorter than its header")
        (
            magic,
            version,
            flags,
            h1m,
            h1e,
            h2,
            wlit,
            wmat,
            indel2,
            frac_num,
            frac_den,
            n,
            ref_limit,
            ref_len,
            table_pos,
        ) = _FIXED.unpack(fixed)
        if magic != MAGIC:
            raise CorruptArchiveError(f"{rc_path}: bad magic {magic!r}")
        if version != VERSION:
            raise CorruptArchiveError(f"{rc_path}: unsupported version {version}")
        if n < 1:
            raise CorruptArchiveError(f"{rc_path}: empty archive")
        if frac_den == 0 or frac_num == 0:
            raise CorruptArchiveError(f"{rc_path}: bad indexed fraction")
        if table_pos + 8 * (n + 1) != size:
            raise CorruptArchiveError(f"{rc_path}: offset table truncated")
        if not 1 <= ref_limit <= n:
            raise CorruptArchiveError(f"{rc_path}: indexed-stream count {ref_limit} invalid")
        try:
            params = Params(
                h1m=h1m,
                h1e=h1e,
                h2=h2,
                literal_weight=wlit,
                match_weight=wmat,
                indel2=bool(indel2),
                ref_fraction=Fraction(frac_num, frac_den),
            )
        except Gdc2Error as exc:
            raise CorruptArchiveError(f"{rc_path}: bad parameters: {exc}") from None
        fh.seek(table_pos)
        raw = fh.read(8 * (n + 1))
        offsets = list(struct.unpack(f"<{n + 1}Q", raw))
    if offsets[0] != HEADER_SIZE or offsets[-1] != table_pos:
        raise CorruptArchiveError(f"{rc_path}: offset table inconsistent")
    for a, b in zip(offsets, offsets[1:]):
        if b < a + 4:
            raise CorruptArchiveError(f"{rc_path}: block offsets not increasing")
    header = ArchiveHeader(
        params=params,
        n=n,
        ref_limit=ref_limit,
        ref_len=ref_len,
        ref_stored=bool(flags & FLAG_REF_STORED),
        offsets=offsets,
    )
    return header, size


class ArchiveReader:
    """Random access to the blocks of an existing archive."""

    def __init__(self, prefix):
        self.prefix = str(prefix)
        self.desc_path, self.rc_path, self.ref_path = paths(prefix)
        if not os.path.exists(self.rc_path):
            raise Gdc2Error(f"no archive at prefix {self.prefix!r} ({self.rc_path} missing)")
        self.header, _ = read_header(self.rc_path)
        self._rc = open(self.rc_path, "rb")

    def close(self) -> None:
        self._rc.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def read_descriptor(self) -> bytes:
        if not os.path.exists(self.desc_path):
            raise Gdc2Error(f"descriptor file {self.desc_path} missing")
        with open(self.desc_path, "rb") as fh:
            return fh.read()

    def read_reference(self) -> bytes:
        """Coded reference bytes; errors if the archive was written without."""
        if not self.header.ref_stored or not os.path.exists(self.ref_path):
            raise Gdc2Error(
                "reference stream absent; pass the original reference file instead"
            )
        with open(self.ref_path, "rb") as fh:
            return fh.read()

    def read_block(self, ordinal: int) -> tuple[int, bytes]:
        """(element count, coded bytes) of block ordinal, 1-based."""
        start, end = self.header.block_span(ordinal)
        self._rc.seek(start)
        raw = self._rc.read(end - start)
        if len(raw) != end - start:
            raise CorruptArchiveError(f"block {ordinal} truncated")
        (count,) = struct.unpack_from("<I", raw, 0)
        return count, raw[4:]
