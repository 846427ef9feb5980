"""Streaming FASTA reader/writer.

Sequence payload is kept as raw bytes and is case preserving: 'a' and
'A' are distinct symbols end to end.  Any byte outside A-Z/a-z in a
sequence line is a parse error reported with its absolute byte offset.
Input line endings may be LF or CRLF; output is always LF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .errors import FastaParseError

DEFAULT_LINE_WIDTH = 60


@dataclass(frozen=True)
class FastaRecordMeta:
    """Descriptor entry for one archived sequence."""

    file_name: str
    seq_id: str
    seq_len: int
    line_width: int
    archive_ordinal: int


@dataclass(frozen=True)
class ParsedRecord:
    seq_id: str
    symbols: bytes
    line_width: int
    header_offset: int


def _first_bad_byte(line: bytes) -> int:
    for i, b in enumerate(line):
        if not (65 <= b <= 90 or 97 <= b <= 122):
            return i
    return -1


def iter_records(path) -> Iterator[ParsedRecord]:
    """Yield records of a FASTA file one by one.

    Wrap width is taken from the first body line when the body spans
    several lines; single-line bodies get the default width of 60.
    """
    path = str(path)
    seq_id = None
    header_offset = 0
    parts: list[bytes] = []
    first_line_len = 0
    body_lines = 0

    def finish() -> ParsedRecord:
        if not parts:
            raise FastaParseError(
                f"record '{seq_id}' has no sequence data", path, header_offset
            )
        width = first_line_len if body_lines >= 2 else DEFAULT_LINE_WIDTH
        return ParsedRecord(seq_id, b"".join(parts), width, header_offset)

    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line_offset = offset
            offset += len(raw)
            line = raw.rstrip(b"\r\n")
            if not line:
                continue
            if line.startswith(b">"):
                if seq_id is not None:
                    yield finish()
                seq_id = line[1:].decode("latin-1")
                header_offset = line_offset
                parts = []
                first_line_len = 0
                body_lines = 0
                continue
            if seq_id is None:
                raise FastaParseError("data before first FASTA header", path, line_offset)
            if not line.isalpha():
                bad = _first_bad_byte(line)
                raise FastaParseError(
                    f"invalid symbol 0x{line[bad]:02x} in sequence data",
                    path,
                    line_offset + bad,
                )
            if body_lines == 0:
                first_line_len = len(line)
            body_lines += 1
            parts.append(line)
    if seq_id is None:
        raise FastaParseError("no FASTA records found", path, 0)
    yield finish()


def count_records(path) -> int:
    """Number of records in a FASTA file, by scanning for header lines."""
    n = 0
    prev = b"\n"
    with open(str(path), "rb") as fh:
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            n += chunk.count(b"\n>")
            if prev.endswith(b"\n") and chunk.startswith(b">"):
                n += 1
            prev = chunk
    return n


def read_single(path) -> ParsedRecord:
    """Read a FASTA file that must contain exactly one record."""
    it = iter_records(path)
    rec = next(it)
    extra = next(it, None)
    if extra is not None:
        raise FastaParseError(
            "expected exactly one record", str(path), extra.header_offset
        )
    return rec


def write_record(out, seq_id: str, symbols: bytes, line_width: int) -> None:
    if line_width < 1:
        line_width = DEFAULT_LINE_WIDTH
    out.write(b">" + seq_id.encode("latin-1") + b"\n")
    for i in range(0, len(symbols), line_width):
        out.write(symbols[i : i + line_width])
        out.write(b"\n")
