"""Command line interface."""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import gen, pipeline
from .errors import ConfigError, Gdc2Error
from .fasta import write_record
from .model import Params


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("GDC2_THREADS")
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"GDC2_THREADS={env!r} is not an integer") from None
        else:
            n = pipeline.DEFAULT_THREADS
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


def _parse_fraction(text: str) -> Fraction:
    t = text.strip()
    try:
        if t.endswith("%"):
            f = Fraction(t[:-1]) / 100
        else:
            f = Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse fraction {text!r}") from None
    if not 0 < f <= 1:
        raise ConfigError(f"indexed fraction must be in (0, 1], got {text!r}")
    return f


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gdc2",
        description="Two-level referential compressor for collections of similar genomes.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress FASTA collections against a reference")
    c.add_argument("inputs", nargs="+", help="FASTA files with the sequences to compress")
    c.add_argument("-r", "--reference", required=True, help="single-record FASTA reference")
    c.add_argument("-o", "--output", required=True, help="archive path prefix")
    c.add_argument("--h1m", type=int, default=15, help="minimum fresh match length (default 15)")
    c.add_argument("--h1e", type=int, default=4, help="minimum resumed match length (default 4)")
    c.add_argument("--h2", type=int, default=11, help="minimum tuple-match weight (default 11)")
    c.add_argument("--indel2", action="store_true", help="also check 2-symbol indels")
    c.add_argument(
        "--ref-fraction",
        default="100%",
        metavar="P",
        help="fraction of streams indexed for level 2, e.g. 10%% or 1/2 (default 100%%)",
    )
    c.add_argument("--threads", type=int, default=None, help="total worker threads (default 4)")
    c.add_argument("--no-ref", action="store_true", help="do not store the coded reference")
    c.add_argument(
        "--no-level2",
        action="store_true",
        help="disable matching between tuple streams (diagnostic)",
    )

    d = sub.add_parser("decompress", help="restore the original FASTA files")
    d.add_argument("prefix", help="archive path prefix")
    d.add_argument("-o", "--output-dir", default=".", help="directory for restored files")
    d.add_argument("--stdout", action="store_true", help="write all records to stdout")
    d.add_argument("-r", "--reference", default=None, help="reference FASTA (for --no-ref archives)")
    d.add_argument("--threads", type=int, default=None, help="total worker threads (default 4)")

    e = sub.add_parser("extract", help="decode a single sequence to stdout")
    e.add_argument("prefix", help="archive path prefix")
    e.add_argument("-n", "--ordinal", type=int, default=None, help="archive ordinal (1-based)")
    e.add_argument("--id", default=None, help="sequence id to extract")
    e.add_argument("-r", "--reference", default=None, help="reference FASTA (for --no-ref archives)")

    i = sub.add_parser("info", help="show archive parameters and sizes")
    i.add_argument("prefix", help="archive path prefix")

    g = sub.add_parser("gen", help="generate a synthetic test collection")
    g.add_argument("-r", "--ref-len", type=int, required=True, help="reference length in symbols")
    g.add_argument("-n", "--count", type=int, required=True, help="number of sequences")
    g.add_argument("--snp", type=float, default=0.001, help="per-symbol substitution rate")
    g.add_argument("--indel", type=float, default=0.0001, help="per-symbol indel rate")
    g.add_argument("--seed", type=int, default=0, help="random seed")
    g.add_argument("-o", "--output-dir", required=True, help="directory for the FASTA files")
    g.add_argument("--n-run-rate", type=float, default=0.0, help="rate of N-run starts")
    g.add_argument("--lowercase-rate", type=float, default=0.0, help="rate of lowercase-run starts")
    g.add_argument("--line-width", type=int, default=70, help="FASTA wrap width")
    return ap


def cmd_compress(args) -> int:
    params = Params(
        h1m=args.h1m,
        h1e=args.h1e,
        h2=args.h2,
        indel2=args.indel2,
        ref_fraction=_parse_fraction(args.ref_fraction),
        l1_workers=max(1, _threads(args) - 1),
    )
    st = pipeline.compress(
        args.inputs,
        args.reference,
        params,
        args.output,
        level2=not args.no_level2,
        store_ref=not args.no_ref,
    )
    mb = st.raw_bytes / (1 << 20)
    print(f"compressed {st.n} sequences, {mb:.2f} MB of symbols")
    print(
        f"archive: rc={st.rc_bytes} desc={st.desc_bytes} ref={st.ref_bytes} bytes "
        f"-> ratio {st.ratio:.2f} (reference not counted)"
    )
    print(f"speed: {st.mb_per_s:.2f} MB/s, backend: {st.backend}")
    print(
        f"STATS n={st.n} raw={st.raw_bytes} rc={st.rc_bytes} desc={st.desc_bytes} "
        f"ref={st.ref_bytes} ratio={st.ratio:.6f} mbps={st.mb_per_s:.3f} "
        f"l2_matches={st.l2_matches} ref_table={st.ref_table_size} "
        f"tuple_table={st.tuple_table_size} tuple_entries={st.tuple_entries} "
        f"backend={st.backend}"
    )
    return 0


def cmd_decompress(args) -> int:
    st = pipeline.decompress(
        args.prefix,
        args.output_dir,
        to_stdout=args.stdout,
        reference=args.reference,
        threads=_threads(args),
    )
    print(
        f"restored {st.n} sequences, {st.raw_bytes / (1 << 20):.2f} MB "
        f"at {st.mb_per_s:.2f} MB/s",
        file=sys.stderr,
    )
    return 0


def cmd_extract(args) -> int:
    meta, symbols, st = pipeline.extract(
        args.prefix,
        ordinal=args.ordinal,
        seq_id=args.id,
        reference=args.reference,
    )
    write_record(sys.stdout.buffer, meta.seq_id, symbols, meta.line_width)
    sys.stdout.buffer.flush()
    print(
        f"extracted ordinal {meta.archive_ordinal} ({len(symbols)} symbols), "
        f"decoded {st.streams_decoded} streams",
        file=sys.stderr,
    )
    return 0


def cmd_info(args) -> int:
    for key, value in pipeline.describe(args.prefix).items():
        if isinstance(value, list):
            value = ", ".join(value)
        print(f"{key}: {value}")
    return 0


def cmd_gen(args) -> int:
    ref, seqs = gen.gen_collection(
        args.ref_len,
        args.count,
        args.snp,
        args.indel,
        args.seed,
        n_run_rate=args.n_run_rate,
        lowercase_rate=args.lowercase_rate,
    )
    ref_path, col_path = gen.write_corpus(
        args.output_dir, ref, seqs, line_width=args.line_width
    )
    print(ref_path)
    print(col_path)
    return 0


_COMMANDS = {
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "extract": cmd_extract,
    "info": cmd_info,
    "gen": cmd_gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"gdc2: {exc}", file=sys.stderr)
        return 2
    except Gdc2Error as exc:
        print(f"gdc2: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # reader went away (e.g. piped into head); suppress shutdown noise
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 1
    except OSError as exc:
        print(f"gdc2: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
