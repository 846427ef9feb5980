#!/usr/bin/env python3
"""Compare the pure-Python and compiled backends on one corpus.

Generates a synthetic collection, compresses and decompresses it once
per backend, checks the restored bytes agree, and prints a throughput
table.  Archive bytes are only compared when running one worker, since
worker arrival order decides stream ordinals.

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --ref-len 2000000 --count 50
"""

import argparse
import hashlib
import sys
import tempfile
import time
from pathlib import Path

from gdc2 import backend, gen, pipeline
from gdc2.errors import ConfigError
from gdc2.model import Params


def run_one(name, col_path, ref_path, params, workdir):
    backend.set_backend(name)
    prefix = workdir / f"{name}.arch"
    t0 = time.perf_counter()
    cstats = pipeline.compress([col_path], ref_path, params, prefix)
    t1 = time.perf_counter()
    out = workdir / f"{name}.out"
    dstats = pipeline.decompress(prefix, out)
    t2 = time.perf_counter()
    digest = hashlib.sha256((out / col_path.name).read_bytes()).hexdigest()
    return {
        "backend": backend.active_backend(),
        "compress_s": t1 - t0,
        "decompress_s": t2 - t1,
        "compress_mbps": cstats.mb_per_s,
        "decompress_mbps": dstats.mb_per_s,
        "ratio": cstats.ratio,
        "rc_bytes": (Path(str(prefix) + ".gdc2_rc")).stat().st_size,
        "digest": digest,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ref-len", type=int, default=500_000)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--snp", type=float, default=0.001)
    ap.add_argument("--indel", type=float, default=0.0001)
    ap.add_argument("--workers", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument(
        "--backends", default="pure,compiled", help="comma list: pure,compiled"
    )
    args = ap.parse_args(argv)

    params = Params(l1_workers=args.workers)
    results = []
    with tempfile.TemporaryDirectory(prefix="gdc2bench.") as tmp:
        workdir = Path(tmp)
        ref, seqs = gen.gen_collection(
            args.ref_len, args.count, args.snp, args.indel, seed=args.seed
        )
        ref_path, col_path = gen.write_corpus(workdir, ref, seqs)
        raw = sum(len(s) for s in seqs)
        print(
            f"corpus: {args.count} sequences, {raw / 1e6:.1f} MB of symbols, "
            f"{args.workers} worker(s)"
        )
        for name in args.backends.split(","):
            name = name.strip()
            try:
                results.append(run_one(name, col_path, ref_path, params, workdir))
            except ConfigError as exc:
                print(f"{name:>9}: skipped ({exc})")
        backend.set_backend(None)

    if not results:
        return 1
    hdr = f"{'backend':>9} {'compress':>12} {'decompress':>12} {'ratio':>8} {'rc bytes':>10}"
    print(hdr)
    print("-" * len(hdr))
    for r in results:
        print(
            f"{r['backend']:>9} {r['compress_mbps']:>9.2f} MB/s "
            f"{r['decompress_mbps']:>9.2f} MB/s {r['ratio']:>8.1f} {r['rc_bytes']:>10}"
        )
    if len(results) == 2:
        a, b = results
        print(
            f"speedup: {a['compress_s'] / b['compress_s']:.1f}x compress, "
            f"{a['decompress_s'] / b['decompress_s']:.1f}x decompress"
        )
        if a["digest"] != b["digest"]:
            print("ERROR: restored collections differ between backends")
            return 1
        print("restored collections identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
