"""The compiled kernels must reproduce the pure-Python output exactly.

Archive-level comparisons pin a single level-1 worker: ordinals are
assigned in arrival order, which only the single-worker schedule makes
reproducible.
"""

import contextlib

import numpy as np
import pytest

from conftest import HAVE_KERNELS
from gdc2 import backend, codec, gen, lz1, lz2, pipeline
from gdc2.model import Params
from gdc2.refindex import RefIndex
from helpers import mutate, pack_l2_elements, random_seq, write_fasta

pytestmark = pytest.mark.skipif(
    not HAVE_KERNELS, reason="compiled kernels not built"
)


@contextlib.contextmanager
def forced(name):
    backend.set_backend(name)
    try:
        yield
    finally:
        backend.set_backend(None)


def on_both(fn):
    with forced("pure"):
        a = fn()
    with forced("compiled"):
        b = fn()
    return a, b


def test_active_backend_reporting():
    with forced("pure"):
        assert backend.active_backend() == "pure"
        assert backend.kernels() is None
    with forced("compiled"):
        assert backend.active_backend() == "compiled"
        assert backend.kernels() is not None


def test_ref_tables_identical(rng):
    for n, h1m in [(50, 3), (1000, 9), (5000, 15)]:
        ref = random_seq(rng, n)
        pure, comp = on_both(lambda: np.asarray(RefIndex.build(ref, h1m).table))
        assert np.array_equal(pure, comp)


def test_l1_factorings_identical(rng):
    ref = random_seq(rng, 3000)
    cases = [mutate(rng, ref, snp=0.03, ins=0.005, dele=0.005) for _ in range(8)]
    cases += [random_seq(rng, 500), b"", ref]
    for seq in cases:
        for indel2 in (False, True):

            def run():
                idx = RefIndex.build(ref, 9)
                return lz1.factor_packed(seq, idx, 4, indel2)

            pure, comp = on_both(run)
            for a, b in zip(pure, comp):
                assert np.array_equal(a, b)


def test_l1_expand_identical(rng):
    ref = random_seq(rng, 2000)
    seq = mutate(rng, ref, snp=0.02, ins=0.003, dele=0.003)
    idx = RefIndex.build(ref, 9)
    kinds, f0, f1, _ = lz1.factor_packed(seq, idx, 4, False)
    pure, comp = on_both(lambda: lz1.expand_packed(kinds, f0, f1, ref, len(seq)))
    assert pure == comp == seq


def test_tuple_tables_identical(rng):
    ref = random_seq(rng, 4000)
    idx = RefIndex.build(ref, 9)
    packs = []
    for _ in range(6):
        seq = mutate(rng, ref, snp=0.02, ins=0.003, dele=0.003)
        packs.append(lz1.factor_packed(seq, idx, 4, False)[:3])

    def run():
        ti = lz2.TupleIndex(11, 1, 7)
        outs = []
        for u, p in enumerate(packs, start=1):
            outs.append(ti.factor(*p))
            ti.add_reference(u, *p)
        return ti.table_size, ti.entry_count, outs

    (size_a, count_a, outs_a), (size_b, count_b, outs_b) = on_both(run)
    assert size_a == size_b
    assert count_a == count_b
    for oa, ob in zip(outs_a, outs_b):
        for a, b in zip(oa, ob):
            assert np.array_equal(a, b)


def test_blocks_identical(rng):
    prefix_map = {1: np.arange(500, dtype=np.int64), 300: np.arange(40, dtype=np.int64)}
    elements = [("L", 65), ("M1", 100, 50), ("M2", 1, 30, 400), ("L", 67),
                ("M2", 300, 1, 39), ("M1", 1, 65793), ("M2", 1, 430, 3)]
    arrays = pack_l2_elements(elements)

    def enc():
        return codec.encode_block(*arrays, prefix_map)

    data_a, data_b = on_both(enc)
    assert data_a == data_b

    def dec():
        return codec.decode_block(data_a, len(elements), prefix_map)

    out_a, out_b = on_both(dec)
    for a, b in zip(out_a, out_b):
        assert np.array_equal(a, b)


def test_reference_coding_identical(rng):
    for ref in (b"ACGTAC", random_seq(rng, 30000), b"ACGTNacgtn" * 100):
        enc_a, enc_b = on_both(lambda: codec.encode_reference(ref))
        assert enc_a == enc_b
        dec_a, dec_b = on_both(lambda: codec.decode_reference(enc_a))
        assert dec_a == dec_b == ref


def test_archives_identical_single_worker(tmp_path, rng):
    ref, seqs = gen.gen_collection(20000, 12, 0.01, 0.002, seed=21)
    ref_path, col_path = gen.write_corpus(tmp_path, ref, seqs)
    params = Params(l1_workers=1)

    def run(tag):
        prefix = tmp_path / tag
        pipeline.compress([col_path], ref_path, params, prefix)
        return {s: open(str(prefix) + s, "rb").read()
                for s in (".gdc2_desc", ".gdc2_rc", ".gdc2_ref")}

    with forced("pure"):
        files_pure = run("pure")
    with forced("compiled"):
        files_comp = run("comp")
    assert files_pure == files_comp


def test_cross_backend_archives_interchange(tmp_path, rng):
    # an archive written by either backend decompresses under the other
    ref, seqs = gen.gen_collection(10000, 6, 0.01, 0.002, seed=22)
    ref_path, col_path = gen.write_corpus(tmp_path, ref, seqs)
    params = Params(h1m=12, l1_workers=2)
    for writer, reader in (("compiled", "pure"), ("pure", "compiled")):
        prefix = tmp_path / f"by_{writer}"
        with forced(writer):
            pipeline.compress([col_path], ref_path, params, prefix)
        out = tmp_path / f"read_by_{reader}"
        with forced(reader):
            pipeline.decompress(prefix, out)
        assert (out / "collection.fa").read_bytes() == col_path.read_bytes()
