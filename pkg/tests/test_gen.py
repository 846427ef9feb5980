import numpy as np
import pytest

from gdc2 import fasta, gen
from gdc2.errors import ConfigError


def test_deterministic():
    a = gen.gen_collection(5000, 4, 0.01, 0.001, seed=7)
    b = gen.gen_collection(5000, 4, 0.01, 0.001, seed=7)
    assert a == b
    c = gen.gen_collection(5000, 4, 0.01, 0.001, seed=8)
    assert a != c


def test_shapes_and_alphabet():
    ref, seqs = gen.gen_collection(3000, 5, 0.01, 0.0, seed=1)
    assert len(ref) == 3000
    assert len(seqs) == 5
    assert set(ref) <= set(b"ACGT")
    for s in seqs:
        assert len(s) == 3000  # no indels requested
        assert set(s) <= set(b"ACGT")


def test_sequences_differ_but_share_variants():
    ref, seqs = gen.gen_collection(20000, 6, 0.01, 0.0, seed=3)
    r = np.frombuffer(ref, dtype=np.uint8)
    diff_sets = []
    for s in seqs:
        a = np.frombuffer(s, dtype=np.uint8)
        diff_sets.append(set(np.flatnonzero(a != r).tolist()))
        assert 0 < len(diff_sets[-1]) < 20000 * 0.03
    # same-site variants use the same alternative base, so two sequences
    # agree on any site they both carry; overlap should be substantial
    inter = diff_sets[0] & diff_sets[1]
    union = diff_sets[0] | diff_sets[1]
    assert len(inter) > 0.15 * len(union)
    a0 = np.frombuffer(seqs[0], dtype=np.uint8)
    a1 = np.frombuffer(seqs[1], dtype=np.uint8)
    for pos in list(inter)[:50]:
        assert a0[pos] == a1[pos]


def test_indels_change_lengths():
    ref, seqs = gen.gen_collection(10000, 8, 0.0, 0.005, seed=5)
    lengths = {len(s) for s in seqs}
    assert len(lengths) > 1
    assert all(abs(len(s) - 10000) < 1000 for s in seqs)


def test_n_runs_and_lowercase():
    _, seqs = gen.gen_collection(
        5000, 2, 0.001, 0.0, seed=9, n_run_rate=0.01, lowercase_rate=0.01
    )
    joined = b"".join(seqs)
    assert b"N" in joined
    assert set(joined) <= set(b"ACGTNacgtn")
    assert any(97 <= b <= 122 for b in joined)


@pytest.mark.parametrize(
    "kw",
    [
        {"length": 0},
        {"count": 0},
        {"snp_rate": -0.1},
        {"snp_rate": 0.6},
        {"indel_rate": 0.51},
    ],
)
def test_validation(kw):
    base = dict(length=100, count=1, snp_rate=0.0, indel_rate=0.0, seed=0)
    base.update(kw)
    with pytest.raises(ConfigError):
        gen.gen_collection(**base)


def test_write_corpus(tmp_path):
    ref, seqs = gen.gen_collection(500, 3, 0.01, 0.001, seed=2)
    ref_path, col_path = gen.write_corpus(tmp_path / "d", ref, seqs, line_width=50)
    rec = fasta.read_single(ref_path)
    assert rec.symbols == ref
    assert rec.line_width == 50
    got = list(fasta.iter_records(col_path))
    assert [r.symbols for r in got] == seqs
    assert [r.seq_id for r in got] == ["seq_0001", "seq_0002", "seq_0003"]
