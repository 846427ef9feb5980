"""Level-1 factoring against hand-traced parses and a brute-force oracle."""

import numpy as np
import pytest

from gdc2 import lz1
from gdc2.errors import CorruptArchiveError
from gdc2.lz1 import (
    ORIGIN_CONT_LITERAL,
    ORIGIN_CONT_MATCH,
    ORIGIN_FRESH,
    ORIGIN_LITERAL,
    factor_packed,
)
from gdc2.refindex import RefIndex
from helpers import mutate, random_seq, unpack_to_tags
from test_refindex import brute_longest


def parse(ref, seq, h1m=3, h1e=2, indel2=False, cap=64):
    idx = RefIndex.build(ref, h1m, max_candidates=cap)
    kinds, f0, f1, origins = factor_packed(seq, idx, h1e, indel2)
    return unpack_to_tags(kinds, f0, f1), origins.tolist()


def test_substitution(use_backend):
    tags, origins = parse(b"AAACCCGGGTTT", b"AAACCCAGGTTT")
    assert tags == [("M1", 1, 6), ("L", ord("A")), ("M1", 8, 5)]
    assert origins == [ORIGIN_FRESH, ORIGIN_CONT_LITERAL, ORIGIN_CONT_MATCH]


def test_insertion_one(use_backend):
    tags, origins = parse(b"ABCDEFGHIJKL", b"ABCDEFXGHIJKL")
    assert tags == [("M1", 1, 6), ("L", ord("X")), ("M1", 7, 6)]
    assert origins == [ORIGIN_FRESH, ORIGIN_CONT_LITERAL, ORIGIN_CONT_MATCH]


def test_deletion_one_emits_no_literal(use_backend):
    tags, origins = parse(b"ABCDEFGHIJKL", b"ABCDEFHIJKL")
    assert tags == [("M1", 1, 6), ("M1", 8, 5)]
    assert origins == [ORIGIN_FRESH, ORIGIN_CONT_MATCH]


def test_insertion_two(use_backend):
    ref, seq = b"ABCDEFGHIJKL", b"ABCDEFXYGHIJKL"
    tags, origins = parse(ref, seq, indel2=True)
    assert tags == [("M1", 1, 6), ("L", ord("X")), ("L", ord("Y")), ("M1", 7, 6)]
    assert origins == [
        ORIGIN_FRESH,
        ORIGIN_CONT_LITERAL,
        ORIGIN_CONT_LITERAL,
        ORIGIN_CONT_MATCH,
    ]
    # without indel2 the same tuples come from plain literals + a fresh query
    tags, origins = parse(ref, seq, indel2=False)
    assert tags == [("M1", 1, 6), ("L", ord("X")), ("L", ord("Y")), ("M1", 7, 6)]
    assert origins == [ORIGIN_FRESH, ORIGIN_LITERAL, ORIGIN_LITERAL, ORIGIN_FRESH]


def test_deletion_two(use_backend):
    tags, origins = parse(b"ABCDEFGHIJKL", b"ABCDEFIJKL", indel2=True)
    assert tags == [("M1", 1, 6), ("M1", 9, 4)]
    assert origins == [ORIGIN_FRESH, ORIGIN_CONT_MATCH]
    # without indel2 there is no two-symbol deletion check
    tags, origins = parse(b"ABCDEFGHIJKL", b"ABCDEFIJKL", indel2=False)
    assert tags == [("M1", 1, 6), ("M1", 9, 4)]
    assert origins == [ORIGIN_FRESH, ORIGIN_FRESH]


def test_variant_checked_before_fresh_query(use_backend):
    # at the divergence a short resumed match (length 2) is taken even
    # though the index would be consulted otherwise
    ref = b"ABCDEFGHIPQMMMMMMMMMM"
    seq = b"ABCDEFZHIMMMMMMMMMM"
    tags, origins = parse(ref, seq)
    assert tags == [("M1", 1, 6), ("L", ord("Z")), ("M1", 8, 2), ("M1", 12, 10)]
    assert origins == [
        ORIGIN_FRESH,
        ORIGIN_CONT_LITERAL,
        ORIGIN_CONT_MATCH,
        ORIGIN_FRESH,
    ]


def test_variant_rejected_below_h1e(use_backend):
    # same input as the preference test, but h1e now exceeds the short
    # resumed match, so the parse decays to plain literals
    ref = b"ABCDEFGHIPQMMMMMMMMMM"
    seq = b"ABCDEFZHIMMMMMMMMMM"
    tags, origins = parse(ref, seq, h1e=3)
    assert tags == [
        ("M1", 1, 6),
        ("L", ord("Z")),
        ("L", ord("H")),
        ("L", ord("I")),
        ("M1", 12, 10),
    ]
    assert origins == [
        ORIGIN_FRESH,
        ORIGIN_LITERAL,
        ORIGIN_LITERAL,
        ORIGIN_LITERAL,
        ORIGIN_FRESH,
    ]


def test_all_literals(use_backend):
    tags, origins = parse(b"AAAA", b"GGG")
    assert tags == [("L", ord("G"))] * 3
    assert origins == [ORIGIN_LITERAL] * 3


def test_empty_sequence(use_backend):
    idx = RefIndex.build(b"ACGTACGT", 3)
    kinds, f0, f1, origins = factor_packed(b"", idx, 2, False)
    assert len(kinds) == len(f0) == len(f1) == len(origins) == 0


def test_expand_inverts_factor(use_backend, rng):
    ref = random_seq(rng, 400)
    idx = RefIndex.build(ref, 9)
    for _ in range(20):
        seq = mutate(rng, ref, snp=0.03, ins=0.005, dele=0.005)
        for indel2 in (False, True):
            kinds, f0, f1, _ = factor_packed(seq, idx, 4, indel2)
            assert lz1.expand_packed(kinds, f0, f1, ref, len(seq)) == seq
            assert lz1.expand_packed(kinds, f0, f1, ref) == seq


def test_expand_rejects_bad_matches(use_backend):
    ref = b"ACGTACGT"
    k = np.array([1], dtype=np.uint8)
    for f0, f1 in [(0, 3), (7, 3), (1, 0), (1, 9)]:
        with pytest.raises(CorruptArchiveError):
            lz1.expand_packed(
                k, np.array([f0], dtype=np.int64), np.array([f1], dtype=np.int64), ref
            )


def test_expand_checks_declared_length(use_backend):
    ref = b"ACGTACGT"
    kinds = np.array([1], dtype=np.uint8)
    f0 = np.array([1], dtype=np.int64)
    f1 = np.array([4], dtype=np.int64)
    assert lz1.expand_packed(kinds, f0, f1, ref, 4) == b"ACGT"
    with pytest.raises(CorruptArchiveError):
        lz1.expand_packed(kinds, f0, f1, ref, 5)


def test_origins_replay_brute_force(use_backend, rng):
    # every fresh match must be the greedy longest; every plain literal
    # must mean the index has nothing at that position
    for _ in range(10):
        ref = random_seq(rng, int(rng.integers(30, 150)))
        seq = mutate(rng, ref, snp=0.08, ins=0.01, dele=0.01)
        h1m, h1e = 4, 2
        idx = RefIndex.build(ref, h1m, max_candidates=10 ** 9)
        kinds, f0, f1, origins = factor_packed(seq, idx, h1e, False)
        i = 0
        for t in range(len(kinds)):
            if origins[t] == ORIGIN_FRESH:
                assert brute_longest(ref, seq, i, h1m) == (int(f0[t]) - 1, int(f1[t]))
            elif origins[t] == ORIGIN_LITERAL:
                assert brute_longest(ref, seq, i, h1m) is None
            i += 1 if kinds[t] == 0 else int(f1[t])
        assert i == len(seq)


def test_coverage_partition(use_backend, rng):
    # the parse covers the sequence exactly once, no gaps or overlaps
    ref = random_seq(rng, 300)
    seq = mutate(rng, ref, snp=0.05, ins=0.01, dele=0.01)
    kinds, f0, f1, _ = factor_packed(seq, RefIndex.build(ref, 6), 3, True)
    cover = np.where(kinds == 0, 1, f1).sum()
    assert int(cover) == len(seq)
