"""Hash primitives against published FNV-1a vectors and the sizing rule."""

import pytest

from gdc2.hashing import FNV_OFFSET, FNV_PRIME, fnv1a, table_size_for


# Reference vectors for 64-bit FNV-1a, computed from the published
# offset basis and prime independently of the module under test.
VECTORS = [
    (b"", 0xCBF29CE484222325),
    (b"a", 0xAF63DC4C8601EC8C),
    (b"b", 0xAF63DF4C8601F1A5),
    (b"foobar", 0x85944171F73967E8),
]


@pytest.mark.parametrize("data,expected", VECTORS)
def test_fnv1a_reference_vectors(data, expected):
    assert fnv1a(data) == expected


def test_fnv1a_matches_naive_reimplementation():
    def naive(data):
        h = 0xCBF29CE484222325
        for b in data:
            h = ((h ^ b) * 0x100000001B3) % (1 << 64)
        return h

    for data in (b"\x00", b"\x00\x01\x02", b"ACGTACGT" * 9, bytes(range(256))):
        assert fnv1a(data) == naive(data)


def test_fnv1a_chaining():
    # feeding bytes one at a time through the seed argument must agree
    h = FNV_OFFSET
    for b in b"chained":
        h = fnv1a(bytes([b]), h)
    assert h == fnv1a(b"chained")


def test_constants():
    assert FNV_OFFSET == 14695981039346656037
    assert FNV_PRIME == 1099511628211


def test_table_size_small_values():
    assert table_size_for(0) == 2
    assert table_size_for(1) == 2
    assert table_size_for(2) == 4
    assert table_size_for(7) == 16
    assert table_size_for(11) == 16
    assert table_size_for(12) == 32


def test_table_size_large_value():
    # 10^6 - 14 keys need 2^21 slots: 2^20 * 0.7 = 734003.2 < 999986
    assert table_size_for(999986) == 2 ** 21


@pytest.mark.parametrize("n", [1, 3, 10, 100, 12345, 999986, 5_000_000])
def test_table_size_invariants(n):
    size = table_size_for(n)
    assert size & (size - 1) == 0
    assert n * 10 <= size * 7  # load factor at most 0.7
    if size > 2:
        assert n * 10 > (size >> 1) * 7  # and minimal


def test_table_size_respects_min_size():
    assert table_size_for(1, min_size=1024) == 1024
    assert table_size_for(5000, min_size=1024) == 8192
