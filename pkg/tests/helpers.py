"""Small shared utilities for the test suite."""

import numpy as np

from gdc2.model import LITERAL, MATCH1, MATCH2


def write_fasta(path, records, width=60):
    """records: iterable of (id_str, seq_bytes)."""
    with open(path, "wb") as fh:
        for sid, seq in records:
            fh.write(b">" + sid.encode("ascii") + b"\n")
            for off in range(0, len(seq), width):
                fh.write(seq[off:off + width] + b"\n")


def pack_l2_elements(elements):
    """Build packed (kinds, e0, e1, e2) arrays from a readable list.

    Accepted forms:
      ("L", symbol)            literal
      ("M1", pos, length)      level 1 match, pos is 1-based
      ("M2", u, p, tuple_len)  level 2 match, p is 1-based
    """
    n = len(elements)
    kinds = np.empty(n, dtype=np.uint8)
    e0 = np.empty(n, dtype=np.int64)
    e1 = np.empty(n, dtype=np.int64)
    e2 = np.zeros(n, dtype=np.int64)
    for i, el in enumerate(elements):
        tag = el[0]
        if tag == "L":
            kinds[i] = LITERAL
            e0[i] = el[1] if isinstance(el[1], int) else ord(el[1])
            e1[i] = 1
        elif tag == "M1":
            kinds[i] = MATCH1
            e0[i] = el[1]
            e1[i] = el[2]
        elif tag == "M2":
            kinds[i] = MATCH2
            e0[i] = el[1]
            e1[i] = el[2]
            e2[i] = el[3]
        else:
            raise ValueError(tag)
    return kinds, e0, e1, e2


def pack_l1_elements(elements):
    """Same input style as pack_l2_elements, level-1 only (3 arrays)."""
    kinds, e0, e1, e2 = pack_l2_elements(elements)
    assert not (kinds == MATCH2).any()
    return kinds, e0, e1


def unpack_to_tags(kinds, e0, e1, e2=None):
    """Inverse of pack_l2_elements, for readable assertions."""
    out = []
    for i in range(len(kinds)):
        k = int(kinds[i])
        if k == LITERAL:
            out.append(("L", int(e0[i])))
        elif k == MATCH1:
            out.append(("M1", int(e0[i]), int(e1[i])))
        else:
            out.append(("M2", int(e0[i]), int(e1[i]), int(e2[i])))
    return out


def random_seq(rng, n, alphabet=b"ACGT"):
    return rng.choice(np.frombuffer(alphabet, dtype=np.uint8), size=n).tobytes()


def mutate(rng, ref, snp=0.01, ins=0.0, dele=0.0, alphabet=b"ACGT"):
    """Derive a sequence from ref with point edits, for parser tests."""
    out = bytearray()
    i = 0
    n = len(ref)
    while i < n:
        r = rng.random()
        if r < snp:
            c = ref[i]
            while c == ref[i]:
                c = alphabet[rng.integers(len(alphabet))]
            out.append(c)
            i += 1
        elif r < snp + ins:
            out.append(alphabet[rng.integers(len(alphabet))])
        elif r < snp + ins + dele:
            i += 1
        else:
            out.append(ref[i])
            i += 1
    return bytes(out)
