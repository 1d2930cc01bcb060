import random

import numpy as np
import pytest

from espindex.esp import TERMINALS, esp_comp
from espindex.index import EspIndex, IndexFormatError, UnsupportedOperation, build_index, crc64
from espindex.search import Searcher


def test_crc64_check_value():
    # published check value of CRC-64/XZ
    assert crc64(b"123456789") == 0x995DC9BBDF1939FA


def test_single_rule_grammar():
    d = esp_comp(b"ab")
    idx = build_index(d)
    assert len(idx.tl) == len(idx.tr) == 4
    z = d.start
    assert idx.children(z) == (ord("a"), ord("b"))
    assert idx.left_child(ord("a")) is None
    assert idx.reverse_lookup(ord("a"), ord("b")) == z
    assert idx.reverse_lookup(ord("b"), ord("a")) is None


def test_navigation_matches_dictionary(built):
    for _, d, idx in built.values():
        ids = TERMINALS + np.arange(d.n_vars)
        left, right = idx.children_many(ids)
        assert np.array_equal(left, d.left) and np.array_equal(right, d.right)
        for x in ids[::7].tolist():
            assert idx.children(x) == d.rule(x)
            assert idx.reverse_lookup(*d.rule(x)) == x


def test_edges_partition(built):
    _, d, idx = built["words"]
    tl_par = idx.tl.parents()
    tr_par = idx.tr.parents()
    left_edges = {(v, int(tl_par[v])) for v in range(1, len(tl_par))}
    inv = np.argsort(idx.perm.forward)
    right_edges = {(int(inv[w]), int(inv[tr_par[w]])) for w in range(1, len(tr_par))}
    # every node except the sink has one left and one right out-edge
    assert len(left_edges) == len(right_edges) == idx.header.nodes - 1
    dag_left = {(int(idx.nodes_of([x])[0]), int(idx.nodes_of([a])[0]))
                for x, a in zip(TERMINALS + np.arange(d.n_vars), d.left)}
    assert dag_left <= left_edges


def test_occurrence_lists(built):
    _, d, idx = built["words"]
    uses_left, uses_right = {}, {}
    for k, (a, b) in enumerate(zip(d.left.tolist(), d.right.tolist())):
        uses_left.setdefault(a, []).append(TERMINALS + k)
        uses_right.setdefault(b, []).append(TERMINALS + k)
    for x in list(range(97, 105)) + list(range(TERMINALS, TERMINALS + d.n_vars, 11)):
        assert idx.occurrences_as_left(x) == uses_left.get(x, [])
        assert idx.occurrences_as_right(x) == uses_right.get(x, [])
    # T_L siblings are ordered by their right child, as the binary search needs
    for x in range(TERMINALS, TERMINALS + d.n_vars, 5):
        rights = [d.rule(z)[1] for z in idx.occurrences_as_left(x)]
        assert rights == sorted(rights)


def test_reverse_lookup_absent(built):
    _, d, idx = built["dna"]
    rules = set(zip(d.left.tolist(), d.right.tolist()))
    rng = random.Random(0)
    top = TERMINALS + d.n_vars
    xs = [rng.randrange(top) for _ in range(3000)]
    ys = [rng.randrange(top) for _ in range(3000)]
    got = idx.reverse_lookup_many(xs, ys)
    for x, y, g in zip(xs, ys, got.tolist()):
        if (x, y) in rules:
            assert g >= TERMINALS and d.rule(g) == (x, y)
        else:
            assert g == -1 and idx.reverse_lookup(x, y) is None


def test_occ_counts(built):
    text, d, idx = built["words"]
    for b in set(text):
        assert idx.occ[b] == text.count(bytes([b]))
    assert idx.occ[d.start] == 1


def test_serialize_roundtrip(built, tmp_path):
    _, d, idx = built["words"]
    data = idx.to_bytes()
    again = EspIndex.from_bytes(data)
    assert again.to_bytes() == data
    assert again.header == idx.header
    assert sum(idx.section_sizes().values()) == len(data)
    path = tmp_path / "x.idx"
    idx.save(path)
    assert EspIndex.load(path).to_bytes() == data
    # independent builds give identical files
    assert build_index(esp_comp(d.expand()), "1/4", lengths=True).to_bytes() == data


def test_corruption_detected(built):
    data = bytearray(built["words"][2].to_bytes())
    for pos in (10, len(data) // 2, len(data) - 3):
        bad = bytearray(data)
        bad[pos] ^= 0x40
        with pytest.raises(IndexFormatError):
            EspIndex.from_bytes(bytes(bad))
    with pytest.raises(IndexFormatError):
        EspIndex.from_bytes(bytes(data[:-20]))
    with pytest.raises(IndexFormatError):
        EspIndex.from_bytes(b"XXXX" + bytes(data[4:]))
    bad = bytearray(data)
    bad[4] = 9
    with pytest.raises(IndexFormatError, match="version"):
        EspIndex.from_bytes(bytes(bad))


def test_without_lengths():
    text = b"mississippi river " * 20
    idx = EspIndex.from_bytes(build_index(esp_comp(text), 1, lengths=False).to_bytes())
    assert not idx.has_lengths
    s = Searcher(idx)
    assert s.count(b"ssi") == 40
    with pytest.raises(UnsupportedOperation):
        s.count(b"ssi", "core-verify")
    with pytest.raises(UnsupportedOperation):
        s.extract(1, 3)
    assert np.array_equal(idx.yield_lengths, esp_comp(text).yield_lengths())


def test_bad_epsilon():
    with pytest.raises(ValueError):
        build_index(esp_comp(b"abc"), 0)


def test_space_accounting(built):
    _, _, idx = built["dna"]
    space = idx.space()
    n = idx.header.nodes
    assert space["louds_L"] == space["louds_R"] == 2 * n + 1
    terms = idx.bound_terms()
    assert terms["core_bits"] == space["core_bits"]
    assert terms["nodes.louds_term"] == 4 * n
