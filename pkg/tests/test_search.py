import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from espindex.esp import TERMINALS, esp_comp
from espindex.index import build_index
from espindex.search import (
    LEFT,
    RIGHT,
    OverlayDictionary,
    Searcher,
    VirtualNode,
    core,
    count_adjacency,
    count_core_verify,
    fact,
    naive_count,
    naive_positions,
    pattern_parse,
)


def leaf_nodes(s: Searcher, root: int):
    """VirtualNode of every leaf, by explicit descent."""
    out = []
    stack = [VirtualNode.root(s, root)]
    while stack:
        v = stack.pop()
        if v.symbol < TERMINALS:
            out.append(v)
            continue
        stack.append(v.descend(RIGHT))
        stack.append(v.descend(LEFT))
    return out


def test_banana():
    idx = build_index(esp_comp(b"banana"))
    assert count_adjacency(b"ana", idx) == 2
    assert count_core_verify(b"ana", idx) == 2
    assert count_adjacency(b"bananas", idx) == 0
    assert count_adjacency(b"banana", idx) == count_core_verify(b"banana", idx) == 1


def test_virtual_node_navigation(built):
    text, d, idx = built["words"]
    s = Searcher(idx)
    root = VirtualNode.root(s, d.start)
    assert root.lra() is None and root.lla() is None
    child = root.descend(LEFT)
    assert child.lra().path == root.path
    leaves = leaf_nodes(s, d.start)
    assert bytes(v.symbol for v in leaves) == text
    assert [v.start for v in leaves] == list(range(len(text)))
    # the rightmost leaf has no lowest right ancestor
    assert leaves[-1].lra() is None and leaves[0].lla() is None
    for a, b in zip(leaves, leaves[1:]):
        cands = list(a.right_neighbor_candidates())
        assert cands[0].symbol == d.rule(a.lra().symbol)[1]
        assert [c.start for c in cands] == [b.start] * len(cands)
        assert cands[-1].path == b.path
        levels = [d.level[c.symbol - TERMINALS] for c in cands if c.symbol >= TERMINALS]
        assert all(x > y for x, y in zip(levels, levels[1:]))
        back = list(b.left_neighbor_candidates())
        assert back[-1].path == a.path


def test_lra_against_explicit_tree():
    text = b"abcabcabdabcab" * 9
    d = esp_comp(text)
    s = Searcher(build_index(d))
    for v in leaf_nodes(s, d.start):
        a = v.lra()
        # the explicit answer: deepest ancestor entered through a left edge
        k = max((i for i in range(1, len(v.path)) if v.path[i][1] == LEFT), default=None)
        assert (a is None) == (k is None)
        if a is not None:
            assert a.path == v.path[:k]
            assert a.start <= v.start < a.start + a.length


def test_overlay_ids():
    ov = OverlayDictionary()
    a = ov.name(1, 2)
    assert ov.name(1, 2) == a and ov.name(2, 1) == a + 1
    assert a >= 1 << 40


def test_pattern_parse(built):
    text, d, idx = built["words"]
    x = max(range(TERMINALS, TERMINALS + d.n_vars), key=lambda v: (d.level[v - TERMINALS], -v))
    p = d.expand(x)[:300]
    first = pattern_parse(p, idx)
    again = pattern_parse(p, idx)
    for a, b in zip(first.levels, again.levels):
        assert np.array_equal(a.symbols, b.symbols)
    # certified symbols are text symbols with the right yield
    for _, sym, off, ln in first.stable_symbols():
        assert sym < TERMINALS + d.n_vars
        assert d.expand(sym) == p[off:off + ln]
    assert pattern_parse(b"abz\x00", idx).absent
    assert count_adjacency(b"abz\x00", idx) == 0


def test_core_and_fact(built):
    text, d, idx = built["dna"]
    rng = random.Random(2)
    assert core(b"a", idx).symbol == ord("a")
    for _ in range(60):
        m = rng.randint(1, 800)
        i = rng.randrange(len(text) - m)
        p = text[i:i + m]
        c = core(p, idx)
        assert d.expand(c.symbol) == p[c.start:c.stop]
        pieces = fact(p, idx)
        assert b"".join(d.expand(q.symbol) for q in pieces) == p
        assert pieces[0].start == 0 and all(a.stop == b.start for a, b in zip(pieces, pieces[1:]))
        assert max(q.length for q in pieces) == c.length


@pytest.mark.parametrize("name", ["words", "dna", "runs"])
def test_strategies_match_scan(built, name):
    text, _, idx = built[name]
    s = Searcher(idx)
    rng = random.Random(hash(name) & 0xFFFF)
    for _ in range(120):
        m = rng.choice([1, 2, 3, 5, 8, 13, 30, 100, 400])
        i = rng.randrange(len(text) - m)
        p = text[i:i + m]
        if rng.random() < 0.3:
            b = bytearray(p)
            b[rng.randrange(m)] = rng.choice(b"abcdgt ")
            p = bytes(b)
        want = naive_count(text, p)
        assert s.count(p) == want
        assert s.count(p, "core-verify") == want
        assert s.count(p, "core-verify", prefix_rate=0.5) == want
    assert s.count(text) == 1
    assert s.count(text + b"a") == 0
    assert s.count(b"") == 0


def test_locate_and_extract(built):
    text, _, idx = built["words"]
    s = Searcher(idx)
    rng = random.Random(5)
    assert s.extract(1, len(text)) == text
    for _ in range(50):
        i = rng.randint(1, len(text))
        j = rng.randint(i, min(len(text), i + 500))
        assert s.extract(i, j) == text[i - 1:j]
    with pytest.raises(IndexError):
        s.extract(0, 3)
    with pytest.raises(IndexError):
        s.extract(5, len(text) + 1)
    for _ in range(30):
        m = rng.choice([2, 4, 9, 40])
        i = rng.randrange(len(text) - m)
        p = text[i:i + m]
        want = naive_positions(text, p)
        assert s.locate(p).tolist() == want
        assert s.locate(p, "core-verify").tolist() == want


def test_decode_window_is_local(built):
    text, d, idx = built["dna"]
    s = Searcher(idx)
    before = s.decoded
    s.decode(d.start, 5000, 5100)
    assert s.decoded - before == 100


def test_single_symbol_text():
    idx = build_index(esp_comp(b"a"))
    s = Searcher(idx)
    assert s.count(b"a") == 1 and s.count(b"aa") == 0 and s.count(b"b") == 0
    assert s.extract(1, 1) == b"a"
    assert s.locate(b"a").tolist() == [0]


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="ab", min_size=1, max_size=120), st.data())
def test_count_property(t, data):
    text = t.encode()
    s = Searcher(build_index(esp_comp(text)))
    for _ in range(5):
        m = data.draw(st.integers(1, len(text)))
        i = data.draw(st.integers(0, len(text) - m))
        p = text[i:i + m]
        want = naive_count(text, p)
        assert s.count(p) == want == s.count(p, "core-verify")


def test_index_untouched_by_queries(built):
    text, _, idx = built["runs"]
    before = idx.to_bytes()
    s = Searcher(idx)
    for m in (3, 30, 300):
        s.count(text[100:100 + m])
        s.count(text[100:100 + m], "core-verify")
    assert idx.to_bytes() == before
