import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from espindex.esp import TERMINALS, esp_comp
from espindex.grammar import GrammarError, level_bases, normalize_dag


def test_expand_and_lengths(built):
    text, d, _ = built["words"]
    assert d.expand() == text
    assert d.expand(ord("a")) == b"a"
    lens = d.yield_lengths()
    assert lens[ord("a")] == 1
    assert d.yield_length(d.start) == len(text)
    for x in range(TERMINALS, TERMINALS + d.n_vars, 37):
        a, b = d.rule(x)
        assert d.expand(x) == d.expand(a) + d.expand(b)
        assert lens[x] == lens[a] + lens[b]
    with pytest.raises(GrammarError):
        d.rule(5)


def test_level_layout(built):
    for _, d, _ in built.values():
        d.check()
        if not d.n_vars:
            continue
        assert np.all(np.diff(d.level) >= 0)
        # within a level the right-hand sides increase with the id
        for lv in np.unique(d.level):
            k = np.flatnonzero(d.level == lv)
            pairs = list(zip(d.left[k].tolist(), d.right[k].tolist()))
            assert pairs == sorted(pairs) and len(set(pairs)) == len(pairs)
        # every left child belongs to the previous level
        base = level_bases(d.level)
        left_var = d.left >= TERMINALS
        assert np.all(d.level[d.left[left_var] - TERMINALS] == d.level[left_var] - 1)
        assert np.all(d.level[~left_var] == 1)
        assert np.all(d.left < base)


def test_normalize_dag_small():
    d = esp_comp(b"a")
    dag = normalize_dag(d)
    assert dag.size == 2 and dag.left.tolist() == [-1, 0]
    d = esp_comp(b"ab")
    dag = normalize_dag(d)
    assert dag.size == 4
    assert dag.left.tolist() == [-1, 0, 0, 1] and dag.right.tolist() == [-1, 0, 0, 2]


@settings(max_examples=40, deadline=None)
@given(st.binary(min_size=1, max_size=300))
def test_normalize_dag_counts(s):
    d = esp_comp(s)
    dag = normalize_dag(d)
    assert dag.size == d.n_vars + len(set(s)) + 1
    assert np.all(dag.left[1:] >= 0) and np.all(dag.right[1:] >= 0)
    assert np.all(dag.left[1:] < np.arange(1, dag.size))


def test_height_bound(built):
    for text, d, _ in built.values():
        if len(text) > 1:
            assert d.cnf_height() <= 4 * np.log2(len(text))
