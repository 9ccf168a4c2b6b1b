import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_counts, ctx
from jointvlmc.counts import build_count_trie, default_depth


@pytest.fixture
def trie_1212():
    return build_count_trie(np.array([0, 1, 0, 1]), 2, 2)


def test_counts_of_1212(trie_1212):
    t = trie_1212
    assert t.get_counts(()).tolist() == [2, 2]
    assert t.get_counts(ctx("1")).tolist() == [0, 2]
    assert t.get_counts(ctx("2")).tolist() == [1, 0]
    assert t.get_counts(ctx("12")).tolist() == [1, 0]
    assert t.get_counts(ctx("21")).tolist() == [0, 1]
    assert t.find(ctx("11")) is None
    assert t.get_counts(ctx("11")).tolist() == [0, 0]


def test_single_symbol_is_root_only():
    t = build_count_trie(np.array([0]), 2, 2)
    assert len(t.levels) == 1
    assert t.get_counts(()).tolist() == [1, 0]


def test_constant_sequence():
    t = build_count_trie(np.zeros(4, dtype=int), 1, 2)
    assert t.get_counts(()).tolist() == [4, 0]
    assert t.get_counts(ctx("1")).tolist() == [3, 0]


def test_depth_zero():
    t = build_count_trie(np.array([0, 1, 1]), 0, 2)
    assert t.node_count == 1
    assert t.get_counts(()).tolist() == [1, 2]


def test_out_of_depth_query(trie_1212):
    with pytest.raises(ValueError, match="depth bound"):
        trie_1212.get_counts(ctx("121"))


def test_default_depth():
    assert default_depth(500, 1000) == 24
    assert default_depth(5, 3) == 4
    assert default_depth(1) == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=50), st.integers(0, 4))
def test_counts_match_brute_force(data, depth):
    t = build_count_trie(np.array(data), depth, 3)
    for d in range(depth + 1):
        for s in itertools.product(range(3), repeat=d):
            assert t.get_counts(s).tolist() == brute_counts(data, s, 3).tolist()
    # lazily materialized: every stored node has N(s) > 0
    for lv in t.levels:
        assert (lv.counts.sum(axis=1) > 0).all()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=50), st.integers(1, 5))
def test_level_totals_and_parent_consistency(data, depth):
    n = len(data)
    t = build_count_trie(np.array(data), depth, 2)
    assert t.get_counts(()).sum() == n
    for d in range(min(depth, n) + 1):
        total = sum(t.total(s) for s in t.contexts(d))
        assert total == n - d
    for d in range(1, len(t.levels)):
        lv, up = t.levels[d], t.levels[d - 1]
        assert (lv.counts.sum(axis=1) <= up.counts[lv.parent].sum(axis=1)).all()
        child_sum = np.zeros_like(up.counts)
        np.add.at(child_sum, lv.parent, lv.counts)
        assert (child_sum <= up.counts).all()
        # only the very first usable position can be missing from the children
        assert (up.counts - child_sum).sum() <= 1
