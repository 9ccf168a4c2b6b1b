"""Suffix-count tries: N(s, a) for every observed context up to a depth bound.

Contexts are tuples of symbol indices, oldest symbol first, so ``s[-1]`` is
the symbol immediately preceding the predicted one.  The child edge from
``v`` to ``a + v`` is labelled by the next-older symbol ``a``.

Level ``d`` of a trie holds the observed contexts of length ``d`` sorted by
``(parent, symbol)``, which makes the children of a node a contiguous slice
of the next level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence as _Seq

import numpy as np

from .seqio import Sequence

MAX_DEFAULT_DEPTH = 24


@dataclass(frozen=True)
class Level:
    parent: np.ndarray   # index into the previous level
    symbol: np.ndarray   # oldest symbol of the context
    counts: np.ndarray   # shape (nodes, |A|)

    def __len__(self) -> int:
        return int(self.parent.size)

    def keys(self, alphabet_size: int) -> np.ndarray:
        return self.parent * alphabet_size + self.symbol


class CountTrie:
    """Lazy suffix trie of one sequence; only contexts with N(s) > 0 exist."""

    def __init__(self, levels: list[Level], alphabet_size: int, seq_length: int,
                 depth_bound: int):
        self.levels = levels
        self.alphabet_size = alphabet_size
        self.seq_length = seq_length
        self.depth_bound = depth_bound
        self._keys = [lv.keys(alphabet_size) for lv in levels]

    @property
    def node_count(self) -> int:
        return sum(len(lv) for lv in self.levels)

    def find(self, context: _Seq[int]) -> int | None:
        """Index of ``context`` within its level, or None if unobserved."""
        k = self.alphabet_size
        node = 0
        for d in range(1, len(context) + 1):
            if d >= len(self.levels):
                return None
            key = node * k + int(context[-d])
            keys = self._keys[d]
            j = int(np.searchsorted(keys, key))
            if j == keys.size or keys[j] != key:
                return None
            node = j
        return node

    def get_counts(self, context: _Seq[int]) -> np.ndarray:
        if len(context) > self.depth_bound:
            raise ValueError(
                f"context of length {len(context)} exceeds depth bound {self.depth_bound}")
        j = self.find(context)
        if j is None:
            return np.zeros(self.alphabet_size, dtype=np.int64)
        return self.levels[len(context)].counts[j].copy()

    def total(self, context: _Seq[int]) -> int:
        return int(self.get_counts(context).sum())

    def contexts(self, depth: int) -> Iterator[tuple[int, ...]]:
        """All observed contexts of the given length, in level order."""
        if depth >= len(self.levels):
            return iter(())
        return iter(level_contexts(self.levels, depth))


def level_contexts(levels: list, depth: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for d in range(1, depth + 1):
        lv = levels[d]
        out = [(int(a),) + out[p] for p, a in zip(lv.parent, lv.symbol)]
    return out


def default_depth(n: int, m: int | None = None) -> int:
    longest = n if m is None else max(n, m)
    return max(0, min(longest - 1, MAX_DEFAULT_DEPTH))


def build_count_trie(seq, depth: int, alphabet_size: int | None = None) -> CountTrie:
    """Count every context of length <= ``depth`` that occurs as a past in ``seq``.

    ``seq`` is a :class:`Sequence` or an integer array (then ``alphabet_size``
    is required).
    """
    if isinstance(seq, Sequence):
        data = seq.data
        k = len(seq.alphabet)
    else:
        data = np.asarray(seq, dtype=np.int64)
        if alphabet_size is None:
            raise ValueError("alphabet_size required for raw arrays")
        k = alphabet_size
    if depth < 0:
        raise ValueError("depth must be >= 0")
    n = int(data.size)
    if n < 1:
        raise ValueError("sequence must be non-empty")

    root = Level(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64),
                 np.bincount(data, minlength=k).reshape(1, k).astype(np.int64))
    levels = [root]
    # ids[j - d] = node id (at level d) of the context preceding position j
    ids = np.zeros(n, dtype=np.int64)
    for d in range(1, min(depth, n - 1) + 1):
        prev = ids[1:]                       # positions j = d..n-1, level d-1
        keys = prev * k + data[:n - d]       # prepend x[j-d]
        uniq, inv = np.unique(keys, return_inverse=True)
        nxt = data[d:]
        counts = np.bincount(inv * k + nxt, minlength=uniq.size * k).reshape(uniq.size, k)
        levels.append(Level(uniq // k, uniq % k, counts.astype(np.int64)))
        ids = inv
    return CountTrie(levels, k, n, depth)
