"""Penalized maximum-likelihood context-tree estimators.

``fit_single`` is the classical context-tree maximizing recursion on one
sample.  ``fit_joint`` runs the three-way recursion on two samples: at each
candidate node the subtree is either one shared leaf, two separately fitted
subtrees, or a further split on the next-older symbol.  Both run bottom-up
over the levels of the count tries (vectorized per level) and then rebuild
the maximizing trees top-down.

Ties are resolved toward the smaller model: leaf before split in the single
recursion, shared leaf before separate trees before split in the joint one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .counts import CountTrie, Level, level_contexts
from .scoring import (JointPartition, PenaltyConfig, criterion, log_ml_rows,
                      single_criterion)

Context = tuple[int, ...]

# relative slack for treating two scores as tied
TIE_RTOL = 1e-12

ORACLE_LIMIT = 2_000_000


def _ge(a, b):
    """a >= b up to rounding noise (elementwise)."""
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return a >= b - TIE_RTOL * scale


# --------------------------------------------------------------------------
# partition validity

@dataclass(frozen=True)
class Violation:
    condition: str     # "T1", "T2" or "T3"
    context: Context
    detail: str

    def __str__(self):
        return f"({self.condition}) {self.detail}"


def tree_violations(tree, alphabet_size: int, label: str = "tree") -> list[tuple[Context, str]]:
    """Suffix-freeness and completeness problems of a context set."""
    tree = set(tree)
    if not tree:
        return [((), f"{label} is empty")]
    problems = []
    internal = set()
    for s in tree:
        for j in range(1, len(s) + 1):
            internal.add(s[j:])
    for s in sorted(tree & internal, key=lambda c: (len(c), c)):
        problems.append((s, f"{label}: context {s} is a proper suffix of another context"))
    for v in sorted(internal - tree, key=lambda c: (len(c), c)):
        for a in range(alphabet_size):
            child = (a,) + v
            if child not in tree and child not in internal:
                problems.append((v, f"{label}: node {v} missing child {child}"))
    return problems


def validate_partition(part: JointPartition, alphabet_size) -> list[Violation]:
    """Empty list if the triple satisfies disjointness and completeness.

    ``alphabet_size`` may also be an :class:`~jointvlmc.seqio.Alphabet`.
    """
    k = alphabet_size if isinstance(alphabet_size, int) else len(alphabet_size)
    out = []
    for name, other in (("sigma1", part.sigma1), ("sigma2", part.sigma2)):
        for s in sorted(part.sigma0 & other):
            out.append(Violation("T1", s, f"context {s} in both sigma0 and {name}"))
    for cond, tree, label in (("T2", part.tau1, "sigma0|sigma1"),
                              ("T3", part.tau2, "sigma0|sigma2")):
        out.extend(Violation(cond, s, msg) for s, msg in tree_violations(tree, k, label))
    return out


# --------------------------------------------------------------------------
# score table

@dataclass
class UnionLevel:
    parent: np.ndarray
    symbol: np.ndarray
    cx: np.ndarray
    cy: np.ndarray
    child_start: np.ndarray = field(default=None)
    child_end: np.ndarray = field(default=None)

    def __len__(self):
        return int(self.parent.size)


@dataclass
class ScoreTable:
    """Per-level node scores and decision indices of the joint recursion."""

    levels: list[UnionLevel]
    vx: list[np.ndarray]
    vy: list[np.ndarray]
    vxy: list[np.ndarray]
    rxy: list[np.ndarray]
    chix: list[np.ndarray]
    chiy: list[np.ndarray]
    chixy: list[np.ndarray]
    depth: int

    def rows(self) -> Iterator[dict]:
        for d in range(len(self.levels)):
            ctxs = level_contexts(self.levels, d)
            for j, s in enumerate(ctxs):
                yield {"context": s, "vx": float(self.vx[d][j]), "vy": float(self.vy[d][j]),
                       "vxy": float(self.vxy[d][j]), "chix": int(self.chix[d][j]),
                       "chiy": int(self.chiy[d][j]), "chixy": int(self.chixy[d][j])}


@dataclass
class SingleFit:
    tree: list[Context]
    counts: dict[Context, np.ndarray]
    score: float

    @property
    def theta(self) -> dict[Context, np.ndarray | None]:
        return {s: ml_theta(c) for s, c in self.counts.items()}


@dataclass
class EstimationResult:
    partition: JointPartition
    counts_x: dict[Context, np.ndarray]   # for every context of tau1
    counts_y: dict[Context, np.ndarray]   # for every context of tau2
    score: float
    score_table: ScoreTable | None = None

    def _theta(self, group: int, smoothing: str = "ml") -> dict:
        est = ml_theta if smoothing == "ml" else kt_theta
        p = self.partition
        if group == 0:
            return {s: est(self.counts_x[s] + self.counts_y[s]) for s in p.sigma0}
        if group == 1:
            return {s: est(self.counts_x[s]) for s in p.sigma1}
        return {s: est(self.counts_y[s]) for s in p.sigma2}

    @property
    def theta0(self):
        return self._theta(0)

    @property
    def theta1(self):
        return self._theta(1)

    @property
    def theta2(self):
        return self._theta(2)

    def source_theta(self, which: str, smoothing: str = "ml") -> dict:
        """Context -> distribution for the X (``"x"``) or Y (``"y"``) source."""
        out = self._theta(0, smoothing)
        out.update(self._theta(1 if which == "x" else 2, smoothing))
        return out


def ml_theta(counts) -> np.ndarray | None:
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    return c / total if total > 0 else None


def kt_theta(counts) -> np.ndarray:
    c = np.asarray(counts, dtype=np.float64)
    return (c + 0.5) / (c.sum() + 0.5 * c.size)


# --------------------------------------------------------------------------
# recursions

def _single_levels(trie: CountTrie, depth: int) -> list[UnionLevel]:
    zeros = np.zeros((0, trie.alphabet_size), dtype=np.int64)
    out = []
    for lv in trie.levels[:depth + 1]:
        out.append(UnionLevel(lv.parent, lv.symbol, lv.counts, zeros))
    _link_children(out)
    return out


def align_tries(tx: CountTrie, ty: CountTrie, depth: int) -> list[UnionLevel]:
    """Merge two tries level by level into the union of their observed nodes."""
    k = tx.alphabet_size
    if ty.alphabet_size != k:
        raise ValueError("tries have different alphabets")
    levels = [UnionLevel(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64),
                         tx.levels[0].counts, ty.levels[0].counts)]
    map_x = np.zeros(1, dtype=np.int64)
    map_y = np.zeros(1, dtype=np.int64)
    for d in range(1, depth + 1):
        has_x, has_y = d < len(tx.levels), d < len(ty.levels)
        if not (has_x or has_y):
            break
        empty = np.zeros(0, dtype=np.int64)
        kx = map_x[tx.levels[d].parent] * k + tx.levels[d].symbol if has_x else empty
        ky = map_y[ty.levels[d].parent] * k + ty.levels[d].symbol if has_y else empty
        keys = np.union1d(kx, ky)
        map_x = np.searchsorted(keys, kx)
        map_y = np.searchsorted(keys, ky)
        cx = np.zeros((keys.size, k), dtype=np.int64)
        cy = np.zeros((keys.size, k), dtype=np.int64)
        if has_x:
            cx[map_x] = tx.levels[d].counts
        if has_y:
            cy[map_y] = ty.levels[d].counts
        levels.append(UnionLevel(keys // k, keys % k, cx, cy))
    _link_children(levels)
    return levels


def _link_children(levels: list[UnionLevel]) -> None:
    for d, lv in enumerate(levels):
        if d + 1 < len(levels):
            par = levels[d + 1].parent
            idx = np.arange(len(lv))
            lv.child_start = np.searchsorted(par, idx, side="left")
            lv.child_end = np.searchsorted(par, idx, side="right")
        else:
            lv.child_start = lv.child_end = np.zeros(len(lv), dtype=np.int64)


def _child_sums(levels, d, values, unobserved, k):
    """Sum of child values of every node at level d, unobserved children included."""
    size = len(levels[d])
    if d + 1 >= len(levels):
        return np.full(size, k * unobserved)
    par = levels[d + 1].parent
    sums = np.bincount(par, weights=values, minlength=size)
    present = np.bincount(par, minlength=size)
    return sums + (k - present) * unobserved


def _single_pass(levels, counts_of, beta, depth, k):
    """Bottom-up single-source recursion; returns per-level (V, chi)."""
    V = [None] * len(levels)
    chi = [None] * len(levels)
    for d in range(len(levels) - 1, -1, -1):
        R = log_ml_rows(counts_of(levels[d])) - beta
        if d == depth:
            V[d], chi[d] = R, np.zeros(R.size, dtype=np.int8)
            continue
        split = _child_sums(levels, d, V[d + 1] if d + 1 < len(levels) else None, -beta, k)
        leaf = _ge(R, split)
        V[d] = np.where(leaf, R, split)
        chi[d] = (~leaf).astype(np.int8)
    return V, chi


def _rebuild_single(levels, chi, counts_of, k, d, j, ctx, out: dict) -> None:
    stack = [(d, j, ctx)]
    while stack:
        d, j, ctx = stack.pop()
        if j is None or chi[d][j] == 0:
            out[ctx] = (counts_of(levels[d])[j].copy() if j is not None
                        else np.zeros(k, dtype=np.int64))
            continue
        stack.extend(_children(levels, d, j, ctx, k))


def _children(levels, d, j, ctx, k):
    lv = levels[d]
    nxt = levels[d + 1] if d + 1 < len(levels) else None
    found = {}
    if nxt is not None:
        for c in range(int(lv.child_start[j]), int(lv.child_end[j])):
            found[int(nxt.symbol[c])] = c
    return [(d + 1, found.get(a), (a,) + ctx) for a in range(k - 1, -1, -1)]


def _resolve_depth(depth, *tries) -> int:
    bound = min(t.depth_bound for t in tries)
    if depth is None:
        return bound
    if depth < 0 or depth > bound:
        raise ValueError(f"depth {depth} outside [0, {bound}] allowed by the count tries")
    return depth


def _cx(lv):
    return lv.cx


def _cy(lv):
    return lv.cy


def fit_single(trie: CountTrie, pen: PenaltyConfig = PenaltyConfig(),
               depth: int | None = None) -> SingleFit:
    """BIC context tree of one sample over trees of depth <= ``depth``."""
    depth = _resolve_depth(depth, trie)
    k = trie.alphabet_size
    beta = pen.beta(trie.seq_length, k)
    levels = _single_levels(trie, depth)
    V, chi = _single_pass(levels, _cx, beta, depth, k)
    counts: dict = {}
    _rebuild_single(levels, chi, _cx, k, 0, 0, (), counts)
    return SingleFit(sorted(counts, key=lambda c: (len(c), c)), counts, float(V[0][0]))


def fit_joint(tx: CountTrie, ty: CountTrie, pen: PenaltyConfig = PenaltyConfig(),
              depth: int | None = None, keep_scores: bool = False) -> EstimationResult:
    """Jointly estimate shared, X-specific and Y-specific contexts."""
    depth = _resolve_depth(depth, tx, ty)
    k = tx.alphabet_size
    n, m = tx.seq_length, ty.seq_length
    bx, by, bxy = pen.beta(n, k), pen.beta(m, k), pen.beta(n + m, k)
    levels = align_tries(tx, ty, depth)

    Vx, chix = _single_pass(levels, _cx, bx, depth, k)
    Vy, chiy = _single_pass(levels, _cy, by, depth, k)

    # value of a node unobserved in both samples
    shared_wins = bool(_ge(-bxy, -bx - by))
    u_xy = -bxy if shared_wins else -bx - by

    Vxy = [None] * len(levels)
    Rxy = [None] * len(levels)
    chixy = [None] * len(levels)
    for d in range(len(levels) - 1, -1, -1):
        lv = levels[d]
        R = log_ml_rows(lv.cx + lv.cy) - bxy
        sep = Vx[d] + Vy[d]
        if d == depth:
            split = np.full(R.size, -np.inf)
        else:
            split = _child_sums(levels, d, Vxy[d + 1] if d + 1 < len(levels) else None,
                                u_xy, k)
        c1 = _ge(R, np.maximum(sep, split))
        c2 = ~c1 & _ge(sep, split)
        chi = np.where(c1, 1, np.where(c2, 2, 3)).astype(np.int8)
        Vxy[d] = np.where(c1, R, np.where(c2, sep, split))
        Rxy[d] = R
        chixy[d] = chi

    s0, s1, s2 = set(), {}, {}
    counts_x: dict = {}
    counts_y: dict = {}
    stack = [(0, 0, ())]
    while stack:
        d, j, ctx = stack.pop()
        if j is None:
            zero = np.zeros(k, dtype=np.int64)
            counts_x[ctx] = zero
            counts_y[ctx] = zero.copy()
            if shared_wins:
                s0.add(ctx)
            else:
                s1[ctx] = s2[ctx] = None
            continue
        c = chixy[d][j]
        if c == 1:
            s0.add(ctx)
            counts_x[ctx] = levels[d].cx[j].copy()
            counts_y[ctx] = levels[d].cy[j].copy()
        elif c == 2:
            _rebuild_single(levels, chix, _cx, k, d, j, ctx, s1)
            _rebuild_single(levels, chiy, _cy, k, d, j, ctx, s2)
        else:
            stack.extend(_children(levels, d, j, ctx, k))
    for ctx, cnt in s1.items():
        counts_x[ctx] = cnt if cnt is not None else np.zeros(k, dtype=np.int64)
    for ctx, cnt in s2.items():
        counts_y[ctx] = cnt if cnt is not None else np.zeros(k, dtype=np.int64)
    # counts of shared contexts on the other side are needed for pooling
    part = JointPartition(frozenset(s0), frozenset(s1), frozenset(s2))

    table = None
    if keep_scores:
        table = ScoreTable(levels, Vx, Vy, Vxy, Rxy, chix, chiy, chixy, depth)
    return EstimationResult(part, counts_x, counts_y, float(Vxy[0][0]), table)


def estimate_joint(x, y, pen: PenaltyConfig = PenaltyConfig(), depth: int | None = None,
                   alphabet_size: int | None = None, keep_scores: bool = False):
    """Build both count tries and run :func:`fit_joint`."""
    from .counts import build_count_trie, default_depth
    if depth is None:
        depth = default_depth(len(x), len(y))
    tx = build_count_trie(x, depth, alphabet_size)
    ty = build_count_trie(y, depth, alphabet_size)
    return fit_joint(tx, ty, pen, depth, keep_scores=keep_scores), tx, ty


# --------------------------------------------------------------------------
# exhaustive oracle

def complete_trees(alphabet_size: int, depth: int) -> list[frozenset]:
    """Every complete context tree of depth <= ``depth``."""
    if depth == 0:
        return [frozenset({()})]
    sub = complete_trees(alphabet_size, depth - 1)
    out = [frozenset({()})]
    for combo in itertools.product(sub, repeat=alphabet_size):
        tree = set()
        for a, t in enumerate(combo):
            tree.update(s + (a,) for s in t)
        out.append(frozenset(tree))
    return out


def _tie_key(part: JointPartition):
    def canon(s):
        return sorted(s, key=lambda c: (len(c), c))
    return (len(part.contexts()), canon(part.sigma0), canon(part.sigma1), canon(part.sigma2))


def enumerate_partitions(alphabet_size: int, depth: int) -> Iterator[JointPartition]:
    trees = complete_trees(alphabet_size, depth)
    total = 0
    for t1 in trees:
        for t2 in trees:
            total += 2 ** len(t1 & t2)
    if total > ORACLE_LIMIT:
        raise ValueError(f"{total} partitions exceed the enumeration limit {ORACLE_LIMIT}")
    for t1 in trees:
        for t2 in trees:
            common = sorted(t1 & t2)
            for r in range(len(common) + 1):
                for shared in itertools.combinations(common, r):
                    s0 = frozenset(shared)
                    yield JointPartition(s0, t1 - s0, t2 - s0)


def oracle_fit_joint(tx: CountTrie, ty: CountTrie, pen: PenaltyConfig = PenaltyConfig(),
                     depth: int = 2) -> EstimationResult:
    """Maximize the joint criterion by brute force over all partitions."""
    if depth > 3:
        raise ValueError("oracle enumeration limited to depth <= 3")
    _resolve_depth(depth, tx, ty)
    best, best_score = None, -np.inf
    for part in enumerate_partitions(tx.alphabet_size, depth):
        score = criterion(part, tx, ty, pen)
        if best is None:
            best, best_score = part, score
            continue
        if score > best_score and not _ge(best_score, score):
            best, best_score = part, score
        elif _ge(score, best_score) and _ge(best_score, score) and _tie_key(part) < _tie_key(best):
            best, best_score = part, max(score, best_score)
    counts_x = {s: tx.get_counts(s) for s in best.tau1}
    counts_y = {s: ty.get_counts(s) for s in best.tau2}
    for s in best.sigma0:
        counts_x[s], counts_y[s] = tx.get_counts(s), ty.get_counts(s)
    return EstimationResult(best, counts_x, counts_y, float(best_score))


def oracle_fit_single(trie: CountTrie, pen: PenaltyConfig = PenaltyConfig(),
                      depth: int = 2) -> tuple[frozenset, float]:
    best = None
    for tree in complete_trees(trie.alphabet_size, depth):
        score = single_criterion(tree, trie, pen)
        key = (len(tree), sorted(tree))
        if best is None or score > best[1] + TIE_RTOL * max(1, abs(score)) or \
                (_ge(score, best[1]) and _ge(best[1], score) and key < best[2]):
            best = (tree, score, key)
    return best[0], best[1]
