"""Probabilistic context-tree sources.

A source is a complete context tree with one next-symbol distribution per
context.  Stationary quantities go through the order-``d`` Markov chain on
strings of length ``d`` (the tree depth), encoded with the most recent
symbol as the least significant base-|A| digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .estimators import tree_violations

Context = tuple[int, ...]

MAX_STATES = 2 ** 20
DENSE_LIMIT = 4096


class ModelError(ValueError):
    pass


class ProbabilisticContextTree:
    def __init__(self, alphabet_size: int, theta: Mapping[Context, object]):
        self.alphabet_size = int(alphabet_size)
        problems = tree_violations(theta.keys(), self.alphabet_size)
        if problems:
            raise ModelError(problems[0][1])
        self.theta: dict[Context, np.ndarray] = {}
        for s, p in theta.items():
            p = np.asarray(p, dtype=np.float64)
            if p.shape != (self.alphabet_size,) or (p < 0).any() or abs(p.sum() - 1) > 1e-12:
                raise ModelError(f"context {s}: invalid distribution {p}")
            self.theta[tuple(s)] = p
        self.depth = max(len(s) for s in self.theta)

    @property
    def tree(self) -> list[Context]:
        return sorted(self.theta, key=lambda c: (len(c), c))

    def lookup_context(self, past) -> Context:
        """The unique context that is a suffix of ``past`` (oldest first)."""
        past = tuple(int(a) for a in past)
        if len(past) < self.depth:
            raise ModelError(f"past of length {len(past)} shorter than tree depth {self.depth}")
        for j in range(self.depth + 1):
            s = past[len(past) - j:]
            if s in self.theta:
                return s
        raise ModelError(f"no context matches past {past}")  # unreachable for complete trees

    def __repr__(self):
        return f"ProbabilisticContextTree({self.alphabet_size}, {self.theta!r})"


@dataclass(frozen=True)
class MarkovEmbedding:
    order: int
    alphabet_size: int
    transition: np.ndarray   # (|A|^order, |A|): P(next symbol | state)
    pi: np.ndarray

    @property
    def states(self) -> np.ndarray:
        """Indices of states with positive stationary probability."""
        return np.flatnonzero(self.pi > 0)

    def next_state(self, state, symbol):
        return (state * self.alphabet_size + symbol) % (self.alphabet_size ** self.order)

    def kernel(self) -> csr_matrix:
        num = self.transition.shape[0]
        k = self.alphabet_size
        rows = np.repeat(np.arange(num), k)
        cols = self.next_state(rows, np.tile(np.arange(k), num))
        P = csr_matrix((self.transition.ravel(), (rows, cols)), shape=(num, num))
        # stored zeros would count as edges in the component analysis
        P.eliminate_zeros()
        return P

    def residual(self) -> float:
        return float(np.abs(self.kernel().T @ self.pi - self.pi).max())


def state_string(index: int, order: int, k: int) -> Context:
    out = []
    for _ in range(order):
        index, a = divmod(index, k)
        out.append(a)
    return tuple(reversed(out))


def _stationary(P: csr_matrix, tol: float = 1e-12, max_iter: int = 10 ** 6) -> np.ndarray:
    num = P.shape[0]
    ncomp, labels = connected_components(P, directed=True, connection="strong")
    if ncomp > 1:
        # closed classes: no edge leaves them
        coo = P.tocoo()
        leaving = labels[coo.row] != labels[coo.col]
        open_classes = set(labels[coo.row[leaving & (coo.data > 0)]])
        closed = [c for c in range(ncomp) if c not in open_classes]
        if len(closed) > 1:
            raise ModelError(f"reducible chain: {len(closed)} closed classes, "
                             "stationary distribution not unique")
    if num <= DENSE_LIMIT:
        A = P.toarray().T - np.eye(num)
        A[-1, :] = 1.0
        b = np.zeros(num)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        if np.abs(P.T @ pi - pi).max() <= tol:
            return pi
    # lazy chain: same stationary law, aperiodic
    pi = np.full(num, 1.0 / num)
    PT = P.T.tocsr()
    for _ in range(max_iter):
        new = 0.5 * (pi + PT @ pi)
        new /= new.sum()
        if np.abs(PT @ new - new).max() <= tol:
            return new
        pi = new
    raise ModelError("power iteration did not converge")


def embed_markov(model: ProbabilisticContextTree, order: int | None = None) -> MarkovEmbedding:
    """Finite-order Markov chain equivalent to ``model``.

    ``order`` defaults to the tree depth (at least 1) and must not be smaller.
    """
    k = model.alphabet_size
    if order is None:
        order = max(model.depth, 1)
    if order < model.depth:
        raise ModelError("embedding order below tree depth")
    num = k ** order
    if num > MAX_STATES:
        raise ModelError(f"{num} states exceed the embedding limit {MAX_STATES}")
    trans = np.empty((num, k))
    for w in range(num):
        trans[w] = model.theta[model.lookup_context(state_string(w, order, k))]
    emb = MarkovEmbedding(order, k, trans, np.zeros(num))
    pi = _stationary(emb.kernel())
    return MarkovEmbedding(order, k, trans, pi)


def sample(model: ProbabilisticContextTree, n: int, seed=None,
           embedding: MarkovEmbedding | None = None) -> np.ndarray:
    """Draw ``n`` symbols from the stationary source.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`
    (PCG64), including a Generator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    k = model.alphabet_size
    if model.depth == 0:
        p = model.theta[()]
        return rng.choice(k, size=n, p=p).astype(np.int64)
    emb = embedding if embedding is not None else embed_markov(model)
    d = emb.order
    state = int(rng.choice(emb.pi.size, p=emb.pi))
    out = np.empty(n + d, dtype=np.int64)
    out[:d] = state_string(state, d, k)
    n_draw = max(n - d, 0)
    cdf = np.cumsum(emb.transition, axis=1)
    cdf[:, -1] = 1.0
    draws = rng.random(n_draw)
    # symbol = number of cdf entries <= u
    size = k ** d
    if k == 2:
        first = cdf[:, 0].tolist()
        for i, u in enumerate(draws.tolist()):
            a = 0 if u < first[state] else 1
            out[d + i] = a
            state = (state * 2 + a) % size
    else:
        rows = cdf.tolist()
        for i, u in enumerate(draws.tolist()):
            row = rows[state]
            a = 0
            while u >= row[a]:
                a += 1
            out[d + i] = a
            state = (state * k + a) % size
    return out[:n]


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(p, q):
        if a > 0:
            if b <= 0:
                return math.inf
            total += a * math.log2(a / b)
    return total


def kl_rate(p: ProbabilisticContextTree, q: ProbabilisticContextTree,
            cache: dict | None = None, order: int | None = None) -> float:
    """Divergence rate, in bits per symbol, of the stationary source ``q`` from ``p``.

    ``cache`` optionally maps embedding order to a reusable embedding of ``p``.
    """
    if p.alphabet_size != q.alphabet_size:
        raise ModelError("alphabet size mismatch")
    order = max(p.depth, q.depth, 1, order or 0)
    if cache is None:
        emb = embed_markov(p, order)
    else:
        emb = cache.get(order)
        if emb is None:
            emb = cache[order] = embed_markov(p, order)
    k = p.alphabet_size
    total = 0.0
    for w in np.flatnonzero(emb.pi > 0):
        past = state_string(int(w), order, k)
        term = _kl(emb.transition[w], q.theta[q.lookup_context(past)])
        if math.isinf(term):
            return math.inf
        total += emb.pi[w] * term
    return max(total, 0.0)
