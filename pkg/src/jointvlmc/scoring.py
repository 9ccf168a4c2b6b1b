"""Likelihood quantities for context-tree models, all in base-2 logarithms.

Conventions used throughout: ``0 * log(0/p) = 0``, an all-zero count vector
has likelihood 1, and penalty terms over an empty context set vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .counts import CountTrie

_LN2 = math.log(2.0)


class PartitionError(ValueError):
    """A context triple violating disjointness or completeness."""


@dataclass(frozen=True)
class PenaltyConfig:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("penalty multiplier must be positive")

    def pen(self, k: float) -> float:
        return self.lam * math.log2(k)

    def beta(self, k: float, alphabet_size: int) -> float:
        """Per-context penalty ((|A|-1)/2) * lam * log2(k)."""
        return 0.5 * (alphabet_size - 1) * self.pen(k)


Context = tuple[int, ...]


@dataclass(frozen=True)
class JointPartition:
    sigma0: frozenset
    sigma1: frozenset
    sigma2: frozenset

    @classmethod
    def of(cls, sigma0: Iterable = (), sigma1: Iterable = (), sigma2: Iterable = ()):
        return cls(frozenset(map(tuple, sigma0)), frozenset(map(tuple, sigma1)),
                   frozenset(map(tuple, sigma2)))

    @property
    def tau1(self) -> frozenset:
        return self.sigma0 | self.sigma1

    @property
    def tau2(self) -> frozenset:
        return self.sigma0 | self.sigma2

    def contexts(self) -> frozenset:
        return self.sigma0 | self.sigma1 | self.sigma2

    def depth(self) -> int:
        return max((len(s) for s in self.contexts()), default=0)


def log_ml_term(counts) -> float:
    """sum_a N(a) log2(N(a)/N)."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    nz = c[c > 0]
    return float(np.sum(nz * np.log2(nz / total)))


def log_ml_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise :func:`log_ml_term` for a (nodes, |A|) count matrix."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(c > 0, c * np.log2(c / np.where(total > 0, total, 1.0)), 0.0)
    return terms.sum(axis=1)


def log_ml_pooled(counts_x, counts_y) -> float:
    return log_ml_term(np.asarray(counts_x) + np.asarray(counts_y))


def _check(part: JointPartition, tx: CountTrie, ty: CountTrie) -> None:
    # local import: estimators depends on this module
    from .estimators import validate_partition
    report = validate_partition(part, tx.alphabet_size)
    if report:
        raise PartitionError(str(report[0]))
    if any(len(s) > tx.depth_bound for s in part.tau1) or \
       any(len(s) > ty.depth_bound for s in part.tau2):
        raise PartitionError("context deeper than the count trie depth bound")


def pseudo_log_likelihood(part: JointPartition, tx: CountTrie, ty: CountTrie) -> float:
    _check(part, tx, ty)
    total = sum(log_ml_term(tx.get_counts(s)) for s in part.sigma1)
    total += sum(log_ml_term(ty.get_counts(s)) for s in part.sigma2)
    total += sum(log_ml_pooled(tx.get_counts(s), ty.get_counts(s)) for s in part.sigma0)
    return float(total)


def criterion(part: JointPartition, tx: CountTrie, ty: CountTrie,
              pen: PenaltyConfig = PenaltyConfig()) -> float:
    """Penalized pseudo log-likelihood of a joint partition."""
    k = tx.alphabet_size
    n, m = tx.seq_length, ty.seq_length
    return (pseudo_log_likelihood(part, tx, ty)
            - len(part.sigma0) * pen.beta(n + m, k)
            - len(part.sigma1) * pen.beta(n, k)
            - len(part.sigma2) * pen.beta(m, k))


def single_criterion(tree: Iterable[Context], trie: CountTrie,
                     pen: PenaltyConfig = PenaltyConfig()) -> float:
    tree = list(tree)
    beta = pen.beta(trie.seq_length, trie.alphabet_size)
    return sum(log_ml_term(trie.get_counts(s)) for s in tree) - len(tree) * beta


def kt_log_prob(counts) -> float:
    """log2 of the Krichevsky-Trofimov (add-half) probability of a count vector."""
    c = np.asarray(counts, dtype=np.float64)
    k = c.size
    val = (gammaln(k / 2.0) + gammaln(c + 0.5).sum()
           - k * gammaln(0.5) - gammaln(c.sum() + k / 2.0))
    return float(val) / _LN2


def kt_joint_log_prob(part: JointPartition, tx: CountTrie, ty: CountTrie) -> float:
    """log2 KT probability of both samples, with uniform coding of uncovered positions."""
    _check(part, tx, ty)
    k = tx.alphabet_size
    n, m = tx.seq_length, ty.seq_length
    val = sum(kt_log_prob(tx.get_counts(s) + ty.get_counts(s)) for s in part.sigma0)
    val += sum(kt_log_prob(tx.get_counts(s)) for s in part.sigma1)
    val += sum(kt_log_prob(ty.get_counts(s)) for s in part.sigma2)
    uncovered_x = n - sum(tx.total(s) for s in part.tau1)
    uncovered_y = m - sum(ty.total(s) for s in part.tau2)
    return float(val - (uncovered_x + uncovered_y) * math.log2(k))


def _size_term(size: int, total: int) -> float:
    return size * math.log2(total / size) if size else 0.0


def kt_bound_gap(part: JointPartition, tx: CountTrie, ty: CountTrie) -> float:
    """Upper bound minus KT code length; non-negative on every input."""
    k = tx.alphabet_size
    n, m = tx.seq_length, ty.seq_length
    t0, t1, t2 = len(part.sigma0), len(part.sigma1), len(part.sigma2)
    depth1 = max(len(s) for s in part.tau1)
    depth2 = max(len(s) for s in part.tau2)
    bound = (-pseudo_log_likelihood(part, tx, ty)
             + (depth1 + depth2 + t0 + t1 + t2) * math.log2(k)
             + 0.5 * (k - 1) * (_size_term(t0, n + m) + _size_term(t1, n) + _size_term(t2, m)))
    return bound + kt_joint_log_prob(part, tx, ty)
