"""Partition agreement scores and evidence-accumulation consensus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import comb

from .engine import ahc_linkage, cut
from .errors import InvalidArgumentError
from .measures import Measure, SimilaritySpec
from .partition import Partition

__all__ = [
    "StabilityMatrix",
    "adjusted_rand",
    "consensus",
    "contingency",
    "exact_recovery",
    "rand_index",
]


def _check(p: Partition, q: Partition) -> None:
    if p.d != q.d:
        raise InvalidArgumentError(f"partitions cover {p.d} and {q.d} variables")


def contingency(p: Partition, q: Partition) -> np.ndarray:
    _check(p, q)
    table = np.zeros((len(p), len(q)), dtype=np.int64)
    np.add.at(table, (p.labels(), q.labels()), 1)
    return table


def rand_index(p: Partition, q: Partition) -> float:
    """Fraction of unordered pairs on which the two partitions agree."""
    _check(p, q)
    n = p.d
    if n < 2:
        return 1.0
    a, b = p.co_membership(), q.co_membership()
    iu = np.triu_indices(n, 1)
    return float(np.mean(a[iu] == b[iu]))


def adjusted_rand(p: Partition, q: Partition) -> float:
    """Hubert-Arabie adjusted Rand index.

    When the chance-corrected denominator vanishes (both partitions
    all-singletons, or both a single block) the score is 1.0 for identical
    partitions and 0.0 otherwise.
    """
    table = contingency(p, q)
    n = p.d
    sum_cells = float(comb(table, 2).sum())
    sum_rows = float(comb(table.sum(axis=1), 2).sum())
    sum_cols = float(comb(table.sum(axis=0), 2).sum())
    total = float(comb(n, 2))
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    denom = max_index - expected
    if denom == 0.0:
        return 1.0 if p == q else 0.0
    return (sum_cells - expected) / denom


def exact_recovery(p: Partition, truth: Partition) -> bool:
    _check(p, truth)
    return p == truth


@dataclass(frozen=True)
class StabilityMatrix:
    """Co-clustering frequencies; ``freq[i, j]`` is the share of inputs placing i and j together."""

    d: int
    freq: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freq, dtype=float)
        if f.shape != (self.d, self.d):
            raise InvalidArgumentError(f"freq has shape {f.shape}, expected ({self.d}, {self.d})")
        if np.any(f < 0.0) or np.any(f > 1.0) or np.any(np.diagonal(f) != 1.0):
            raise InvalidArgumentError("frequencies must lie in [0, 1] with unit diagonal")
        f.setflags(write=False)
        object.__setattr__(self, "freq", f)


def consensus(partitions: Sequence[Partition], k: int, seed: int = 0) -> tuple[StabilityMatrix, Partition]:
    """Average co-membership matrices, then cut a Ward tree on ``1 - freq`` at `k` blocks."""
    parts = list(partitions)
    if not parts:
        raise InvalidArgumentError("consensus needs at least one partition")
    d = parts[0].d
    if any(p.d != d for p in parts):
        raise InvalidArgumentError("all partitions must cover the same variables")
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"k must lie in [1, {d}], got {k}")
    freq = np.zeros((d, d))
    for p in parts:
        freq += p.co_membership()
    freq /= len(parts)
    np.fill_diagonal(freq, 1.0)
    stab = StabilityMatrix(d, freq)
    if d == 1:
        return stab, Partition.singletons(1)
    h = ahc_linkage(freq, SimilaritySpec(Measure.LINK_WARD), seed)
    return stab, cut(h, k)
