"""Agglomerative hierarchical clustering driver.

Two loops share the same greedy structure: :func:`ahc` evaluates a
model-based measure afresh for every new cluster pair, :func:`ahc_linkage`
propagates correlation distances with Lance-Williams recurrences.  Equal
maxima (within ``TIE_ATOL``) are broken uniformly at random from `seed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import (
    BahcError,
    ConfigurationError,
    DegenerateNormalizerError,
    InvalidArgumentError,
    MeasureEvaluationError,
    SmallSampleError,
    UnreachableLevelError,
    UnsupportedMeasureError,
)
from .measures import Measure, SimilaritySpec, evaluate
from .numerics import ScatterInput, as_symmetric
from .partition import Partition

__all__ = [
    "Hierarchy",
    "MergeStep",
    "Partition",
    "TIE_ATOL",
    "ahc",
    "ahc_linkage",
    "auto_partition",
    "cumulative_curve",
    "cut",
]

TIE_ATOL = 1e-12

Cluster = tuple[int, ...]


@dataclass(frozen=True)
class MergeStep:
    step: int
    left: Cluster
    right: Cluster
    similarity: float
    cumulative_log_bf: Optional[float]
    ties_broken: int = 1


@dataclass(frozen=True)
class Hierarchy:
    """Ordered merge trace.

    ``pending`` holds the similarity of every remaining pair at the time an
    automatic stop fired (the merges that were not performed).
    """

    d: int
    steps: tuple[MergeStep, ...]
    measure: Measure
    stopped_early: bool = False
    stop_level: Optional[int] = None
    pending: tuple[tuple[Cluster, Cluster, float], ...] = field(default=(), compare=False)

    def partition_at(self, level: int) -> Partition:
        if not 0 <= level <= len(self.steps):
            raise UnreachableLevelError(f"level {level} not in hierarchy with {len(self.steps)} steps")
        p = Partition.singletons(self.d)
        for st in self.steps[:level]:
            p = p.merge(st.left, st.right)
        return p

    def partitions(self) -> list[Partition]:
        out = [Partition.singletons(self.d)]
        for st in self.steps:
            out.append(out[-1].merge(st.left, st.right))
        return out


def _select(cands: list, values: list[float], best: float, rng: np.random.Generator) -> tuple[int, int]:
    """Index of the chosen candidate and the number of tied maxima."""
    tied = [k for k, v in enumerate(values) if v >= best - TIE_ATOL]
    if len(tied) == 1:
        return tied[0], 1
    return tied[int(rng.integers(len(tied)))], len(tied)


def ahc(scatter: ScatterInput, spec: SimilaritySpec, stop: str = "full", seed: int = 0) -> Hierarchy:
    """Greedy agglomeration maximizing `spec`'s similarity at each step.

    Parameters
    ----------
    scatter : ScatterInput
    spec : SimilaritySpec
        Model-based measure; linkage measures are forwarded to
        :func:`ahc_linkage` on the sample correlation matrix.
    stop : {"full", "auto"}
        With ``"auto"``, stop before the first merge whose best similarity is
        negative (log-Bayes-factor measures only).
    seed : int
        Seeds the tie-breaking generator.
    """
    spec.validate()
    if stop not in ("full", "auto"):
        raise InvalidArgumentError(f"stop must be 'full' or 'auto', got {stop!r}")
    m = spec.measure
    if m.is_linkage:
        if stop == "auto":
            raise ConfigurationError("automatic stopping needs a log-Bayes-factor measure")
        return ahc_linkage(scatter.correlation(), spec, seed)
    if stop == "auto" and not m.has_log_bf:
        raise ConfigurationError("automatic stopping needs a log-Bayes-factor measure")
    if m in (Measure.BIC, Measure.INFOMUT, Measure.INFOMUT_NORM) and scatter.n_eff < scatter.dim:
        raise SmallSampleError(
            f"{m.value} needs a full-rank sample covariance: n_eff={scatter.n_eff} < D={scatter.dim}",
            scatter.n_eff,
        )
    rng = np.random.default_rng(seed)
    d = scatter.dim

    def score(a: Cluster, b: Cluster) -> Optional[float]:
        try:
            return float(evaluate(scatter, a, b, spec).value)
        except DegenerateNormalizerError:
            return None
        except BahcError as exc:
            raise MeasureEvaluationError(
                f"{m.value} failed on clusters {a} and {b}: {exc}", m.value, (a, b), exc
            ) from exc

    clusters: list[Cluster] = [(i,) for i in range(d)]
    sim: dict[tuple[Cluster, Cluster], Optional[float]] = {}
    for x in range(d):
        for y in range(x + 1, d):
            sim[(clusters[x], clusters[y])] = score(clusters[x], clusters[y])

    steps: list[MergeStep] = []
    cumulative = 0.0
    stopped = False
    pending: tuple = ()
    while len(clusters) > 1:
        cands = sorted(k for k, v in sim.items() if v is not None)
        if not cands:
            raise MeasureEvaluationError(
                f"{m.value}: no cluster pair has a defined similarity", m.value, (), DegenerateNormalizerError("all pairs")
            )
        values = [sim[k] for k in cands]
        best = max(values)
        if stop == "auto" and best < 0.0:
            stopped = True
            pending = tuple((a, b, sim[(a, b)]) for a, b in sorted(sim) if sim[(a, b)] is not None)
            break
        pick, ties = _select(cands, values, best, rng)
        a, b = cands[pick]
        value = values[pick]
        cumulative += value
        steps.append(MergeStep(len(steps) + 1, a, b, value, cumulative if m.has_log_bf else None, ties))
        merged = tuple(sorted(a + b))
        sim = {k: v for k, v in sim.items() if a not in k and b not in k}
        clusters = [c for c in clusters if c != a and c != b]
        for c in clusters:
            key = (c, merged) if c < merged else (merged, c)
            sim[key] = score(*key)
        clusters.append(merged)
        clusters.sort()
    return Hierarchy(
        d,
        tuple(steps),
        m,
        stopped_early=stopped,
        stop_level=len(steps) if stop == "auto" else None,
        pending=pending,
    )


def _lance_williams(method: Measure, d_ki: np.ndarray, d_kj: np.ndarray, d_ij: float,
                    n_i: int, n_j: int, n_k: np.ndarray) -> np.ndarray:
    if method is Measure.LINK_SINGLE:
        return np.minimum(d_ki, d_kj)
    if method is Measure.LINK_COMPLETE:
        return np.maximum(d_ki, d_kj)
    if method is Measure.LINK_AVERAGE:
        return (n_i * d_ki + n_j * d_kj) / (n_i + n_j)
    if method is Measure.LINK_WARD:
        return ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k)
    raise UnsupportedMeasureError(f"{method.value} has no Lance-Williams update")


def ahc_linkage(corr: np.ndarray, spec: SimilaritySpec, seed: int = 0,
                return_distances: bool = False):
    """Correlation-linkage agglomeration on ``d = 1 - r`` (or ``1 - |r|``).

    Recorded step similarities are ``1 - d`` at merge time, i.e. the linkage
    correlation itself for single/average/complete.  With
    `return_distances`, also return the active-cluster distance matrix held
    before each merge (as ``{(cluster, cluster): distance}`` dicts).
    """
    spec.validate()
    if not spec.measure.is_linkage:
        raise UnsupportedMeasureError(f"{spec.measure.value} is not a linkage measure")
    r = as_symmetric(corr)
    if np.max(np.abs(np.diagonal(r) - 1.0)) > 1e-12:
        raise InvalidArgumentError("linkage input must have unit diagonal")
    n = r.shape[0]
    dist = 1.0 - (np.abs(r) if spec.use_abs else r)
    np.fill_diagonal(dist, 0.0)
    rng = np.random.default_rng(seed)
    members: list[Optional[Cluster]] = [(i,) for i in range(n)]
    sizes = np.ones(n)
    active = list(range(n))
    steps: list[MergeStep] = []
    trace = []
    while len(active) > 1:
        cands = []
        values = []
        for x_pos, x in enumerate(active):
            for y in active[x_pos + 1:]:
                cands.append((x, y))
                values.append(-dist[x, y])
        if return_distances:
            trace.append({(members[x], members[y]): dist[x, y] for x, y in cands})
        best = max(values)
        pick, ties = _select(cands, values, best, rng)
        x, y = cands[pick]
        d_xy = dist[x, y]
        others = [k for k in active if k != x and k != y]
        if others:
            ok = np.array(others)
            upd = _lance_williams(spec.measure, dist[ok, x], dist[ok, y], d_xy, sizes[x], sizes[y], sizes[ok])
            dist[ok, x] = upd
            dist[x, ok] = upd
        left, right = sorted((members[x], members[y]))
        steps.append(MergeStep(len(steps) + 1, left, right, 1.0 - d_xy, None, ties))
        members[x] = tuple(sorted(members[x] + members[y]))
        members[y] = None
        sizes[x] += sizes[y]
        active.remove(y)
    h = Hierarchy(n, tuple(steps), spec.measure)
    return (h, trace) if return_distances else h


def cut(h: Hierarchy, k: int) -> Partition:
    """Partition with exactly `k` blocks (after ``D - k`` merges)."""
    if not 1 <= k <= h.d:
        raise InvalidArgumentError(f"k must lie in [1, {h.d}], got {k}")
    level = h.d - k
    if level > len(h.steps):
        raise UnreachableLevelError(
            f"{k} clusters needs {level} merges but the hierarchy stopped after {len(h.steps)}"
        )
    return h.partition_at(level)


def auto_level(h: Hierarchy) -> int:
    if h.stop_level is not None:
        return h.stop_level
    for st in h.steps:
        if st.similarity < 0.0:
            return st.step - 1
    return len(h.steps)


def auto_partition(h: Hierarchy) -> Partition:
    """Partition selected by the stop-at-first-negative rule."""
    return h.partition_at(auto_level(h))


def cumulative_curve(h: Hierarchy) -> list[tuple[int, float, float]]:
    """``(level, ln BF, log10 BF)`` against the all-singleton partition."""
    if not h.measure.has_log_bf:
        raise UnsupportedMeasureError(f"{h.measure.value} similarities are not log Bayes factors")
    out = [(0, 0.0, 0.0)]
    total = 0.0
    for st in h.steps:
        total += st.similarity
        out.append((st.step, total, total / math.log(10.0)))
    return out
