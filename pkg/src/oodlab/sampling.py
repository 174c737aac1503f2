"""Outlier-selection strategies over a scored, clustered candidate batch.

The informative-and-diverse strategy picks the highest-scoring candidate from
every cluster; the others (random / greedy / biased / uniform-over-clusters)
are the baselines it is compared against. All tie-breaking is toward the
lower candidate index, and every stochastic strategy is driven entirely by
the generator passed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment
from .errors import InvalidRequestError, ShapeError, UndefinedMetricError
from .numeric import check_finite


@dataclass
class CandidateBatch:
    """Scored candidate outliers: penultimate features, their original pool
    row ids, and the per-candidate informativeness score (1 - p(absent|x))."""

    features: np.ndarray
    source_indices: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.features = check_finite(self.features, "features")
        self.source_indices = np.asarray(self.source_indices, dtype=np.int64)
        self.scores = check_finite(self.scores, "scores")
        n = self.features.shape[0]
        if self.source_indices.shape != (n,) or self.scores.shape != (n,):
            raise ShapeError("features, source_indices and scores must align")

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class SelectedOutliers:
    indices: np.ndarray            # positions within the candidate batch
    strategy: str
    cluster_ids: np.ndarray | None = None  # per-selection cluster, if any

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if len(set(self.indices.tolist())) != self.indices.size:
            raise InvalidRequestError("selection contains duplicate indices")
        if self.cluster_ids is not None:
            self.cluster_ids = np.asarray(self.cluster_ids, dtype=np.int64)
            if self.cluster_ids.shape != self.indices.shape:
                raise ShapeError("cluster_ids must align with indices")

    @property
    def m(self) -> int:
        return self.indices.size


def _check_m(m: int, n: int) -> int:
    if not 0 <= m <= n:
        raise InvalidRequestError(f"cannot select {m} of {n} candidates")
    return int(m)


def _check_clusters(candidates: CandidateBatch, clusters: ClusterAssignment) -> np.ndarray:
    labels = clusters.assignments
    if labels.shape != (candidates.n,):
        raise ShapeError(
            f"cluster assignment ({labels.shape}) does not cover the "
            f"candidate batch ({candidates.n} rows)"
        )
    return labels


def sample_random(candidates: CandidateBatch, m: int, rng: np.random.Generator) -> SelectedOutliers:
    """m uniform draws without replacement."""
    m = _check_m(m, candidates.n)
    idx = rng.choice(candidates.n, size=m, replace=False)
    return SelectedOutliers(indices=idx, strategy="random")


def sample_greedy(candidates: CandidateBatch, m: int) -> SelectedOutliers:
    """The m candidates with the largest scores (hardest negatives)."""
    m = _check_m(m, candidates.n)
    order = np.argsort(-candidates.scores, kind="stable")
    return SelectedOutliers(indices=order[:m], strategy="greedy")


def sample_biased(candidates: CandidateBatch, clusters: ClusterAssignment, m: int,
                  rng: np.random.Generator, cluster_index: int | None = None) -> SelectedOutliers:
    """m uniform draws from a single cluster (most populous unless overridden)."""
    labels = _check_clusters(candidates, clusters)
    sizes = np.bincount(labels, minlength=clusters.k)
    target = int(np.argmax(sizes)) if cluster_index is None else int(cluster_index)
    if not 0 <= target < clusters.k:
        raise InvalidRequestError(f"cluster index {target} out of range 0..{clusters.k - 1}")
    members = np.flatnonzero(labels == target)
    if members.size < m:
        raise InvalidRequestError(
            f"cluster {target} holds {members.size} candidates, cannot draw {m}"
        )
    _check_m(m, candidates.n)
    idx = members[rng.choice(members.size, size=m, replace=False)]
    return SelectedOutliers(indices=idx, strategy="biased",
                            cluster_ids=np.full(m, target, dtype=np.int64))


def sample_uniform_clusters(candidates: CandidateBatch, clusters: ClusterAssignment,
                            m: int, rng: np.random.Generator) -> SelectedOutliers:
    """Round-robin over non-empty clusters, uniform without replacement inside
    each, until m candidates are collected."""
    labels = _check_clusters(candidates, clusters)
    m = _check_m(m, candidates.n)
    queues = []
    for c in range(clusters.k):
        members = np.flatnonzero(labels == c)
        if members.size:
            queues.append((c, list(members[rng.permutation(members.size)])))
    picked, picked_clusters = [], []
    while len(picked) < m:
        progressed = False
        for c, queue in queues:
            if queue and len(picked) < m:
                picked.append(int(queue.pop()))
                picked_clusters.append(c)
                progressed = True
        if not progressed:
            break
    return SelectedOutliers(indices=np.array(picked, dtype=np.int64),
                            strategy="uniform",
                            cluster_ids=np.array(picked_clusters, dtype=np.int64))


def sample_dos(candidates: CandidateBatch, clusters: ClusterAssignment) -> SelectedOutliers:
    """One pick per non-empty cluster: its highest-scoring member."""
    labels = _check_clusters(candidates, clusters)
    picked, picked_clusters = [], []
    for c in range(clusters.k):
        members = np.flatnonzero(labels == c)
        if members.size:
            best = members[int(np.argmax(candidates.scores[members]))]
            picked.append(int(best))
            picked_clusters.append(c)
    return SelectedOutliers(indices=np.array(picked, dtype=np.int64),
                            strategy="dos",
                            cluster_ids=np.array(picked_clusters, dtype=np.int64))


def diversity_delta(features) -> float:
    """Mean nearest-neighbor Euclidean distance within a selected set."""
    x = check_finite(features, "features")
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise UndefinedMetricError("diversity needs at least 2 points")
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min(axis=1)).mean())


def selection_rows(selection: SelectedOutliers, candidates: CandidateBatch,
                   clusters: ClusterAssignment | None = None) -> list[tuple[int, int, float, str]]:
    """(pool_index, cluster_id, score, strategy) rows for CSV export.

    Cluster ids come from the selection itself when the strategy is
    cluster-based, otherwise from ``clusters`` when given, else -1.
    """
    rows = []
    for j, idx in enumerate(selection.indices):
        if selection.cluster_ids is not None:
            cid = int(selection.cluster_ids[j])
        elif clusters is not None:
            cid = int(clusters.assignments[idx])
        else:
            cid = -1
        rows.append((int(candidates.source_indices[idx]), cid,
                     float(candidates.scores[idx]), selection.strategy))
    return rows
