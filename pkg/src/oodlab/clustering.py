"""K-means over L2-normalized features plus the Calinski-Harabasz index.

Normalizing rows before clustering removes the feature-scale bias that makes
vanilla K-means gravitate toward large-norm (confident) samples; assignments
then depend only on feature direction. Seeding is K-means++ and every run is
fully determined by the supplied generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidKError, ShapeError, UndefinedMetricError
from .numeric import check_finite, normalize_rows

# Returned instead of infinity when within-cluster dispersion is exactly zero,
# so diversity logging never aborts a run.
CH_SENTINEL = 1e300


@dataclass
class ClusterAssignment:
    assignments: np.ndarray   # (n,) cluster index in 0..k-1
    centroids: np.ndarray     # (k, d)
    inertia: float            # within-cluster sum of squared distances
    iterations_run: int

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _prep(features, normalize: bool) -> np.ndarray:
    x = check_finite(features, "features")
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    return normalize_rows(x) if normalize else x


def _dist2_to_centroids(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # Expanded form (||c||^2 - 2 x.c) is enough for argmin; constant ||x||^2
    # per row is dropped. Fast path for the per-iteration training loop.
    return (centroids * centroids).sum(axis=1)[None, :] - 2.0 * (x @ centroids.T)


def kmeans_plusplus_seed(features, k: int, rng: np.random.Generator,
                         normalize: bool = True) -> np.ndarray:
    """K-means++ seeding: first centroid uniform, then proportional to the
    squared distance to the nearest already-chosen centroid."""
    x = _prep(features, normalize)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidKError(f"need 1 <= k <= rows, got k={k}, rows={n}")
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    closest = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a centroid
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), u, side="right"))
            idx = min(idx, n - 1)
        centroids[i] = x[idx]
        closest = np.minimum(closest, ((x - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans_normalized(features, k: int, rng: np.random.Generator,
                      max_iters: int = 100, tol: float = 1e-4,
                      normalize: bool = True) -> ClusterAssignment:
    """Lloyd iterations on (optionally) L2-normalized rows.

    Parameters
    ----------
    features : (n, d) array
        Raw feature rows; rows are normalized internally unless
        ``normalize=False`` (raw-feature ablation mode).
    k : int
        Number of clusters, 1 <= k <= n.
    rng : numpy Generator
        Drives seeding only; the algorithm is otherwise deterministic.
    max_iters, tol
        Stop after max_iters Lloyd rounds or once the largest centroid
        displacement falls below tol.

    Returns
    -------
    ClusterAssignment
        Clusters relabeled into lexicographic order of their centroids, so
        cluster ids are a canonical function of the geometry rather than of
        the seeding order. Ties during assignment are broken toward the
        lowest working index before relabeling. A cluster that empties is
        reseeded to the point farthest from its old centroid (taken from a
        donor cluster that keeps >= 2 members).
    """
    x = _prep(features, normalize)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidKError(f"need 1 <= k <= rows, got k={k}, rows={n}")
    centroids = kmeans_plusplus_seed(x, k, rng, normalize=False)
    labels = np.zeros(n, dtype=np.int64)
    inertia = np.inf
    prev_inertia = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        labels = np.argmin(_dist2_to_centroids(x, centroids), axis=1)
        sizes = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(sizes == 0):
            dist_c = ((x - centroids[c]) ** 2).sum(axis=1)
            dist_c[sizes[labels] < 2] = -np.inf  # donors must keep a member
            steal = int(np.argmax(dist_c))
            sizes[labels[steal]] -= 1
            labels[steal] = c
            sizes[c] = 1
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        new_centroids = sums / sizes[:, None]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        diffs = x - centroids[labels]
        inertia = float((diffs * diffs).sum())
        if inertia > prev_inertia + 1e-9 * max(1.0, prev_inertia):
            raise AssertionError(
                f"inertia increased: {prev_inertia} -> {inertia} at iteration {iterations}"
            )
        prev_inertia = inertia
        if shift < tol:
            break
    order = np.lexsort(centroids.T[::-1])  # lexicographic by coordinates
    inverse = np.empty(k, dtype=np.int64)
    inverse[order] = np.arange(k)
    return ClusterAssignment(
        assignments=inverse[labels],
        centroids=centroids[order],
        inertia=inertia,
        iterations_run=iterations,
    )


def assign_to_nearest(features, centroids, normalize: bool = True) -> np.ndarray:
    """Index of the nearest centroid per (normalized) row; ties go to the
    lowest centroid index. Uses exact squared differences."""
    x = _prep(features, normalize)
    c = check_finite(centroids, "centroids")
    if c.ndim != 2 or c.shape[1] != x.shape[1]:
        raise ShapeError(f"centroid shape {c.shape} does not match features {x.shape}")
    d2 = ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def calinski_harabasz(features, assignments) -> float:
    """Between- over within-cluster dispersion, each per degree of freedom.

    CH = [B / (k - 1)] / [W / (n - k)] with B the size-weighted squared
    distances of cluster means to the global mean and W the within-cluster
    sum of squares. Zero W returns a large finite sentinel.
    """
    x = check_finite(features, "features")
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    labels = np.asarray(assignments)
    if labels.shape != (x.shape[0],):
        raise ShapeError("assignments length does not match feature rows")
    uniq = np.unique(labels)
    n, k = x.shape[0], uniq.size
    if k < 2 or n <= k:
        raise UndefinedMetricError(
            f"Calinski-Harabasz needs >= 2 clusters and n > k (n={n}, k={k})"
        )
    global_mean = x.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in uniq:
        member = x[labels == c]
        mu = member.mean(axis=0)
        between += member.shape[0] * float(((mu - global_mean) ** 2).sum())
        within += float(((member - mu) ** 2).sum())
    if within <= 0.0:
        return CH_SENTINEL
    return (between / (k - 1)) / (within / (n - k))
