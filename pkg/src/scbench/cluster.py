"""Clustering and partition quality scores.

k-means uses k-means++ seeding with multiple restarts; hierarchical clustering
is the Lance-Williams agglomerative family (single, complete, average, ward).
Silhouette widths and the adjusted Rand index follow their textbook
definitions, computed exactly. Every routine is deterministic: ties are broken
by index order and randomness only enters through explicit seeds.
"""
from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from ._util import seeded_rng
from .errors import DataError
from .matrix import ExpressionMatrix

KMEANS_RESTARTS_DEFAULT = 10
KMEANS_MAX_ITERS_DEFAULT = 300
KMEANS_TOL_DEFAULT = 1e-6

LINKAGES = ("single", "complete", "average", "ward")
METRICS = ("euclidean", "one_minus_correlation")

Merge = namedtuple("Merge", ["node_a", "node_b", "height", "size"])


def _as_points(x) -> np.ndarray:
    if isinstance(x, ExpressionMatrix):
        return x.values
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("expected a 2-d array of points")
    if not np.isfinite(arr).all():
        raise DataError("points must be finite")
    return arr


def pairwise_distances(x, metric: str = "euclidean") -> np.ndarray:
    """Full symmetric distance matrix with an exactly zero diagonal.

    one_minus_correlation is 1 - Pearson r between rows and needs every row
    to have nonzero variance.
    """
    points = _as_points(x)
    n = points.shape[0]
    if metric == "euclidean":
        d = np.empty((n, n))
        for i in range(n):
            diff = points - points[i]
            d[i] = np.sqrt((diff * diff).sum(axis=1))
    elif metric == "one_minus_correlation":
        if points.shape[1] < 2:
            raise DataError("correlation distance needs at least 2 features")
        centered = points - points.mean(axis=1, keepdims=True)
        norms = np.sqrt((centered * centered).sum(axis=1))
        if (norms == 0).any():
            bad = int(np.flatnonzero(norms == 0)[0])
            raise DataError(
                f"row {bad} has zero variance; correlation distance undefined"
            )
        r = (centered @ centered.T) / np.outer(norms, norms)
        np.clip(r, -1.0, 1.0, out=r)
        d = 1.0 - r
    else:
        raise DataError(f"unknown metric {metric!r}")
    d = np.triu(d, 1)
    d = d + d.T
    return d


def _check_distance_matrix(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DataError("distance matrix must be square")
    if not np.isfinite(d).all() or (d < 0).any():
        raise DataError("distances must be finite and non-negative")
    if (np.diag(d) != 0).any():
        raise DataError("distance matrix diagonal must be zero")
    if not np.array_equal(d, d.T):
        raise DataError("distance matrix must be symmetric")
    return d


@dataclass(frozen=True, eq=False)
class ClusterResult:
    labels: np.ndarray
    centers: np.ndarray
    sse: float
    n_iters: int
    seed: int
    restart_sses: np.ndarray
    sse_trace: tuple = ()

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        centers = np.array(self.centers, dtype=np.float64)
        centers.flags.writeable = False
        object.__setattr__(self, "centers", centers)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _kmeans_pp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(points: np.ndarray, centers: np.ndarray):
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * (points @ centers.T)
        + (centers * centers).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    labels = d2.argmin(axis=1)
    sse = float(d2[np.arange(points.shape[0]), labels].sum())
    return d2, labels, sse


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    n, k = points.shape[0], centers.shape[0]
    centers = centers.copy()
    prev_sse = np.inf
    labels = np.zeros(n, dtype=np.int64)
    trace = []
    for it in range(1, max_iters + 1):
        d2, labels, sse = _assign(points, centers)

        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # steal the point farthest from its center, skipping points that
            # are their cluster's only member
            order = np.argsort(-d2[np.arange(n), labels], kind="stable")
            for cand in order:
                if counts[labels[cand]] > 1:
                    counts[labels[cand]] -= 1
                    labels[cand] = j
                    counts[j] = 1
                    break
        if (counts == 0).any():
            raise DataError("k exceeds the number of distinct points")
        trace.append(sse)

        new_centers = np.zeros_like(centers)
        np.add.at(new_centers, labels, points)
        new_centers /= np.bincount(labels, minlength=k)[:, None]

        if prev_sse - sse < tol and np.array_equal(centers, new_centers):
            return labels, centers, sse, it, trace
        if prev_sse - sse < tol or it == max_iters:
            centers = new_centers
            # recompute once so the reported sse matches the final centers
            _, labels, sse = _assign(points, centers)
            trace.append(sse)
            return labels, centers, sse, it, trace
        centers = new_centers
        prev_sse = sse
    raise AssertionError("unreachable")


def kmeans(
    x,
    k: int,
    seed: int = 0,
    restarts: int = KMEANS_RESTARTS_DEFAULT,
    max_iters: int = KMEANS_MAX_ITERS_DEFAULT,
    tol: float = KMEANS_TOL_DEFAULT,
) -> ClusterResult:
    """Lloyd's algorithm from k-means++ starts; best of `restarts` runs by SSE.

    Each restart draws from an independent stream derived from (seed, restart
    index), so results are reproducible and restarts could run in any order.
    """
    points = _as_points(x)
    n = points.shape[0]
    if not (1 <= k <= n):
        raise DataError(f"k={k} out of range for {n} points")
    if restarts < 1 or max_iters < 1:
        raise DataError("restarts and max_iters must be positive")

    best = None
    sses = np.empty(restarts)
    for r in range(restarts):
        rng = seeded_rng(seed, r)
        init = _kmeans_pp_init(points, k, rng)
        labels, centers, sse, n_iters, trace = _lloyd(points, init, max_iters, tol)
        sses[r] = sse
        if best is None or sse < best[2]:
            best = (labels, centers, sse, n_iters, trace)
    labels, centers, sse, n_iters, trace = best
    return ClusterResult(labels, centers, sse, n_iters, seed, sses, tuple(trace))


@dataclass(frozen=True, eq=False)
class Dendrogram:
    merges: tuple
    linkage: str
    metric: str
    n_leaves: int

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])


def hierarchical(
    x=None,
    linkage: str = "average",
    metric: str = "euclidean",
    distances: np.ndarray | None = None,
) -> Dendrogram:
    """Agglomerative clustering via the Lance-Williams update.

    Ward requires euclidean geometry and tracks squared-distance heights:
    merging A and B costs 2|A||B|/(|A|+|B|) times the squared distance between
    their centroids. Distance ties are broken by the smallest (node_a, node_b)
    pair; merge t creates node n_leaves + t.
    """
    if linkage not in LINKAGES:
        raise DataError(f"unknown linkage {linkage!r}")
    if linkage == "ward" and metric != "euclidean":
        raise DataError("ward linkage requires the euclidean metric")
    if distances is None:
        if x is None:
            raise DataError("need points or a distance matrix")
        d = pairwise_distances(x, metric)
    else:
        if x is not None:
            raise DataError("pass points or distances, not both")
        d = _check_distance_matrix(distances)
    n = d.shape[0]
    if n < 2:
        raise DataError("clustering needs at least 2 points")
    if linkage == "ward":
        work = d * d
    else:
        work = d.copy()

    alive = np.ones(n, dtype=bool)
    slot_node = np.arange(n)
    slot_size = np.ones(n, dtype=np.int64)
    merges = []
    for t in range(n - 1):
        masked = np.where(alive[:, None] & alive[None, :], work, np.inf)
        np.fill_diagonal(masked, np.inf)
        dist = masked.min()
        cand = np.argwhere(masked == dist)
        # each tied pair appears in both orders; normalizing by node id and
        # taking the minimum applies the (node_a, node_b) tie-break
        i, j = min(
            ((min(slot_node[p], slot_node[q]), max(slot_node[p], slot_node[q]), p, q)
             for p, q in cand)
        )[2:]
        a, b = sorted((int(slot_node[i]), int(slot_node[j])))
        si, sj = int(slot_size[i]), int(slot_size[j])
        height = float(dist)

        others = alive.copy()
        others[i] = others[j] = False
        dik, djk = work[i, others], work[j, others]
        if linkage == "single":
            new = np.minimum(dik, djk)
        elif linkage == "complete":
            new = np.maximum(dik, djk)
        elif linkage == "average":
            new = (si * dik + sj * djk) / (si + sj)
        else:  # ward, on squared distances
            sk = slot_size[others]
            new = ((si + sk) * dik + (sj + sk) * djk - sk * work[i, j]) / (
                si + sj + sk
            )
        work[i, others] = new
        work[others, i] = new

        slot_size[i] = si + sj
        slot_node[i] = n + t
        alive[j] = False
        merges.append(Merge(a, b, height, si + sj))
    return Dendrogram(tuple(merges), linkage, metric, n)


def cut_dendrogram(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels for the k-cluster partition; clusters are numbered by their
    smallest member index."""
    n = dendrogram.n_leaves
    if not (1 <= k <= n):
        raise DataError(f"k={k} out of range for {n} leaves")
    parent = list(range(n + len(dendrogram.merges)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for t, m in enumerate(dendrogram.merges[: n - k]):
        new = n + t
        parent[find(m.node_a)] = new
        parent[find(m.node_b)] = new

    roots = [find(i) for i in range(n)]
    label_of = {}
    labels = np.empty(n, dtype=np.int64)
    for i, r in enumerate(roots):
        if r not in label_of:
            label_of[r] = len(label_of)
        labels[i] = label_of[r]
    return labels


@dataclass(frozen=True, eq=False)
class SilhouetteReport:
    widths: np.ndarray
    mean: float
    per_cluster_mean: dict


def silhouette(x=None, labels=None, distances: np.ndarray | None = None) -> SilhouetteReport:
    """Silhouette width s(i) = (b - a) / max(a, b) per point.

    Singleton clusters score 0, as does any point where both a and b are 0.
    Needs at least 2 clusters.
    """
    if labels is None:
        raise DataError("labels are required")
    labels = np.asarray(labels, dtype=np.int64)
    if distances is None:
        d = pairwise_distances(x)
    else:
        if x is not None:
            raise DataError("pass points or distances, not both")
        d = _check_distance_matrix(distances)
    n = d.shape[0]
    if labels.shape != (n,):
        raise DataError("labels must have one entry per point")
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise DataError("silhouette needs at least 2 clusters")
    if uniq.size == n:
        raise DataError("silhouette is undefined when every cluster is a singleton")

    members = {c: np.flatnonzero(labels == c) for c in uniq}
    widths = np.zeros(n)
    for i in range(n):
        own = members[labels[i]]
        if own.size == 1:
            widths[i] = 0.0
            continue
        a = d[i, own].sum() / (own.size - 1)
        b = min(
            d[i, members[c]].mean() for c in uniq if c != labels[i]
        )
        m = max(a, b)
        widths[i] = 0.0 if m == 0.0 else (b - a) / m

    per_cluster = {
        int(c): float(widths[members[c]].mean()) for c in uniq
    }
    return SilhouetteReport(widths, float(widths.mean()), per_cluster)


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Exact ARI from the contingency table; 1.0 when the expected and
    maximum index coincide (e.g. both partitions trivial)."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape or a.size == 0:
        raise DataError("label vectors must be non-empty and equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(v):
        return v * (v - 1) // 2

    sum_ij = int(comb2(table).sum())
    sum_a = int(comb2(table.sum(axis=1)).sum())
    sum_b = int(comb2(table.sum(axis=0)).sum())
    total = comb2(n)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
