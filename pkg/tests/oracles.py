"""Independent reference implementations used to cross-check the library.

Everything here recomputes results from first principles (definitions over
raw pairwise distances, exhaustive enumeration) rather than sharing any code
with the package under test.
"""
import itertools

import numpy as np


def naive_distances(x, metric):
    n = len(x)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if metric == "euclidean":
                v = float(np.sqrt(((x[i] - x[j]) ** 2).sum()))
            else:
                r = np.corrcoef(x[i], x[j])[0, 1]
                v = float(1.0 - min(1.0, max(-1.0, r)))
            d[i, j] = d[j, i] = v
    return d


def naive_agglomerate(x, linkage, metric):
    """Definition-based agglomeration: every cluster pair distance is
    recomputed from scratch at every step (O(n^3) overall).

    Returns (merge list of (node_a, node_b, height), heights on the same
    scale as the library: ward heights are squared-euclidean based).
    Node numbering: leaves 0..n-1, merge t creates node n+t. Ties take the
    smallest (node_a, node_b) pair.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    d = naive_distances(x, metric)

    def cluster_distance(a_members, b_members):
        if linkage == "single":
            return min(d[i, j] for i in a_members for j in b_members)
        if linkage == "complete":
            return max(d[i, j] for i in a_members for j in b_members)
        if linkage == "average":
            vals = [d[i, j] for i in a_members for j in b_members]
            return sum(vals) / len(vals)
        # ward: Lance-Williams distance on the squared-euclidean scale,
        # equal to 2|A||B|/(|A|+|B|) times the squared centroid gap
        mu_a = x[list(a_members)].mean(axis=0)
        mu_b = x[list(b_members)].mean(axis=0)
        na, nb = len(a_members), len(b_members)
        return 2.0 * na * nb / (na + nb) * float(((mu_a - mu_b) ** 2).sum())

    clusters = {i: frozenset([i]) for i in range(n)}
    merges = []
    for t in range(n - 1):
        best = None
        for a, b in itertools.combinations(sorted(clusters), 2):
            dist = cluster_distance(clusters[a], clusters[b])
            if best is None or dist < best[0] or (dist == best[0] and (a, b) < best[1:]):
                best = (dist, a, b)
        dist, a, b = best
        merges.append((a, b, dist))
        clusters[n + t] = clusters.pop(a) | clusters.pop(b)
    return merges


def naive_silhouette(d, labels):
    n = len(labels)
    labels = np.asarray(labels)
    widths = np.zeros(n)
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            continue
        a = sum(d[i, j] for j in own) / len(own)
        b = min(
            sum(d[i, j] for j in np.flatnonzero(labels == c))
            / int((labels == c).sum())
            for c in set(labels.tolist())
            if c != labels[i]
        )
        m = max(a, b)
        widths[i] = 0.0 if m == 0.0 else (b - a) / m
    return widths


def scatter(points):
    mu = points.mean(axis=0)
    return float(((points - mu) ** 2).sum())


def best_two_partition_sse(points):
    """Exhaustive optimum over all 2-cluster partitions (point 0 pinned to
    side A to skip mirror duplicates)."""
    n = len(points)
    best = np.inf
    for bits in range(1, 2 ** (n - 1)):
        mask = np.array([True] + [(bits >> i) & 1 == 0 for i in range(n - 1)])
        sse = scatter(points[mask]) + scatter(points[~mask])
        best = min(best, sse)
    return best


def mst_edge_weights(d):
    """Prim's algorithm; returns the n-1 tree edge weights sorted ascending."""
    n = d.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].copy()
    weights = []
    for _ in range(n - 1):
        best_masked = np.where(in_tree, np.inf, best)
        j = int(best_masked.argmin())
        weights.append(float(best_masked[j]))
        in_tree[j] = True
        best = np.minimum(best, d[j])
    return sorted(weights)
