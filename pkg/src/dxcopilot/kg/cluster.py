"""Average-linkage agglomerative clustering with threshold cuts.

The dendrogram over disease centroids is cut twice: a tight cut groups
diseases into subcategories, a looser cut groups them into categories.
Average linkage is monotone (no inversions), so the tight partition always
refines the loose one and the two cuts nest into a tree.

Determinism matters more than speed here: among equally distant cluster
pairs the one with the lowest (representative, representative) index pair
merges first, so the same distance matrix always yields the same tree.
"""

from __future__ import annotations

import numpy as np


def _average_distance(members_a: list[int], members_b: list[int], dist: np.ndarray) -> float:
    total = 0.0
    for i in members_a:
        for j in members_b:
            total += dist[i, j]
    return total / (len(members_a) * len(members_b))


def agglomerative_partitions(dist: np.ndarray, thresholds: list[float]) -> list[list[list[int]]]:
    """Cut one average-linkage merge sequence at each threshold.

    ``dist`` is a symmetric (n, n) distance matrix. ``thresholds`` must be
    ascending. For each threshold t the result holds the partition reached
    after performing every merge whose average-linkage distance is <= t.
    Partitions are lists of sorted member-index lists, ordered by their
    smallest member.
    """
    n = dist.shape[0]
    if sorted(thresholds) != list(thresholds):
        raise ValueError("thresholds must be ascending")
    clusters: list[list[int]] = [[i] for i in range(n)]
    snapshots: list[list[list[int]]] = []
    remaining = list(thresholds)

    def snapshot() -> list[list[int]]:
        return sorted(([list(c) for c in clusters]), key=lambda c: c[0])

    while len(clusters) > 1:
        best: tuple[float, int, int] | None = None
        best_pair = (-1, -1)
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = _average_distance(clusters[a], clusters[b], dist)
                rep_a, rep_b = clusters[a][0], clusters[b][0]
                key = (d, min(rep_a, rep_b), max(rep_a, rep_b))
                if best is None or key < best:
                    best = key
                    best_pair = (a, b)
        height = best[0]  # type: ignore[index]
        while remaining and height > remaining[0]:
            snapshots.append(snapshot())
            remaining.pop(0)
        if not remaining:
            break
        a, b = best_pair
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)]
        clusters.append(merged)

    while remaining:
        snapshots.append(snapshot())
        remaining.pop(0)
    return snapshots
