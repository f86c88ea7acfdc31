"""Independent oracles used across the test suite.

Reference values are computed by algorithms different from the library's
(Floyd-Warshall against breadth-first search, dense eigendecompositions
against iterative or blockwise norms) so agreement is meaningful.
"""

import numpy as np

# Large finite stand-in for "unreachable" that survives one addition.
_FAR = np.iinfo(np.int64).max // 4


def floyd_warshall(n: int, edges) -> np.ndarray:
    """All-pairs shortest paths by relaxation over intermediate vertices."""
    dist = np.full((n, n), _FAR, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for u, v in edges:
        dist[u, v] = 1
        dist[v, u] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def edges_of(space) -> list:
    """Distance-one pairs of a space, each once."""
    pairs = np.argwhere(space.dist == 1)
    return [(int(u), int(v)) for u, v in pairs if u < v]


def dense_norm(matrix: np.ndarray) -> float:
    """Spectral norm via a dense full SVD (the reference route)."""
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.svd(matrix, compute_uv=False)[0])


def naive_compression_norm(a, radius: float) -> float:
    """Sup-block norm computed entry by entry, no batching or reuse."""
    best = 0.0
    n, m = a.n, a.m
    for x in range(n):
        points = np.flatnonzero(a.space.dist[x] <= radius)
        idx = np.concatenate([np.arange(p * m, (p + 1) * m) for p in points])
        best = max(best, dense_norm(a.data[np.ix_(idx, idx)]))
    return best
