"""Distance kernels, k-nearest-neighbor queries, and k-means clustering.

All computations run in float64 regardless of bank storage dtype. Two
metrics are supported: ``euclidean`` and ``cosine`` (1 minus cosine
similarity). Cosine distance involving an all-zero vector is defined as
1.0 against any nonzero vector and 0.0 against another all-zero vector,
so d(x, x) = 0 holds for every row.

Ties are always broken toward the lowest index: nearest-neighbor lists,
cluster assignments, and k-means++ fallbacks all prefer the smaller
sample or centroid index when distances are exactly equal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CapacityExceeded, InvalidK
from .rng import Xoshiro256StarStar, derive_seeds

DEFAULT_PAIRWISE_CAP = 50_000
DEFAULT_MAX_ITERS = 300
DEFAULT_N_RESTARTS = 5
DEFAULT_TOL_SCALE = 1e-4

_EXACT_DIAMETER_LIMIT = 4096
_KNN_CHUNK = 1024

_METRIC_ALIASES = {
    "euclidean": "euclidean",
    "cosine": "cosine",
    "cosine_distance": "cosine",
}


def canonical_metric(name: str) -> str:
    try:
        return _METRIC_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}") from None


def _as_matrix(data) -> np.ndarray:
    """Accept a FeatureBank or any 2-D array-like; return float64 matrix."""
    features = getattr(data, "features", data)
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    return matrix


def cross_distances(left, right, metric: str = "euclidean") -> np.ndarray:
    """Distance matrix between the rows of two matrices."""
    metric = canonical_metric(metric)
    a = _as_matrix(left)
    b = _as_matrix(right)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if metric == "euclidean":
        return cdist(a, b, "euclidean")

    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    zero_a = norms_a == 0.0
    zero_b = norms_b == 0.0
    unit_a = a / np.where(zero_a, 1.0, norms_a)[:, None]
    unit_b = b / np.where(zero_b, 1.0, norms_b)[:, None]
    # For unit vectors, 1 - <u, v> equals half the squared Euclidean gap.
    dists = cdist(unit_a, unit_b, "sqeuclidean") / 2.0
    np.clip(dists, 0.0, 2.0, out=dists)
    if zero_a.any():
        dists[zero_a, :] = 1.0
    if zero_b.any():
        dists[:, zero_b] = 1.0
    if zero_a.any() and zero_b.any():
        dists[np.ix_(zero_a, zero_b)] = 0.0
    return dists


def pairwise_distances(bank, metric: str = "euclidean", cap: int | None = None):
    """Full N x N distance matrix for a bank (or raw matrix).

    Refuses to materialize matrices for N above the cap; callers with
    larger banks should use knn or chunked cross_distances instead.
    """
    matrix = _as_matrix(bank)
    limit = DEFAULT_PAIRWISE_CAP if cap is None else cap
    if matrix.shape[0] > limit:
        raise CapacityExceeded(
            f"pairwise matrix for N={matrix.shape[0]} exceeds the cap of {limit}"
        )
    return cross_distances(matrix, matrix, metric)


def knn(bank, k: int, metric: str = "euclidean"):
    """k nearest neighbors per row, self excluded.

    Returns (indices, distances), each of shape (N, k), sorted ascending
    by distance with exact ties broken toward the lower neighbor index.
    """
    matrix = _as_matrix(bank)
    n = matrix.shape[0]
    if not 1 <= k <= n - 1:
        raise InvalidK(f"k={k} must satisfy 1 <= k <= N-1 = {n - 1}")
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    cols = np.arange(n)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        block = cross_distances(matrix[start:stop], matrix, metric)
        block[np.arange(stop - start), np.arange(start, stop)] = np.inf
        for r in range(stop - start):
            order = np.lexsort((cols, block[r]))[:k]
            indices[start + r] = order
            distances[start + r] = block[r, order]
    return indices, distances


@dataclass(frozen=True)
class ClusterModel:
    """Result of a k-means run.

    ``collapsed`` lists centroid indices that are duplicates introduced
    when k exceeded the number of distinct points; those clusters are
    intentionally empty and mirror centroid ``j % k_eff``.
    """

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations_run: int
    converged: bool
    inertia_history: tuple[float, ...] = ()
    collapsed: tuple[int, ...] = ()

    def cluster_members(self, j: int) -> np.ndarray:
        """Ascending sample indices assigned to cluster j."""
        return np.flatnonzero(self.assignments == j)


@dataclass(frozen=True)
class KMeansConfig:
    seed: int = 0
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float | None = None
    n_restarts: int = DEFAULT_N_RESTARTS


def data_diameter(matrix) -> float:
    """Max pairwise Euclidean distance, exact for small N, else the
    bounding-box diagonal (an upper bound, used only as a tolerance scale)."""
    matrix = _as_matrix(matrix)
    if matrix.shape[0] <= _EXACT_DIAMETER_LIMIT:
        if matrix.shape[0] == 1:
            return 0.0
        return float(cdist(matrix, matrix, "euclidean").max())
    spans = matrix.max(axis=0) - matrix.min(axis=0)
    return float(np.sqrt(np.sum(spans**2)))


def _kmeanspp_init(matrix: np.ndarray, k: int, rng: Xoshiro256StarStar):
    """Seeded k-means++ initialization over data points.

    The first centroid is a uniform draw; each subsequent centroid is
    drawn with probability proportional to squared distance from the
    chosen set. A zero total weight (only possible when every point
    coincides with a chosen centroid) falls back to the lowest unchosen
    index.
    """
    n = matrix.shape[0]
    chosen = [rng.next_below(n)]
    sq_dists = np.sum((matrix - matrix[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        total = float(sq_dists.sum())
        if total <= 0.0:
            remaining = sorted(set(range(n)) - set(chosen))
            idx = remaining[0]
        else:
            r = rng.next_float64() * total
            idx = int(np.searchsorted(np.cumsum(sq_dists), r, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
        np.minimum(
            sq_dists, np.sum((matrix - matrix[idx]) ** 2, axis=1), out=sq_dists
        )
    return matrix[chosen].copy()


def _assign(matrix: np.ndarray, centroids: np.ndarray):
    dists = cdist(matrix, centroids, "euclidean")
    assignments = np.argmin(dists, axis=1)
    pulled = dists[np.arange(matrix.shape[0]), assignments]
    return assignments, float(np.sum(pulled**2))


def _repair_empty(matrix, centroids, assignments):
    """Move each empty cluster's centroid onto the point currently
    farthest from its assigned centroid (ties toward the lower index),
    excluding points already used for another repair this round."""
    dists = np.linalg.norm(matrix - centroids[assignments], axis=1)
    repaired = False
    for j in range(centroids.shape[0]):
        if np.any(assignments == j):
            continue
        far = int(np.argmax(dists))
        centroids[j] = matrix[far]
        dists[far] = -np.inf
        repaired = True
    return repaired


def single_lloyd_run(
    matrix,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = 0.0,
    init_centroids=None,
) -> ClusterModel:
    """One seeded k-means++ + Lloyd run (no restarts, no padding)."""
    matrix = _as_matrix(matrix)
    if init_centroids is None:
        centroids = _kmeanspp_init(matrix, k, Xoshiro256StarStar(seed))
    else:
        centroids = np.array(init_centroids, dtype=np.float64)
        if centroids.shape != (k, matrix.shape[1]):
            raise ValueError(
                f"init_centroids shape {centroids.shape} does not match "
                f"(k={k}, d={matrix.shape[1]})"
            )
    history: list[float] = []
    assignments, inertia = _assign(matrix, centroids)
    iterations = 0
    converged = False
    for _ in range(max_iters):
        history.append(inertia)
        new_centroids = centroids.copy()
        for j in range(k):
            members = assignments == j
            if members.any():
                new_centroids[j] = matrix[members].mean(axis=0)
        _repair_empty(matrix, new_centroids, assignments)
        iterations += 1
        displacement = float(
            np.max(np.linalg.norm(new_centroids - centroids, axis=1))
        )
        centroids = new_centroids
        assignments, inertia = _assign(matrix, centroids)
        if displacement <= tol:
            converged = True
            break
    history.append(inertia)

    # The displacement test can stop a run in the same update that
    # emptied a cluster; repair and reassign until every cluster owns a
    # point (strict inertia descent bounds this at k rounds).
    for _ in range(k):
        if np.all(np.bincount(assignments, minlength=k) > 0):
            break
        _repair_empty(matrix, centroids, assignments)
        assignments, inertia = _assign(matrix, centroids)
        history.append(inertia)

    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        iterations_run=iterations,
        converged=converged,
        inertia_history=tuple(history),
    )


def kmeans(bank, k: int, cfg: KMeansConfig | None = None) -> ClusterModel:
    """Seeded k-means: best of n_restarts k-means++ + Lloyd runs.

    If k exceeds the number of distinct rows, the run uses one cluster
    per distinct row and pads the centroid list with duplicates, listing
    the padded indices in ``collapsed``.
    """
    cfg = cfg or KMeansConfig()
    matrix = _as_matrix(bank)
    n = matrix.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} must satisfy 1 <= k <= N = {n}")
    if cfg.n_restarts < 1:
        raise ValueError(f"n_restarts must be >= 1, got {cfg.n_restarts}")

    n_distinct = np.unique(matrix, axis=0).shape[0]
    k_eff = min(k, n_distinct)
    tol = cfg.tol
    if tol is None:
        tol = DEFAULT_TOL_SCALE * data_diameter(matrix)

    best: ClusterModel | None = None
    for restart_seed in derive_seeds(cfg.seed, cfg.n_restarts):
        model = single_lloyd_run(
            matrix, k_eff, restart_seed, max_iters=cfg.max_iters, tol=tol
        )
        if best is None or model.inertia < best.inertia:
            best = model

    if k_eff == k:
        return best
    padded = np.empty((k, matrix.shape[1]), dtype=np.float64)
    padded[:k_eff] = best.centroids
    for j in range(k_eff, k):
        padded[j] = best.centroids[j % k_eff]
    return ClusterModel(
        k=k,
        centroids=padded,
        assignments=best.assignments,
        inertia=best.inertia,
        iterations_run=best.iterations_run,
        converged=best.converged,
        inertia_history=best.inertia_history,
        collapsed=tuple(range(k_eff, k)),
    )
