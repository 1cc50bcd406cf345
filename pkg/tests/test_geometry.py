"""Tests for distance kernels, knn, and k-means.

Oracles: pairwise distances check against naive scalar loops, knn against
a per-row sort of the naive matrix, and k-means against exhaustive
enumeration of all assignments for tiny instances.
"""

import itertools
import math

import numpy as np
import pytest

from csalkit.errors import CapacityExceeded, InvalidK
from csalkit.geometry import (
    KMeansConfig,
    canonical_metric,
    cross_distances,
    data_diameter,
    kmeans,
    knn,
    pairwise_distances,
    single_lloyd_run,
)
from csalkit.rng import derive_seeds


def naive_pairwise(points, metric):
    n = len(points)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            x, y = np.asarray(points[i], float), np.asarray(points[j], float)
            if metric == "euclidean":
                out[i, j] = math.sqrt(float(np.sum((x - y) ** 2)))
            else:
                nx, ny = math.sqrt(float(x @ x)), math.sqrt(float(y @ y))
                if nx == 0.0 and ny == 0.0:
                    out[i, j] = 0.0
                elif nx == 0.0 or ny == 0.0:
                    out[i, j] = 1.0
                else:
                    out[i, j] = 1.0 - float(x @ y) / (nx * ny)
    return out


def naive_knn(points, k, metric):
    dists = naive_pairwise(points, metric)
    n = len(points)
    idx_out, dist_out = [], []
    for i in range(n):
        order = sorted((dists[i, j], j) for j in range(n) if j != i)[:k]
        idx_out.append([j for _, j in order])
        dist_out.append([d for d, _ in order])
    return np.array(idx_out), np.array(dist_out)


def exhaustive_kmeans_inertia(points, k):
    """Exact optimum over every assignment of N points to at most k clusters."""
    points = np.asarray(points, dtype=np.float64)
    best = np.inf
    for assignment in itertools.product(range(k), repeat=len(points)):
        labels = np.asarray(assignment)
        inertia = 0.0
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centroid = members.mean(axis=0)
                inertia += float(np.sum((members - centroid) ** 2))
        best = min(best, inertia)
    return best


class TestPairwiseDistances:
    def test_two_points_on_a_line(self):
        got = pairwise_distances(np.array([[0.0], [3.0]]))
        np.testing.assert_array_equal(got, [[0.0, 3.0], [3.0, 0.0]])

    def test_identical_rows_all_zero(self):
        got = pairwise_distances(np.ones((4, 3)))
        np.testing.assert_array_equal(got, np.zeros((4, 4)))

    @pytest.mark.parametrize("metric", ["euclidean", "cosine"])
    def test_matches_naive_loop(self, metric):
        rng = np.random.default_rng(21)
        for _ in range(25):
            points = rng.normal(size=(int(rng.integers(2, 9)), int(rng.integers(1, 5))))
            got = pairwise_distances(points, metric=metric)
            want = naive_pairwise(points, metric)
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-12)

    @pytest.mark.parametrize("metric", ["euclidean", "cosine"])
    def test_symmetric_zero_diagonal(self, metric):
        rng = np.random.default_rng(33)
        points = rng.normal(size=(30, 6))
        got = pairwise_distances(points, metric=metric)
        np.testing.assert_allclose(got, got.T, rtol=0, atol=1e-6)
        np.testing.assert_allclose(np.diag(got), 0.0, rtol=0, atol=1e-7)
        assert (got >= 0.0).all()

    def test_cosine_right_angle(self):
        got = pairwise_distances(np.array([[1.0, 0.0], [0.0, 1.0]]), metric="cosine")
        np.testing.assert_allclose(got[0, 1], 1.0, atol=1e-12)

    def test_cosine_forty_five_degrees(self):
        got = pairwise_distances(
            np.array([[1.0, 0.0], [1.0, 1.0]]), metric="cosine"
        )
        np.testing.assert_allclose(got[0, 1], 1.0 - math.sqrt(0.5), atol=1e-12)

    def test_cosine_zero_vector_conventions(self):
        got = pairwise_distances(
            np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), metric="cosine"
        )
        assert got[0, 1] == 1.0
        assert got[0, 2] == 0.0
        assert got[0, 0] == 0.0

    def test_capacity_cap(self):
        with pytest.raises(CapacityExceeded):
            pairwise_distances(np.zeros((11, 2)), cap=10)

    def test_metric_aliases(self):
        assert canonical_metric("cosine_distance") == "cosine"
        with pytest.raises(ValueError):
            canonical_metric("manhattan")

    def test_scale_invariance_of_cosine(self):
        rng = np.random.default_rng(8)
        points = rng.normal(size=(6, 4))
        a = pairwise_distances(points, metric="cosine")
        b = pairwise_distances(points * 7.3, metric="cosine")
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


class TestKnn:
    def test_line_example(self):
        indices, distances = knn(np.array([[0.0], [1.0], [10.0]]), k=1)
        np.testing.assert_array_equal(indices[:, 0], [1, 0, 1])
        np.testing.assert_array_equal(distances[:, 0], [1.0, 1.0, 9.0])

    def test_tie_prefers_lower_index(self):
        indices, _ = knn(np.array([[0.0], [1.0], [2.0]]), k=1)
        assert indices[1, 0] == 0

    def test_full_k_equals_sorted_pairwise_row(self):
        rng = np.random.default_rng(3)
        points = rng.normal(size=(7, 2))
        indices, distances = knn(points, k=6)
        want_idx, want_dist = naive_knn(points, 6, "euclidean")
        np.testing.assert_array_equal(indices, want_idx)
        np.testing.assert_allclose(distances, want_dist, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("k", [0, 3])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidK):
            knn(np.zeros((3, 2)), k=k)

    @pytest.mark.parametrize("metric", ["euclidean", "cosine"])
    def test_matches_brute_force_on_100_instances(self, metric):
        """Exact index agreement against a per-row sort of the pairwise
        matrix (the stated tie rule), plus distance agreement with the
        fully independent scalar-loop oracle."""
        rng = np.random.default_rng(55)
        for _ in range(100):
            n = int(rng.integers(2, 16))
            d = int(rng.integers(1, 5))
            k = int(rng.integers(1, n))
            if rng.integers(0, 2):
                points = rng.integers(-2, 3, size=(n, d)).astype(float)
            else:
                points = rng.normal(size=(n, d))
            got_idx, got_dist = knn(points, k=k, metric=metric)

            matrix = pairwise_distances(points, metric=metric)
            for i in range(n):
                row = sorted((matrix[i, j], j) for j in range(n) if j != i)[:k]
                np.testing.assert_array_equal(got_idx[i], [j for _, j in row])
                np.testing.assert_array_equal(got_dist[i], [dist for dist, _ in row])

            _, naive_dist = naive_knn(points, k, metric)
            np.testing.assert_allclose(got_dist, naive_dist, rtol=1e-9, atol=1e-9)

    def test_euclidean_indices_match_independent_oracle(self):
        rng = np.random.default_rng(56)
        for _ in range(100):
            n = int(rng.integers(2, 16))
            k = int(rng.integers(1, n))
            points = rng.integers(-2, 3, size=(n, int(rng.integers(1, 5)))).astype(float)
            got_idx, _ = knn(points, k=k)
            want_idx, _ = naive_knn(points, k, "euclidean")
            np.testing.assert_array_equal(got_idx, want_idx)


def model_invariants_hold(points, model):
    points = np.asarray(points, dtype=np.float64)
    active = [j for j in range(model.k) if j not in model.collapsed]
    assert set(np.unique(model.assignments)).issubset(set(active))
    dists = cross_distances(points, model.centroids)
    pulled = dists[np.arange(len(points)), model.assignments]
    assert np.all(pulled <= dists.min(axis=1) + 1e-7)
    recomputed = float(np.sum(pulled**2))
    assert math.isclose(model.inertia, recomputed, rel_tol=1e-5, abs_tol=1e-9)
    counts = np.bincount(model.assignments, minlength=model.k)
    for j in active:
        assert counts[j] > 0


class TestKMeans:
    def test_k_equals_one_gives_mean(self):
        rng = np.random.default_rng(1)
        points = rng.normal(size=(9, 3))
        model = kmeans(points, 1)
        np.testing.assert_allclose(model.centroids[0], points.mean(axis=0), atol=1e-9)
        want = float(np.sum((points - points.mean(axis=0)) ** 2))
        assert math.isclose(model.inertia, want, rel_tol=1e-9)

    def test_k_equals_n_zero_inertia(self):
        points = np.array([[0.0], [1.0], [5.0], [9.0]])
        model = kmeans(points, 4)
        assert model.inertia == 0.0
        assert sorted(model.centroids[:, 0].tolist()) == [0.0, 1.0, 5.0, 9.0]
        model_invariants_hold(points, model)

    def test_two_separated_pairs(self):
        points = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
        model = kmeans(points, 2)
        got = sorted(model.centroids.tolist())
        np.testing.assert_allclose(got[0], [0.05, 0.0], atol=1e-6)
        np.testing.assert_allclose(got[1], [10.05, 0.0], atol=1e-6)
        model_invariants_hold(points, model)

    def test_inertia_history_non_increasing(self):
        rng = np.random.default_rng(5)
        for trial in range(30):
            points = rng.normal(size=(int(rng.integers(4, 25)), int(rng.integers(1, 4))))
            model = kmeans(points, int(rng.integers(1, 5)), KMeansConfig(seed=trial))
            history = np.array(model.inertia_history)
            # Tiny positive slack absorbs float rounding in the means.
            assert np.all(np.diff(history) <= 1e-9 * np.maximum(history[:-1], 1.0))

    def test_within_five_percent_of_exhaustive_optimum(self):
        rng = np.random.default_rng(77)
        for trial in range(20):
            n = int(rng.integers(3, 9))
            k = int(rng.integers(1, 4))
            k = min(k, n)
            points = rng.normal(size=(n, int(rng.integers(1, 4))))
            model = kmeans(points, k, KMeansConfig(seed=trial))
            optimum = exhaustive_kmeans_inertia(points, k)
            assert model.inertia <= optimum * 1.05 + 1e-9
            model_invariants_hold(points, model)

    def test_restart_wiring_returns_best_single_run(self):
        rng = np.random.default_rng(13)
        points = rng.normal(size=(20, 2))
        cfg = KMeansConfig(seed=42, n_restarts=5)
        model = kmeans(points, 3, cfg)
        tol = 1e-4 * data_diameter(points)
        singles = [
            single_lloyd_run(points, 3, s, max_iters=cfg.max_iters, tol=tol).inertia
            for s in derive_seeds(cfg.seed, cfg.n_restarts)
        ]
        assert math.isclose(model.inertia, min(singles), rel_tol=1e-12)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(2)
        points = rng.normal(size=(30, 4))
        a = kmeans(points, 4, KMeansConfig(seed=9))
        b = kmeans(points, 4, KMeansConfig(seed=9))
        assert a.centroids.tobytes() == b.centroids.tobytes()
        np.testing.assert_array_equal(a.assignments, b.assignments)
        assert a.inertia == b.inertia

    def test_empty_cluster_repair_from_forced_init(self):
        points = np.array([[0.0], [1.0], [2.0], [3.0]])
        model = single_lloyd_run(
            points, 2, seed=0, max_iters=50, tol=0.0, init_centroids=[[0.0], [100.0]]
        )
        counts = np.bincount(model.assignments, minlength=2)
        assert counts.min() > 0
        history = np.array(model.inertia_history)
        assert np.all(np.diff(history) <= 1e-9 * np.maximum(history[:-1], 1.0))

    def test_no_empty_clusters_across_random_instances(self):
        rng = np.random.default_rng(31)
        for trial in range(100):
            n = int(rng.integers(3, 30))
            k = int(rng.integers(2, min(n, 6) + 1))
            center = rng.normal(size=2) * 0.1
            points = np.vstack(
                [rng.normal(loc=center, scale=0.05, size=(n - 1, 2)),
                 rng.normal(loc=center + 50.0, scale=0.05, size=(1, 2))]
            )
            model = kmeans(points, k, KMeansConfig(seed=trial, n_restarts=2))
            model_invariants_hold(points, model)

    def test_k_above_distinct_points_pads_and_marks(self):
        points = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
        model = kmeans(points, 3)
        assert model.collapsed == (2,)
        np.testing.assert_array_equal(model.centroids[2], model.centroids[0])
        assert set(model.assignments.tolist()).issubset({0, 1})
        assert model.inertia == 0.0

    def test_invalid_k(self):
        points = np.zeros((3, 2))
        with pytest.raises(InvalidK):
            kmeans(points, 0)
        with pytest.raises(InvalidK):
            kmeans(points, 4)

    def test_all_identical_points(self):
        points = np.ones((5, 2))
        model = kmeans(points, 2)
        assert model.collapsed == (1,)
        assert model.inertia == 0.0

    def test_accepts_feature_bank(self):
        from csalkit.bank import FeatureBank

        bank = FeatureBank(
            features=np.array([[0.0], [1.0], [10.0]], dtype=np.float32),
            sample_ids=("a", "b", "c"),
        )
        got = pairwise_distances(bank)
        assert got[0, 2] == 10.0
        model = kmeans(bank, 2)
        model_invariants_hold(bank.features, model)


class TestDataDiameter:
    def test_small_exact(self):
        assert data_diameter(np.array([[0.0], [3.0], [1.0]])) == 3.0

    def test_single_point(self):
        assert data_diameter(np.array([[5.0, 5.0]])) == 0.0

    def test_large_uses_bbox_upper_bound(self):
        rng = np.random.default_rng(4)
        points = rng.normal(size=(5000, 3))
        diameter = data_diameter(points)
        spans = points.max(axis=0) - points.min(axis=0)
        assert diameter == pytest.approx(float(np.sqrt((spans**2).sum())))
        sample = points[:: 50]
        assert diameter >= cross_distances(sample, sample).max() - 1e-9
