import numpy as np
import pytest

from oodlab.clustering import ClusterAssignment, kmeans_normalized
from oodlab.errors import InvalidRequestError, ShapeError, UndefinedMetricError
from oodlab.numeric import make_rng
from oodlab.sampling import (
    CandidateBatch,
    SelectedOutliers,
    diversity_delta,
    sample_biased,
    sample_dos,
    sample_greedy,
    sample_random,
    sample_uniform_clusters,
    selection_rows,
)


def batch_of(scores, dim=3, seed=0):
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    return CandidateBatch(
        features=make_rng(seed).standard_normal((n, dim)),
        source_indices=np.arange(100, 100 + n),
        scores=scores,
    )


def clusters_of(labels, k=None):
    labels = np.asarray(labels, dtype=np.int64)
    k = k if k is not None else labels.max() + 1
    centroids = np.zeros((k, 3))
    centroids[:, 0] = np.arange(k)
    return ClusterAssignment(assignments=labels, centroids=centroids,
                             inertia=0.0, iterations_run=1)


class TestRandom:
    def test_m_equals_rows_selects_everything(self):
        sel = sample_random(batch_of(np.zeros(7)), 7, make_rng(1))
        assert sorted(sel.indices.tolist()) == list(range(7))

    def test_m_zero_empty(self):
        assert sample_random(batch_of(np.zeros(4)), 0, make_rng(2)).m == 0

    def test_seeded_determinism(self):
        a = sample_random(batch_of(np.zeros(20)), 5, make_rng(3)).indices
        b = sample_random(batch_of(np.zeros(20)), 5, make_rng(3)).indices
        np.testing.assert_array_equal(a, b)

    def test_m_too_large_rejected(self):
        with pytest.raises(InvalidRequestError):
            sample_random(batch_of(np.zeros(3)), 4, make_rng(0))


class TestGreedy:
    def test_top_two(self):
        sel = sample_greedy(batch_of([0.1, 0.9, 0.5]), 2)
        assert sorted(sel.indices.tolist()) == [1, 2]

    def test_all_equal_ties_break_low(self):
        sel = sample_greedy(batch_of([0.4] * 5), 2)
        assert sel.indices.tolist() == [0, 1]

    def test_matches_full_sort_oracle(self):
        scores = make_rng(4).random(50)
        sel = sample_greedy(batch_of(scores), 12)
        oracle = sorted(range(50), key=lambda i: (-scores[i], i))[:12]
        assert sel.indices.tolist() == oracle

    def test_no_excluded_score_beats_an_included_one(self):
        scores = make_rng(5).random(30)
        sel = sample_greedy(batch_of(scores), 10)
        included = set(sel.indices.tolist())
        worst_in = min(scores[i] for i in included)
        for i in range(30):
            if i not in included:
                assert scores[i] <= worst_in


class TestBiased:
    def test_draws_come_from_largest_cluster(self):
        labels = [0] * 10 + [1] * 3
        sel = sample_biased(batch_of(np.zeros(13)), clusters_of(labels), 5, make_rng(6))
        assert all(labels[i] == 0 for i in sel.indices)
        np.testing.assert_array_equal(sel.cluster_ids, np.zeros(5))

    def test_m_equal_to_cluster_size_takes_entire_cluster(self):
        labels = [0] * 4 + [1] * 6
        sel = sample_biased(batch_of(np.zeros(10)), clusters_of(labels), 6, make_rng(7))
        assert sorted(sel.indices.tolist()) == [4, 5, 6, 7, 8, 9]

    def test_cluster_index_override(self):
        labels = [0] * 10 + [1] * 3
        sel = sample_biased(batch_of(np.zeros(13)), clusters_of(labels), 2, make_rng(8),
                            cluster_index=1)
        assert all(labels[i] == 1 for i in sel.indices)

    def test_insufficient_population_rejected(self):
        labels = [0] * 4 + [1] * 2
        with pytest.raises(InvalidRequestError):
            sample_biased(batch_of(np.zeros(6)), clusters_of(labels), 5, make_rng(9))

    def test_seeded_determinism(self):
        labels = [0] * 12 + [1] * 4
        a = sample_biased(batch_of(np.zeros(16)), clusters_of(labels), 6, make_rng(10)).indices
        b = sample_biased(batch_of(np.zeros(16)), clusters_of(labels), 6, make_rng(10)).indices
        np.testing.assert_array_equal(a, b)


class TestUniformClusters:
    def test_m_equals_k_selects_one_per_cluster(self):
        labels = list(range(6)) * 3
        sel = sample_uniform_clusters(batch_of(np.zeros(18)), clusters_of(labels), 6, make_rng(11))
        assert sorted(sel.cluster_ids.tolist()) == list(range(6))

    def test_exhausted_clusters_force_remainder(self):
        labels = [0] + [1] + [2] * 10
        sel = sample_uniform_clusters(batch_of(np.zeros(12)), clusters_of(labels), 5, make_rng(12))
        counts = np.bincount(sel.cluster_ids, minlength=3)
        assert counts.tolist() == [1, 1, 3]

    def test_seeded_determinism(self):
        labels = [0, 0, 1, 1, 2, 2, 2]
        a = sample_uniform_clusters(batch_of(np.zeros(7)), clusters_of(labels), 4, make_rng(13)).indices
        b = sample_uniform_clusters(batch_of(np.zeros(7)), clusters_of(labels), 4, make_rng(13)).indices
        np.testing.assert_array_equal(a, b)

    def test_balanced_when_m_divisible(self):
        labels = list(range(4)) * 5
        sel = sample_uniform_clusters(batch_of(np.zeros(20)), clusters_of(labels), 8, make_rng(14))
        counts = np.bincount(sel.cluster_ids, minlength=4)
        assert counts.tolist() == [2, 2, 2, 2]


class TestDos:
    def test_per_cluster_argmax_example(self):
        scores = [0.2, 0.8, 0.5]
        labels = [0, 0, 1]
        sel = sample_dos(batch_of(scores), clusters_of(labels))
        assert sel.indices.tolist() == [1, 2]
        assert sel.cluster_ids.tolist() == [0, 1]

    def test_k_equals_rows_selects_all(self):
        sel = sample_dos(batch_of(make_rng(15).random(6)), clusters_of(list(range(6))))
        assert sorted(sel.indices.tolist()) == list(range(6))

    def test_tie_breaks_to_lower_index(self):
        sel = sample_dos(batch_of([0.7, 0.7, 0.1]), clusters_of([0, 0, 0]))
        assert sel.indices.tolist() == [0]

    def test_matches_per_cluster_exhaustive_max(self):
        rng = make_rng(16)
        scores = rng.random(64)
        labels = rng.integers(0, 8, size=64)
        sel = sample_dos(batch_of(scores), clusters_of(labels, k=8))
        expected = []
        for c in range(8):
            members = [i for i in range(64) if labels[i] == c]
            if members:
                best = max(members, key=lambda i: (scores[i], -i))
                expected.append(best)
        assert sel.indices.tolist() == expected

    def test_output_size_is_nonempty_cluster_count(self):
        labels = [0, 0, 2, 2, 5]
        sel = sample_dos(batch_of(np.zeros(5)), clusters_of(labels, k=6))
        assert sel.m == 3

    def test_selected_score_dominates_its_cluster(self):
        x = make_rng(17).standard_normal((40, 4))
        scores = make_rng(18).random(40)
        clusters = kmeans_normalized(x, 5, make_rng(19))
        sel = sample_dos(CandidateBatch(features=x, source_indices=np.arange(40),
                                        scores=scores), clusters)
        for idx, cid in zip(sel.indices, sel.cluster_ids):
            members = np.flatnonzero(clusters.assignments == cid)
            assert scores[idx] >= scores[members].max()

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(ShapeError):
            sample_dos(batch_of(np.zeros(5)), clusters_of([0, 1, 0]))


class TestDiversityDelta:
    def test_symmetric_pair(self):
        assert diversity_delta(np.array([[0.0, 0.0], [1.0, 0.0]])) == 1.0

    def test_duplicate_pair_with_outlier(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
        assert diversity_delta(x) == pytest.approx(5.0 / 3.0, rel=1e-12)

    def test_matches_pairwise_oracle(self):
        x = make_rng(20).standard_normal((10, 3))
        expected = 0.0
        for i in range(10):
            best = min(
                float(np.sqrt(((x[i] - x[j]) ** 2).sum())) for j in range(10) if j != i
            )
            expected += best
        expected /= 10
        assert diversity_delta(x) == pytest.approx(expected, abs=1e-12)

    def test_fewer_than_two_points_undefined(self):
        with pytest.raises(UndefinedMetricError):
            diversity_delta(np.ones((1, 2)))


class TestSelectionPlumbing:
    def test_duplicates_rejected(self):
        with pytest.raises(InvalidRequestError):
            SelectedOutliers(indices=np.array([1, 1]), strategy="random")

    def test_rows_carry_pool_ids_and_scores(self):
        batch = batch_of([0.3, 0.9])
        sel = sample_greedy(batch, 1)
        rows = selection_rows(sel, batch)
        assert rows == [(101, -1, 0.9, "greedy")]

    def test_rows_use_cluster_assignment_fallback(self):
        batch = batch_of([0.3, 0.9, 0.1])
        sel = sample_random(batch, 2, make_rng(21))
        rows = selection_rows(sel, batch, clusters_of([0, 1, 1]))
        for (pool_idx, cid, score, strategy), idx in zip(rows, sel.indices):
            assert pool_idx == 100 + idx
            assert cid == [0, 1, 1][idx]
            assert strategy == "random"
