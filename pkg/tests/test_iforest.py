"""
Tests for isolation trees, forest scoring, the signed-score offset and
forest checkpoints.
"""

import json
import math

import numpy as np
import pytest

from errors import DataFormatError, ShapeError, VersionMismatchError
from iforest import (
    LEAF,
    IsolationForest,
    build_tree,
    c_factor,
    default_height_limit,
    fit_forest,
    forest_from_dict,
    forest_to_dict,
    load_forest,
    normalized_score,
    path_length,
    path_lengths,
    save_forest,
    score,
    score_batch,
    threshold_offset,
)


@pytest.fixture
def cluster():
    return np.random.default_rng(0).normal(size=(200, 4))


class TestNormalization:
    def test_c_factor_values(self):
        assert c_factor(0) == 0.0
        assert c_factor(1) == 0.0
        assert c_factor(2) == pytest.approx(0.15443, abs=1e-5)
        assert c_factor(256) == pytest.approx(2 * (math.log(255) + 0.5772156649) - 2 * 255 / 256)

    def test_score_is_one_half_at_average_path(self):
        assert normalized_score(c_factor(256), 256) == pytest.approx(0.5)

    def test_default_height_limit(self):
        assert default_height_limit(256) == 8
        assert default_height_limit(100) == 7


class TestTree:
    def test_structure_invariants(self, cluster):
        tree = build_tree(cluster[:64], np.random.default_rng(1), height_limit=None)
        internal = tree.feature != LEAF
        assert tree.size[0] == 64
        assert np.all(tree.size[internal] == tree.size[tree.left[internal]] + tree.size[tree.right[internal]])
        assert np.all(tree.size[~internal] == 1)
        assert tree.n_leaves == 64

    def test_height_limit(self, cluster):
        tree = build_tree(cluster[:64], np.random.default_rng(1), height_limit=3)
        assert tree.max_depth <= 3

    def test_duplicates_become_one_leaf(self):
        x = np.ones((10, 3))
        tree = build_tree(x, np.random.default_rng(0), height_limit=None)
        assert tree.n_nodes == 1
        assert path_length(tree, np.ones(3)) == pytest.approx(c_factor(10))

    def test_split_point_strictly_inside_range(self):
        x = np.array([[0.0], [1.0]])
        for seed in range(20):
            tree = build_tree(x, np.random.default_rng(seed), height_limit=None)
            assert 0.0 < tree.threshold[0] < 1.0
            assert tree.n_leaves == 2

    def test_vectorized_path_lengths_match_single(self, cluster):
        tree = build_tree(cluster[:50], np.random.default_rng(2), height_limit=4)
        queries = np.vstack([cluster[100:120], [[9.0, -9.0, 0.0, 5.0]]])
        expected = [path_length(tree, q) for q in queries]
        assert np.allclose(path_lengths(tree, queries), expected)

    def test_query_dimension_checked(self, cluster):
        tree = build_tree(cluster[:10], np.random.default_rng(0), height_limit=None)
        with pytest.raises(ShapeError):
            path_length(tree, np.zeros(3), n_features=4)


class TestForest:
    def test_outlier_scores_higher_than_inliers(self, cluster):
        forest = fit_forest(cluster, n_trees=100, subsample_size=128, contamination=0.01, seed=3)
        outlier = score(forest, np.full(4, 8.0))
        inliers = score_batch(forest, cluster)
        assert outlier.is_anomaly
        assert outlier.signed < 0
        assert outlier.s > inliers.s.max()
        assert outlier.mean_path_length < inliers.mean_path_length.min()

    def test_contamination_sets_training_anomaly_count(self, cluster):
        """floor(c * n) training instances fall below zero."""
        forest = fit_forest(cluster, n_trees=50, subsample_size=64, contamination=0.05, seed=4)
        training = score_batch(forest, cluster)
        assert int(training.anomalous.sum()) == 10

    def test_tiny_contamination_flags_no_training_instance(self, cluster):
        forest = fit_forest(cluster, n_trees=50, subsample_size=64, contamination=1e-4, seed=4)
        training = score_batch(forest, cluster)
        assert not training.anomalous.any()
        assert forest.offset > training.s.max()

    def test_threshold_offset_rules(self):
        s = np.array([0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0])
        assert threshold_offset(s, 0.2) == pytest.approx(0.75)
        assert threshold_offset(s, 0.01) == pytest.approx(0.9 + 0.5 * (0.9 - 0.45))
        assert threshold_offset(np.full(5, 0.5), 0.01) > 0.5

    def test_same_seed_same_forest(self, cluster):
        a = fit_forest(cluster, n_trees=20, subsample_size=32, seed=9)
        b = fit_forest(cluster, n_trees=20, subsample_size=32, seed=9)
        c = fit_forest(cluster, n_trees=20, subsample_size=32, seed=10)
        assert a.offset == b.offset
        assert np.array_equal(score_batch(a, cluster).s, score_batch(b, cluster).s)
        assert not np.array_equal(score_batch(a, cluster).s, score_batch(c, cluster).s)

    def test_training_order_does_not_matter(self, cluster):
        shuffled = cluster[np.random.default_rng(5).permutation(len(cluster))]
        a = fit_forest(cluster, n_trees=20, subsample_size=32, seed=1)
        b = fit_forest(shuffled, n_trees=20, subsample_size=32, seed=1)
        assert np.array_equal(score_batch(a, cluster).signed, score_batch(b, cluster).signed)

    def test_threads_do_not_change_results(self, cluster):
        a = fit_forest(cluster, n_trees=16, subsample_size=32, seed=2, n_jobs=1)
        b = fit_forest(cluster, n_trees=16, subsample_size=32, seed=2, n_jobs=4)
        assert np.array_equal(score_batch(a, cluster).s, score_batch(b, cluster).s)

    def test_subsample_capped_at_training_size(self, cluster):
        forest = fit_forest(cluster[:40], n_trees=5, subsample_size=256, seed=0)
        assert forest.subsample_size == 40
        assert forest.height_limit == default_height_limit(40)
        assert all(tree.size[0] == 40 for tree in forest.trees)

    def test_oversampling_draws_with_replacement(self, cluster):
        forest = fit_forest(cluster[:40], n_trees=5, subsample_size=64, seed=0, oversample=True)
        assert forest.subsample_size == 64
        assert all(tree.size[0] == 64 for tree in forest.trees)

    def test_batch_and_single_scores_agree(self, cluster):
        forest = fit_forest(cluster, n_trees=10, subsample_size=32, seed=6)
        batch = score_batch(forest, cluster[:5])
        for i in range(5):
            single = score(forest, cluster[i])
            assert single.s == pytest.approx(batch.s[i])
            assert single.signed == pytest.approx(batch.signed[i])

    def test_invalid_training_sets(self, cluster):
        with pytest.raises(ValueError):
            fit_forest(cluster[:1])
        with pytest.raises(ValueError):
            fit_forest(np.ones((10, 3)))
        with pytest.raises(ValueError):
            fit_forest(cluster, contamination=0.6)
        with pytest.raises(ValueError):
            fit_forest(np.vstack([cluster, [[np.nan] * 4]]))

    def test_unfitted_and_mismatched_queries(self, cluster):
        with pytest.raises(ValueError):
            score_batch(IsolationForest(n_features=4, subsample_size=2, contamination=0.1, seed=0), cluster)
        forest = fit_forest(cluster, n_trees=5, subsample_size=16, seed=0)
        with pytest.raises(ShapeError):
            score(forest, np.zeros(3))


class TestForestCheckpoint:
    def test_round_trip_preserves_scores(self, tmp_path, cluster):
        forest = fit_forest(cluster, n_trees=10, subsample_size=32, seed=7)
        path = save_forest(forest, tmp_path / "forest.json")
        loaded = load_forest(path)
        assert loaded.offset == forest.offset
        assert loaded.n_trees == 10
        assert np.array_equal(score_batch(loaded, cluster).signed, score_batch(forest, cluster).signed)

    def test_inconsistent_node_sizes_rejected(self, cluster):
        raw = forest_to_dict(fit_forest(cluster, n_trees=2, subsample_size=16, seed=0))
        raw["trees"][0]["size"][0] += 1
        with pytest.raises(DataFormatError):
            forest_from_dict(raw)

    def test_version_mismatch(self, tmp_path, cluster):
        raw = forest_to_dict(fit_forest(cluster, n_trees=2, subsample_size=16, seed=0))
        raw["version"] = 2
        path = tmp_path / "forest.json"
        path.write_text(json.dumps(raw))
        with pytest.raises(VersionMismatchError):
            load_forest(path)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "forest.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            load_forest(path)
