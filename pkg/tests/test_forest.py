import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotorbar.cart import Leaf, TreeFitConfig, fit_tree, predict_tree_batch
from rotorbar.errors import ConfigError, DegenerateLabels, EmptyDataset, FeatureArityError
from rotorbar.evaluation import auc, cross_validate, stratified_folds
from rotorbar.forest import (
    ForestConfig,
    ForestModel,
    fit_forest,
    forest_importances,
    majority_vote,
    model_from_dict,
    model_to_dict,
    predict_forest,
)


def leaf_forest(*leaves, threshold=0.5):
    return ForestModel(
        trees=tuple(leaves), oob_indices=tuple(np.empty(0, int) for _ in leaves), oob_error=None,
        importances=np.zeros(1), config=ForestConfig(n_trees=len(leaves), decision_threshold=threshold),
        n_features=1,
    )


def noisy_1d(n=120, seed=0, p=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    return X, y


class TestConfig:
    @pytest.mark.parametrize("p, k", [(13, 4), (2, 2), (3, 2), (16, 4), (1, 1)])
    def test_sqrt_rounds_up(self, p, k):
        assert ForestConfig().features_per_split(p) == k

    def test_all_and_int(self):
        assert ForestConfig(max_features="all").features_per_split(13) == 13
        assert ForestConfig(max_features=3).features_per_split(13) == 3
        with pytest.raises(ConfigError):
            ForestConfig(max_features=14).features_per_split(13)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            ForestConfig(n_trees=0)
        with pytest.raises(ConfigError):
            ForestConfig(max_features="log2")


class TestFit:
    def test_one_tree_without_bootstrap_is_cart(self):
        X, y = noisy_1d()
        model = fit_forest(X, y, ForestConfig(n_trees=1, max_features="all"), bootstrap=False)
        probe = np.random.default_rng(1).normal(size=(50, 3))
        np.testing.assert_array_equal(model.predict_proba(probe), predict_tree_batch(fit_tree(X, y), probe))
        assert model.oob_error is None

    def test_thirteen_features_sample_four_per_split(self, monkeypatch):
        import rotorbar.forest as forest_mod

        seen = []
        real = forest_mod.fit_tree

        def spy(X, y, cfg, rng=None):
            seen.append(cfg.max_features)
            return real(X, y, cfg, rng=rng)

        monkeypatch.setattr(forest_mod, "fit_tree", spy)
        X, y = noisy_1d(p=13)
        fit_forest(X, y, ForestConfig(n_trees=3))
        assert seen == [4, 4, 4]

    def test_same_seed_identical(self):
        X, y = noisy_1d()
        a = fit_forest(X, y, ForestConfig(n_trees=20, rng_seed=4))
        b = fit_forest(X, y, ForestConfig(n_trees=20, rng_seed=4))
        assert a.importances.tobytes() == b.importances.tobytes()
        assert a.trees == b.trees

    def test_different_seed_differs(self):
        X, y = noisy_1d()
        assert fit_forest(X, y, ForestConfig(10, rng_seed=1)).trees != fit_forest(X, y, ForestConfig(10, rng_seed=2)).trees

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 1000))
    def test_prefix_invariance(self, a, b, seed):
        X, y = noisy_1d(60, seed)
        small = fit_forest(X, y, ForestConfig(n_trees=min(a, b), rng_seed=seed))
        large = fit_forest(X, y, ForestConfig(n_trees=max(a, b), rng_seed=seed))
        assert large.trees[: len(small.trees)] == small.trees
        for o1, o2 in zip(small.oob_indices, large.oob_indices):
            assert np.array_equal(o1, o2)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateLabels):
            fit_forest(np.zeros((4, 2)), np.zeros(4, int))
        with pytest.raises(EmptyDataset):
            fit_forest(np.zeros((1, 2)), np.array([1]))

    def test_oob_fraction_near_one_over_e(self):
        X, y = noisy_1d(256)
        model = fit_forest(X, y, ForestConfig(n_trees=300))
        frac = np.array([o.size for o in model.oob_indices]) / 256
        assert 0.30 <= frac.min() and frac.max() <= 0.44
        assert frac.mean() == pytest.approx((1 - 1 / 256) ** 256, abs=0.01)

    def test_oob_rows_are_out_of_bag(self):
        X, y = noisy_1d(40)
        model = fit_forest(X, y, ForestConfig(n_trees=5, rng_seed=3))
        for i, oob in enumerate(model.oob_indices):
            rng = np.random.default_rng([3, i])
            rows = rng.integers(0, 40, size=40)
            assert np.array_equal(oob, np.setdiff1d(np.arange(40), rows))

    def test_oob_error_is_reasonable(self):
        X, y = noisy_1d(300)
        model = fit_forest(X, y, ForestConfig(n_trees=100))
        assert 0.0 <= model.oob_error < 0.35


class TestPredict:
    def test_probability_average(self):
        forest = leaf_forest(Leaf((1, 9)), Leaf((4, 6)), Leaf((8, 2)))
        prob, cls = predict_forest(forest, [0.0])
        assert prob == pytest.approx(17 / 30) and cls == 1

    def test_all_healthy(self):
        assert predict_forest(leaf_forest(Leaf((3, 0)), Leaf((5, 0))), [1.0]) == (0.0, 0)

    def test_one_tree(self):
        assert predict_forest(leaf_forest(Leaf((1, 3))), [1.0])[0] == 0.75

    def test_batch_matches_single(self):
        X, y = noisy_1d()
        model = fit_forest(X, y, ForestConfig(n_trees=15))
        probs = model.predict_proba(X[:10])
        for row, p in zip(X[:10], probs):
            assert predict_forest(model, row)[0] == pytest.approx(p, abs=1e-15)
        np.testing.assert_array_equal(model.predict(X[:10]), (probs >= 0.5).astype(int))

    def test_arity(self):
        X, y = noisy_1d()
        model = fit_forest(X, y, ForestConfig(n_trees=2))
        with pytest.raises(FeatureArityError):
            model.predict_proba(np.zeros((2, 2)))
        with pytest.raises(FeatureArityError):
            majority_vote(model, [1.0])


class TestMajorityVote:
    def test_strict_majority(self):
        assert majority_vote(leaf_forest(Leaf((0, 3)), Leaf((0, 1)), Leaf((4, 0))), [0.0]) == 1

    def test_tie_says_faulty(self):
        assert majority_vote(leaf_forest(Leaf((0, 3)), Leaf((4, 0))), [0.0]) == 1

    def test_majority_healthy(self):
        assert majority_vote(leaf_forest(Leaf((0, 3)), Leaf((4, 0)), Leaf((2, 1))), [0.0]) == 0

    @settings(max_examples=10, deadline=None)
    @given(st.integers(1, 30), st.integers(0, 1000))
    def test_agrees_with_probability_when_leaves_are_pure(self, n_trees, seed):
        # continuous features: unpruned trees end in pure leaves, so the mean
        # probability is the vote fraction
        X, y = noisy_1d(60, seed)
        model = fit_forest(X, y, ForestConfig(n_trees=n_trees, rng_seed=seed))
        probe = np.random.default_rng(seed + 1).normal(size=(30, 3))
        for row, p in zip(probe, model.predict_proba(probe)):
            assert majority_vote(model, row) == int(p >= 0.5)


class TestImportances:
    def test_single_leaf_forest(self):
        model = fit_forest(np.array([[1.0], [1.0]]), np.array([0, 1]), ForestConfig(n_trees=3))
        assert model.importances.tolist() == [0.0]
        assert forest_importances(model) == []

    def test_informative_feature_first(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 5))
        y = (X[:, 2] > 0).astype(int)
        model = fit_forest(X, y, ForestConfig(n_trees=50), feature_names=list("abcde"))
        ranked = forest_importances(model)
        assert ranked[0][0] == "c" and ranked[0][1] > 0.5
        assert sum(v for _, v in ranked) == pytest.approx(1.0)

    def test_default_names(self):
        X, y = noisy_1d()
        assert forest_importances(fit_forest(X, y, ForestConfig(n_trees=5)))[0][0].startswith("x")

    def test_startup_mean_index_leads(self, default_dataset):
        for seed in range(5):
            model = fit_forest(default_dataset.X, default_dataset.y, ForestConfig(rng_seed=seed),
                               default_dataset.feature_names)
            assert forest_importances(model)[0][0] == "mean_index"


class TestSerialisation:
    def test_round_trip(self):
        X, y = noisy_1d()
        model = fit_forest(X, y, ForestConfig(n_trees=8, rng_seed=2), feature_names=["a", "b", "c"])
        text = json.dumps(model_to_dict(model))
        again = model_from_dict(json.loads(text))
        assert json.dumps(model_to_dict(again)) == text
        assert again.trees == model.trees
        np.testing.assert_array_equal(again.predict_proba(X), model.predict_proba(X))
        assert again.feature_names == ("a", "b", "c")

    def test_document_fields(self):
        X, y = noisy_1d()
        d = model_to_dict(fit_forest(X, y, ForestConfig(n_trees=2)))
        assert {"config", "seed", "trees", "importances", "oob_error"} <= set(d)


def test_variance_reduction_over_single_tree(default_dataset):
    X, y = default_dataset.X, default_dataset.y
    forest_auc, tree_auc = [], []
    for seed in range(10):
        folds = stratified_folds(y, 5, seed)
        fa, _, _ = cross_validate(
            lambda a, b, c: fit_forest(a, b, ForestConfig(n_trees=100, rng_seed=seed)).predict_proba(c),
            X, y, folds, 0.5)
        ta, _, _ = cross_validate(
            lambda a, b, c: predict_tree_batch(fit_tree(a, b, TreeFitConfig(), rng=None), c),
            X, y, folds, 0.5)
        forest_auc.append(np.mean(fa))
        tree_auc.append(np.mean(ta))
    assert np.std(forest_auc) <= np.std(tree_auc)
    assert np.mean(forest_auc) >= np.mean(tree_auc)


def test_auc_helper_agrees_on_forest_scores(default_dataset):
    model = fit_forest(default_dataset.X, default_dataset.y, ForestConfig(n_trees=10))
    assert auc(model.predict_proba(default_dataset.X), default_dataset.y) > 0.99
