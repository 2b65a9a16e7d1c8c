import numpy as np
import pytest

import oracles
from cgrep import (DecisionTreeClassifier, GradientBoostedClassifier,
                   classification_metrics, simulate_classification)
from cgrep.errors import FitError
from cgrep.learners import auc_score, confusion_metrics, f1_score


class TestDecisionTree:
    def test_separable_1d(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        tree = DecisionTreeClassifier(max_depth=3).fit(x, y)
        assert 1.0 < tree.tree_.threshold[0] < 2.0
        assert np.array_equal(tree.predict(x), y)

    def test_single_class_rejected(self):
        with pytest.raises(FitError, match="single-class"):
            DecisionTreeClassifier().fit(np.zeros((4, 1)), np.zeros(4))

    def test_root_split_matches_exhaustive_scan(self, rng):
        for _ in range(20):
            x = rng.normal(size=(50, 5))
            y = rng.integers(0, 2, size=50)
            if len(np.unique(y)) < 2:
                continue
            tree = DecisionTreeClassifier(max_depth=1).fit(x, y)
            f = int(tree.tree_.feature[0])
            thr = float(tree.tree_.threshold[0])
            # oracle: the best weighted Gini over every feature and midpoint
            best = min(oracles.gini_split_scan(x[:, j], y)[0] for j in range(5))
            left = y[x[:, f] <= thr]
            right = y[x[:, f] > thr]

            def gini(g):
                p = g.mean()
                return 2 * p * (1 - p)

            got = len(left) * gini(left) + len(right) * gini(right)
            assert got == pytest.approx(best, abs=1e-10)

    def test_deterministic_across_runs(self, rng):
        x = rng.normal(size=(40, 3))
        y = rng.integers(0, 2, size=40)
        t1 = DecisionTreeClassifier(max_depth=4).fit(x, y)
        t2 = DecisionTreeClassifier(max_depth=4).fit(x, y)
        assert np.array_equal(t1.tree_.feature, t2.tree_.feature)
        assert np.array_equal(t1.tree_.threshold, t2.tree_.threshold)
        assert np.array_equal(t1.tree_.value, t2.tree_.value)

    def test_min_leaf_respected(self, rng):
        x = rng.normal(size=(30, 2))
        y = rng.integers(0, 2, size=30)
        tree = DecisionTreeClassifier(max_depth=6, min_leaf=5).fit(x, y)
        leaves = tree.tree_.apply(x)
        _, counts = np.unique(leaves, return_counts=True)
        assert counts.min() >= 5

    def test_get_params_sklearn_protocol(self):
        tree = DecisionTreeClassifier(max_depth=2, min_leaf=3)
        assert tree.get_params() == {"max_depth": 2, "min_leaf": 3}


class TestBoosting:
    def test_separable_blobs_high_auc(self):
        table, y = simulate_classification(80, 2, 0, separation=3.0, seed=5)
        x = table.matrix()
        model = GradientBoostedClassifier(n_trees=50, max_depth=2).fit(x, y)
        m = classification_metrics(y, model.predict_proba(x)[:, 1])
        assert m.auc >= 0.99

    def test_zero_trees_rejected(self):
        with pytest.raises(ValueError, match="n_trees"):
            GradientBoostedClassifier(n_trees=0).fit(
                np.arange(8.0).reshape(4, 2), np.array([0, 1, 0, 1]))

    def test_single_class_rejected(self):
        with pytest.raises(FitError, match="single-class"):
            GradientBoostedClassifier().fit(np.zeros((4, 1)), np.ones(4))

    def test_training_loss_monotone_nonincreasing(self, rng):
        for seed in range(5):
            table, y = simulate_classification(60, 1, 4, separation=1.0, seed=seed)
            model = GradientBoostedClassifier(n_trees=80).fit(table.matrix(), y)
            losses = np.array(model.train_losses_)
            assert np.all(np.diff(losses) <= 1e-12)

    def test_shuffled_labels_near_chance_cv(self, rng):
        # 5-fold CV AUC on label-shuffled data stays in the null band
        table, y = simulate_classification(100, 3, 2, separation=3.0, seed=11)
        x = table.matrix()
        y = rng.permutation(y)
        aucs = []
        fold = np.arange(len(y)) % 5
        for f in range(5):
            tr = fold != f
            model = GradientBoostedClassifier(n_trees=30, max_depth=2).fit(
                x[tr], y[tr])
            aucs.append(auc_score(y[~tr], model.predict_proba(x[~tr])[:, 1]))
        assert 0.40 <= np.mean(aucs) <= 0.60


class TestMetrics:
    def test_perfect(self):
        m = classification_metrics(np.array([0, 1]), np.array([0.1, 0.9]))
        assert m.auc == 1.0 and m.f1 == 1.0

    def test_all_ties(self):
        m = classification_metrics(np.array([0, 1, 0, 1]), np.full(4, 0.5))
        assert m.auc == 0.5

    def test_pair_counting_example(self):
        y = np.array([0, 0, 1, 1])
        s = np.array([0.2, 0.6, 0.4, 0.8])
        assert auc_score(y, s) == pytest.approx(0.75)
        assert auc_score(y, s) == pytest.approx(oracles.pairwise_auc(y, s))

    def test_matches_pairwise_oracle_random(self, rng):
        for _ in range(30):
            y = rng.integers(0, 2, size=20)
            if len(np.unique(y)) < 2:
                continue
            s = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=20)  # force ties
            assert auc_score(y, s) == pytest.approx(
                oracles.pairwise_auc(y, s), abs=1e-12)

    def test_invariant_under_monotone_transform(self, rng):
        y = rng.integers(0, 2, size=50)
        y[:2] = [0, 1]
        s = rng.uniform(size=50)
        assert auc_score(y, s) == pytest.approx(
            auc_score(y, 1 / (1 + np.exp(-5 * s))), abs=1e-12)

    def test_single_class_error(self):
        with pytest.raises(FitError, match="single-class"):
            classification_metrics(np.ones(4), np.full(4, 0.5))
        # threshold metrics still available on request
        out = confusion_metrics(np.ones(4), np.array([0.9, 0.9, 0.1, 0.9]))
        assert out["accuracy"] == 0.75

    def test_f1_zero_division_convention(self):
        assert f1_score(np.array([1, 1]), np.array([0, 0])) == 0.0

    def test_metrics_within_unit_interval(self, rng):
        y = rng.integers(0, 2, size=30)
        y[:2] = [0, 1]
        s = rng.uniform(size=30)
        m = classification_metrics(y, s)
        for v in m.as_dict().values():
            assert 0.0 <= v <= 1.0
