"""In-repo tree learners and classification metrics.

DecisionTreeClassifier drives the per-feature F1 ranking;
GradientBoostedClassifier (plain logistic-loss boosting over regression
trees) is the evaluation model.  Both follow the scikit-learn estimator
protocol (fit/predict/predict_proba, get_params) so they compose with the
wider ecosystem, but the algorithms are implemented here.

Determinism: splits are chosen by greedy impurity with ties broken by
lowest feature index, then lowest threshold, so refitting the same data
always yields the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_array, check_X_y, require_both_classes
from .errors import FitError

LEAF_VALUE_CLIP = 4.0


def _best_split(x_sorted, target_sorted, min_leaf):
    """Best threshold of one pre-sorted feature by SSE reduction.

    For 0/1 targets the per-node SSE is n*p*(1-p), i.e. half the Gini
    impurity, so the split ordering (ties included) is the Gini ordering.
    Returns (score, threshold) or None when no valid split exists; scanning
    ascending with first-minimum keeps the lowest-threshold tie-break.
    """
    n = len(x_sorted)
    cn = np.arange(1.0, n + 1)
    cx = np.cumsum(target_sorted)
    cx2 = np.cumsum(target_sorted ** 2)

    pos = np.arange(1, n)
    valid = x_sorted[1:] != x_sorted[:-1]
    if min_leaf > 1:
        valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    if not valid.any():
        return None
    nl, xl, x2l = cn[:-1], cx[:-1], cx2[:-1]
    nr = n - nl
    sse_l = x2l - xl ** 2 / nl
    sse_r = (cx2[-1] - x2l) - (cx[-1] - xl) ** 2 / nr
    score = np.where(valid, sse_l + sse_r, np.inf)
    k = int(np.argmin(score))
    if not np.isfinite(score[k]):
        return None
    threshold = 0.5 * (x_sorted[k] + x_sorted[k + 1])
    return float(score[k]), float(threshold)


class _Tree:
    """Shared CART engine; classification uses p(y=1) as the target so the
    SSE criterion reproduces Gini-impurity split ordering exactly."""

    def __init__(self, max_depth, min_leaf):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        # flat arrays: feature<0 marks a leaf whose value is in `value`
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, X, target, leaf_fn, depth=0, idx=None):
        idx = np.arange(len(target)) if idx is None else idx
        node = self._new_node()
        self.value[node] = leaf_fn(idx)
        t = target[idx]
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf or np.ptp(t) == 0:
            return node
        best = None
        for f in range(X.shape[1]):
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            found = _best_split(col[order], t[order], self.min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], f, found[1])
        if best is None:
            return node
        _, f, threshold = best
        go_left = X[idx, f] <= threshold
        self.feature[node] = f
        self.threshold[node] = threshold
        self.left[node] = self.build(X, target, leaf_fn, depth + 1, idx[go_left])
        self.right[node] = self.build(X, target, leaf_fn, depth + 1, idx[~go_left])
        return node

    def finalize(self):
        self.feature = np.asarray(self.feature)
        self.threshold = np.asarray(self.threshold)
        self.left = np.asarray(self.left)
        self.right = np.asarray(self.right)
        self.value = np.asarray(self.value)

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(X)]


class DecisionTreeClassifier(BaseEstimator, ClassifierMixin):
    """Greedy Gini-impurity binary decision tree."""

    def __init__(self, max_depth=3, min_leaf=1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        require_both_classes(y)
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        tree = _Tree(self.max_depth, self.min_leaf)
        target = y.astype(np.float64)
        tree.build(X, target, leaf_fn=lambda idx: float(target[idx].mean()))
        tree.finalize()
        self.tree_ = tree
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = check_array(X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        p1 = self.tree_.predict(X)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        # ties at p=0.5 resolve to class 0
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


class GradientBoostedClassifier(BaseEstimator, ClassifierMixin):
    """Logistic-loss gradient boosting over shallow regression trees.

    Leaf values use a single Newton step sum(y-p)/sum(p(1-p)), clipped to
    +/-4 for stability; training loss per round is recorded in
    ``train_losses_``.
    """

    def __init__(self, n_trees=100, max_depth=3, learning_rate=0.1, min_leaf=1):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf

    @staticmethod
    def _log_loss(y, margin):
        # numerically safe log(1 + exp(-yhat*margin)) with yhat in {-1, 1}
        signed = np.where(y == 1, margin, -margin)
        return float(np.logaddexp(0.0, -signed).mean())

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        require_both_classes(y)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        p = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        self.init_ = float(np.log(p / (1 - p)))
        margin = np.full(len(y), self.init_)
        self.trees_ = []
        self.train_losses_ = [self._log_loss(y, margin)]
        yf = y.astype(np.float64)
        for _ in range(self.n_trees):
            prob = 1.0 / (1.0 + np.exp(-margin))
            residual = yf - prob
            hessian = np.maximum(prob * (1.0 - prob), 1e-12)
            tree = _Tree(self.max_depth, self.min_leaf)

            def newton_leaf(idx):
                value = residual[idx].sum() / hessian[idx].sum()
                return float(np.clip(value, -LEAF_VALUE_CLIP, LEAF_VALUE_CLIP))

            tree.build(X, residual, leaf_fn=newton_leaf)
            tree.finalize()
            margin = margin + self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
            self.train_losses_.append(self._log_loss(y, margin))
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_array(X)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        margin = np.full(len(X), self.init_)
        for tree in self.trees_:
            margin = margin + self.learning_rate * tree.predict(X)
        return margin

    def predict_proba(self, X):
        p1 = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# Metrics

@dataclass(frozen=True)
class ClassificationMetrics:
    auc: float
    accuracy: float
    ppv: float
    fpr: float
    f1: float

    def as_dict(self):
        return {"auc": self.auc, "accuracy": self.accuracy, "ppv": self.ppv,
                "fpr": self.fpr, "f1": self.f1}


def auc_score(y, scores) -> float:
    """Mann-Whitney AUC; ties in scores earn half credit."""
    y = require_both_classes(np.asarray(y), "y")
    scores = np.asarray(scores, dtype=np.float64)
    ranks = rankdata(scores)
    n1 = int(y.sum())
    n0 = len(y) - n1
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def f1_score(y, predicted) -> float:
    """F1 of the positive class; empty precision/recall resolve to 0."""
    y = np.asarray(y)
    predicted = np.asarray(predicted)
    tp = int(np.sum((predicted == 1) & (y == 1)))
    fp = int(np.sum((predicted == 1) & (y == 0)))
    fn = int(np.sum((predicted == 0) & (y == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def classification_metrics(y, scores, threshold=0.5) -> ClassificationMetrics:
    """AUC plus confusion-matrix metrics at the given score threshold.

    Raises FitError for single-class y (AUC undefined); use
    ``confusion_metrics`` when only threshold metrics are needed.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if np.any((scores < 0) | (scores > 1)):
        raise ValueError("scores must lie in [0, 1]")
    auc = auc_score(y, scores)
    rest = confusion_metrics(y, scores, threshold)
    return ClassificationMetrics(auc, rest["accuracy"], rest["ppv"],
                                 rest["fpr"], rest["f1"])


def confusion_metrics(y, scores, threshold=0.5) -> dict[str, float]:
    y = np.asarray(y)
    predicted = (np.asarray(scores) > threshold).astype(np.int64)
    tp = int(np.sum((predicted == 1) & (y == 1)))
    fp = int(np.sum((predicted == 1) & (y == 0)))
    tn = int(np.sum((predicted == 0) & (y == 0)))
    fn = int(np.sum((predicted == 0) & (y == 1)))
    accuracy = (tp + tn) / len(y)
    ppv = tp / (tp + fp) if tp + fp else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return {"accuracy": accuracy, "ppv": ppv, "fpr": fpr,
            "f1": f1_score(y, predicted)}
