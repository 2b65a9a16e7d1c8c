"""Nested resampling: per-feature F1 ranking and k-fold model evaluation.

Both algorithms repeat a class-balanced subsample (all minority rows plus
m majority rows drawn without replacement) over many iterations; within
each iteration a stratified n-fold split scores either every feature with
a single-feature decision tree (ranking) or the selected feature set with
the boosted ensemble (evaluation).

Per-iteration RNG streams are derived counter-style from (master seed,
iteration index), so iterations are order-independent, parallelizable and
reproducible: the full output is a pure function of (data, plan).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._validation import require_both_classes, spawn_rng
from .errors import FitError
from .io import FeatureTable
from .learners import (DecisionTreeClassifier, GradientBoostedClassifier,
                       classification_metrics, f1_score)

METRIC_NAMES = ("auc", "accuracy", "ppv", "fpr", "f1")


@dataclass
class ResamplingPlan:
    """Iterations, folds, the majority-subsample rule and the master seed."""

    iterations: int = 1000
    folds: int = 5
    majority_size: int | None = None  # None: min(majority, ceil(1.5 * minority))
    seed: int = 0
    tree_depth: int = 1
    tree_min_leaf: int = 1
    n_trees: int = 100
    boost_depth: int = 3
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.majority_size is not None and self.majority_size < self.folds:
            raise ValueError("majority_size must be >= folds")


@dataclass
class RankingReport:
    """Mean F1 per feature over all iterations x folds, plus raw histories."""

    feature_names: list[str]
    mean_f1: np.ndarray
    histories: np.ndarray  # (n_features, iterations * folds)
    threshold: float | None = None

    def ranked(self):
        order = np.lexsort((np.array(self.feature_names), -self.mean_f1))
        return [(self.feature_names[i], float(self.mean_f1[i])) for i in order]


@dataclass
class MetricDistribution:
    """Raw per-(iteration, fold) metric values with their summaries."""

    values: dict[str, np.ndarray] = field(default_factory=dict)

    def mean(self, metric):
        return float(self.values[metric].mean())

    def std(self, metric):
        return float(self.values[metric].std(ddof=1))

    def summary(self):
        return {m: (self.mean(m), self.std(m)) for m in self.values}


def _class_split(y):
    ones = np.flatnonzero(y == 1)
    zeros = np.flatnonzero(y == 0)
    if len(ones) <= len(zeros):
        return ones, zeros  # minority, majority
    return zeros, ones


def _majority_size(plan, n_minority, n_majority):
    m = plan.majority_size
    if m is None:
        m = min(n_majority, int(np.ceil(1.5 * n_minority)))
    if m > n_majority:
        raise FitError(f"majority_size {m} exceeds majority count {n_majority}")
    return m


def balanced_subsample(y, plan: ResamplingPlan, rng):
    """All minority rows plus m majority rows without replacement."""
    minority, majority = _class_split(y)
    m = _majority_size(plan, len(minority), len(majority))
    picked = rng.choice(majority, size=m, replace=False)
    return np.concatenate([minority, picked])


def stratified_folds(y, n_folds, rng):
    """Fold labels preserving class proportions (round-robin after shuffle)."""
    fold = np.empty(len(y), dtype=np.int64)
    start = 0
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        fold[idx] = (np.arange(len(idx)) + start) % n_folds
        start += len(idx)
    return fold


def _stump_batch_f1(x_train, y_train, x_test, y_test, min_leaf=1):
    """F1 of a depth-1 single-feature tree for every column at once.

    Exactly reproduces DecisionTreeClassifier(max_depth=1): SSE split
    criterion (= Gini ordering for 0/1 targets), first-minimum threshold
    tie-break, prediction ties at p=0.5 resolve to class 0.
    """
    n, k = x_train.shape
    order = np.argsort(x_train, axis=0, kind="stable")
    xs = np.take_along_axis(x_train, order, axis=0)
    ys = y_train[order].astype(np.float64)
    cy = np.cumsum(ys, axis=0)
    total1 = cy[-1]

    nl = np.arange(1, n, dtype=np.float64)[:, None]
    yl = cy[:-1]
    nr = n - nl
    yr = total1 - yl
    sse = (yl - yl ** 2 / nl) + (yr - yr ** 2 / nr)
    valid = xs[1:] != xs[:-1]
    if min_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    score = np.where(valid, sse, np.inf)
    best = np.argmin(score, axis=0)
    cols = np.arange(k)
    has_split = np.isfinite(score[best, cols])

    root_class = y_train.mean() > 0.5
    thr = 0.5 * (xs[best, cols] + xs[best + 1, cols])
    left_class = yl[best, cols] / nl[best, 0] > 0.5
    right_class = yr[best, cols] / nr[best, 0] > 0.5

    pred = np.where(x_test <= thr[None, :], left_class[None, :], right_class[None, :])
    pred = np.where(has_split[None, :], pred, root_class)
    y_te = y_test[:, None].astype(bool)
    tp = np.sum(pred & y_te, axis=0)
    fp = np.sum(pred & ~y_te, axis=0)
    fn = np.sum(~pred & y_te, axis=0)
    denom = 2 * tp + fp + fn
    out = np.zeros(k)
    nz = denom > 0
    out[nz] = 2 * tp[nz] / denom[nz]
    return out


def _per_feature_f1(x_train, y_train, x_test, y_test, plan):
    if plan.tree_depth == 1:
        return _stump_batch_f1(x_train, y_train, x_test, y_test, plan.tree_min_leaf)
    out = np.empty(x_train.shape[1])
    for j in range(x_train.shape[1]):
        tree = DecisionTreeClassifier(plan.tree_depth, plan.tree_min_leaf)
        tree.fit(x_train[:, [j]], y_train)
        out[j] = f1_score(y_test, tree.predict(x_test[:, [j]]))
    return out


def _map_iterations(fn, iterations, threads):
    if threads <= 1:
        return [fn(i) for i in range(iterations)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(iterations)))


def _feature_matrix(table, labels):
    y = require_both_classes(np.asarray(labels), "labels")
    if len(y) != len(table):
        raise ValueError(f"labels length {len(y)} != table rows {len(table)}")
    x = table.matrix()
    if np.isnan(x).any():
        bad = [n for n in table.feature_names if np.isnan(table.features[n]).any()]
        raise ValueError(f"features contain missing values: {bad[:5]}")
    return x, y


def rank_features(table: FeatureTable, labels, plan: ResamplingPlan,
                  threads=1) -> RankingReport:
    """Mean per-feature F1 of single-feature trees over i x n evaluations."""
    x, y = _feature_matrix(table, labels)
    k = x.shape[1]
    if k == 0:
        raise ValueError("table has no feature columns")
    minority, _ = _class_split(y)
    if len(minority) < plan.folds:
        raise FitError(f"minority class has {len(minority)} rows; "
                       f"needs >= folds ({plan.folds})")

    def one_iteration(it):
        rng = spawn_rng(plan.seed, it)
        idx = balanced_subsample(y, plan, rng)
        xs, ys = x[idx], y[idx]
        fold_of = stratified_folds(ys, plan.folds, rng)
        out = np.empty((plan.folds, k))
        for f in range(plan.folds):
            tr = fold_of != f
            out[f] = _per_feature_f1(xs[tr], ys[tr], xs[~tr], ys[~tr], plan)
        return out

    blocks = _map_iterations(one_iteration, plan.iterations, threads)
    histories = np.concatenate(blocks, axis=0).T  # (k, iterations * folds)
    return RankingReport(table.feature_names, histories.mean(axis=1), histories)


def threshold_select(report: RankingReport, threshold=0.6, strict=False):
    """Features whose mean F1 passes the threshold, best first.

    The REP path is inclusive (>= 0.6); the survival path is strict
    (> 0.7).
    """
    report.threshold = threshold
    keep = []
    for name, score in report.ranked():
        if (score > threshold) if strict else (score >= threshold):
            keep.append(name)
    return keep


# ---------------------------------------------------------------------------
# Normality-gated two-group test

@dataclass(frozen=True)
class SignificanceResult:
    name: str
    p_value: float
    test: str
    small_group: bool  # normality test skipped: a group had < 3 values


def gated_group_test(a, b, normality_p=0.05):
    """Shapiro-gated test: ANOVA when both groups look normal, else
    Wilcoxon-Mann-Whitney.  Returns (p, test_name, small_group_flag)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.ptp(np.concatenate([a, b])) == 0:
        return 1.0, "degenerate", False
    small = len(a) < 3 or len(b) < 3
    normal = False
    if not small:
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            normal = False  # constant group: not normal
        else:
            normal = (stats.shapiro(a).pvalue >= normality_p
                      and stats.shapiro(b).pvalue >= normality_p)
    if normal:
        return float(stats.f_oneway(a, b).pvalue), "anova", small
    p = float(stats.mannwhitneyu(a, b, alternative="two-sided").pvalue)
    return min(p, 1.0), "wilcoxon", small


def significance_filter(table: FeatureTable, labels, candidates,
                        p_threshold=0.05) -> list[SignificanceResult]:
    """Second-step screen: keep candidates whose gated two-group test gives
    p < p_threshold, sorted ascending by p."""
    y = require_both_classes(np.asarray(labels), "labels")
    missing = [c for c in candidates if c not in table.features]
    if missing:
        raise ValueError(f"candidates not in table: {missing}")
    kept = []
    for name in candidates:
        v = table.features[name]
        if np.isnan(v).any():
            raise ValueError(f"feature {name!r} contains missing values")
        p, test, small = gated_group_test(v[y == 0], v[y == 1])
        if p < p_threshold:
            kept.append(SignificanceResult(name, p, test, small))
    kept.sort(key=lambda r: (r.p_value, r.name))
    return kept


# ---------------------------------------------------------------------------
# Model evaluation

def evaluate_model(table: FeatureTable, labels, selected,
                   plan: ResamplingPlan, threads=1) -> MetricDistribution:
    """Boosted-ensemble metrics over i iterations of balanced n-fold CV."""
    selected = list(selected)
    if not selected:
        raise ValueError("no features selected")
    x, y = _feature_matrix(table, labels)
    cols = [table.feature_names.index(s) for s in selected]
    x = x[:, cols]
    minority, _ = _class_split(y)
    if len(minority) < plan.folds:
        raise FitError(f"minority class has {len(minority)} rows; "
                       f"needs >= folds ({plan.folds})")

    def one_iteration(it):
        rng = spawn_rng(plan.seed, it)
        idx = balanced_subsample(y, plan, rng)
        xs, ys = x[idx], y[idx]
        fold_of = stratified_folds(ys, plan.folds, rng)
        out = np.empty((plan.folds, len(METRIC_NAMES)))
        for f in range(plan.folds):
            tr = fold_of != f
            model = GradientBoostedClassifier(plan.n_trees, plan.boost_depth,
                                              plan.learning_rate)
            model.fit(xs[tr], ys[tr])
            scores = model.predict_proba(xs[~tr])[:, 1]
            m = classification_metrics(ys[~tr], scores)
            out[f] = [m.auc, m.accuracy, m.ppv, m.fpr, m.f1]
        return out

    blocks = _map_iterations(one_iteration, plan.iterations, threads)
    flat = np.concatenate(blocks, axis=0)
    return MetricDistribution({name: flat[:, j].copy()
                               for j, name in enumerate(METRIC_NAMES)})
