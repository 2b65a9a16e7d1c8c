"""Prognostic index, good/bad grouping, curve distance and group tests.

The prognostic index is the compound covariate PI = sum_j beta_j * x_j of
the selected features; a median split assigns the low-PI half to the good
(low-risk) group and the high-PI half to the bad group.  Group survival
curves come from the copula-graphic estimator; their separation is the
average vertical difference, tested by label-permutation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import spawn_rng
from .errors import FitError
from .io import FeatureTable
from .resampling import gated_group_test
from .survival import StepSurvivalCurve, cg_curve

GOOD, BAD = "good", "bad"


def compute_pi(coefficients, table: FeatureTable) -> np.ndarray:
    """PI_i = sum_j beta_j * x_ij over the named coefficient map.

    Columns must be scaled the same way they were during fitting.
    """
    missing = [name for name in coefficients if name not in table.features]
    if missing:
        raise ValueError(f"missing feature column(s): {missing}")
    pi = np.zeros(len(table))
    for name, beta in coefficients.items():
        col = table.features[name]
        if np.isnan(col).any():
            raise ValueError(f"feature {name!r} contains missing values")
        pi = pi + float(beta) * col
    return pi


@dataclass(frozen=True)
class PrognosticGrouping:
    patient_ids: list[str]
    pi: np.ndarray
    bad: np.ndarray  # True = bad (high-risk) group
    threshold: float  # lowest bad-group PI

    @property
    def sizes(self):
        nbad = int(self.bad.sum())
        return len(self.bad) - nbad, nbad

    def group_of(self, i):
        return BAD if self.bad[i] else GOOD


def split_by_pi(pi, patient_ids=None) -> PrognosticGrouping:
    """Median split: lower half good, upper half bad; odd row counts put
    the extra patient in the bad group.  Ties at the threshold break by
    patient id so the split is deterministic."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1 or len(pi) < 2:
        raise ValueError("need at least 2 patients")
    if not np.isfinite(pi).all():
        raise ValueError("PI contains non-finite values")
    if np.ptp(pi) == 0:
        raise FitError("degenerate split: all prognostic indices are equal")
    ids = ([str(p) for p in patient_ids] if patient_ids is not None
           else [f"{i:06d}" for i in range(len(pi))])
    if len(ids) != len(pi):
        raise ValueError("patient_ids length does not match pi")
    order = np.lexsort((np.array(ids), pi))
    n_good = len(pi) // 2
    bad = np.zeros(len(pi), dtype=bool)
    bad[order[n_good:]] = True
    return PrognosticGrouping(ids, pi, bad, float(pi[order[n_good]]))


def curve_distance(c1: StepSurvivalCurve, c2: StepSurvivalCurve) -> float:
    """Average vertical difference D = mean |S1(t) - S2(t)| over [0, t_end].

    t_end is the smaller of the two curves' last observed times; the
    integral is evaluated exactly on the merged step partition.
    """
    t_end = min(c1.max_time, c2.max_time)
    if t_end <= 0:
        raise ValueError("curves have no overlapping time span")
    knots = np.concatenate([[0.0], c1.times, c2.times, [t_end]])
    knots = np.unique(knots[knots <= t_end])
    widths = np.diff(knots)
    lefts = knots[:-1]
    gap = np.abs(c1.evaluate(lefts) - c2.evaluate(lefts))
    return float(np.sum(gap * widths) / t_end)


def _group_curves(records, bad_mask, alpha):
    good_records = [r for r, b in zip(records, bad_mask) if not b]
    bad_records = [r for r, b in zip(records, bad_mask) if b]
    return cg_curve(good_records, alpha), cg_curve(bad_records, alpha)


def permutation_pvalue(records, grouping: PrognosticGrouping, alpha, B,
                       seed=0, threads=1) -> float:
    """Permutation p-value of the observed group-curve distance.

    Group labels are shuffled preserving group sizes; p = (1 + #{D_b >=
    D_obs}) / (B + 1).  Replicates use counter-based seeds so the result
    does not depend on execution order.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if len(records) != len(grouping.bad):
        raise ValueError("records do not align with the grouping")
    if grouping.bad.all() or not grouping.bad.any():
        raise ValueError("both groups must be non-empty")
    c_good, c_bad = _group_curves(records, grouping.bad, alpha)
    d_obs = curve_distance(c_good, c_bad)

    def one(b):
        rng = spawn_rng(seed, b)
        shuffled = grouping.bad[rng.permutation(len(records))]
        cg, cb = _group_curves(records, shuffled, alpha)
        return curve_distance(cg, cb)

    if threads <= 1:
        d_null = [one(b) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            d_null = list(pool.map(one, range(B)))
    exceed = sum(1 for d in d_null if d >= d_obs)
    return (1 + exceed) / (B + 1)


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    std: float
    stderr: float
    median: float
    range_min: float
    range_max: float


@dataclass(frozen=True)
class GroupComparison:
    groups: dict[str, GroupStats]
    test: str
    p_value: float
    small_group: bool


def group_comparison(values, groups) -> GroupComparison:
    """Descriptive statistics per group plus the normality-gated test."""
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups)
    if values.shape != groups.shape:
        raise ValueError("values and groups must have the same length")
    levels = sorted(set(groups.tolist()), key=str)
    if len(levels) != 2:
        raise ValueError(f"need exactly 2 group levels, got {levels}")
    stats_by_level = {}
    arrays = []
    for level in levels:
        v = values[groups == level]
        arrays.append(v)
        std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        stats_by_level[str(level)] = GroupStats(
            n=len(v), mean=float(v.mean()), std=std,
            stderr=std / np.sqrt(len(v)), median=float(np.median(v)),
            range_min=float(v.min()), range_max=float(v.max()))
    p, test, small = gated_group_test(arrays[0], arrays[1])
    return GroupComparison(stats_by_level, test, p, small)


@dataclass(frozen=True)
class CrossTab:
    """REP status x prognostic group counts with row percentages."""

    counts: np.ndarray  # rows: rep 0/1; cols: good, bad
    row_percent: np.ndarray  # NaN for empty rows

    def percent(self, rep, group):
        return float(self.row_percent[rep, 0 if group == GOOD else 1])


def cross_tab(grouping: PrognosticGrouping, rep_labels) -> CrossTab:
    rep = np.asarray(rep_labels)
    if rep.shape != grouping.bad.shape:
        raise ValueError("rep_labels do not align with the grouping")
    if not np.isin(rep, (0, 1)).all():
        raise ValueError("rep_labels must be 0/1")
    counts = np.zeros((2, 2), dtype=np.int64)
    for r in (0, 1):
        sel = rep == r
        counts[r, 0] = int((sel & ~grouping.bad).sum())
        counts[r, 1] = int((sel & grouping.bad).sum())
    totals = counts.sum(axis=1, keepdims=True).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = 100.0 * counts / totals
    return CrossTab(counts, pct)
