"""Survival estimation under independent and dependent censoring.

Implements the Clayton copula, the copula-graphic survival estimator (a
Kaplan-Meier generalization that is exactly Kaplan-Meier at independence),
univariate Cox partial-likelihood fits, the semiparametric dependent-Cox
maximum-likelihood estimator at a fixed dependence level, Harrell's
concordance index, cross-validated dependence selection and the
significance screen over a feature table.

Conventions
-----------
* Ties are broken before estimation by adding deterministic rank-scaled
  epsilons (1e-9 per tie rank) so observed times are unique.
* The copula-graphic curve drops to 0 at a final event (the at-risk count
  reaches 1), matching Kaplan-Meier behavior in the independence limit.
* Dependence alpha >= 0; Kendall's tau is alpha / (alpha + 2).
* Feature-table fits min-max scale every column to [0, 1] first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.stats import norm

from ._validation import spawn_rng
from .errors import DataFormatError, FitError
from .io import FeatureTable

TIE_EPS = 1e-9
_LOGW_SWITCH = 30.0  # above this, e^a + e^b - 1 == e^a + e^b to machine precision


@dataclass(frozen=True)
class SurvivalRecord:
    """One observed (time, event) pair; event=1 is a death, 0 censoring."""

    patient_id: str
    time: float
    event: int

    def __post_init__(self):
        if self.time <= 0:
            raise ValueError(f"time must be positive, got {self.time}")
        if self.event not in (0, 1):
            raise ValueError(f"event must be 0/1, got {self.event}")


def jitter_ties(times, eps=TIE_EPS):
    """Make times unique by adding eps * (rank within each tie group)."""
    times = np.asarray(times, dtype=np.float64).copy()
    order = np.argsort(times, kind="stable")
    sorted_t = times[order]
    rank_in_group = np.zeros(len(times))
    for i in range(1, len(times)):
        if sorted_t[i] == sorted_t[i - 1]:
            rank_in_group[i] = rank_in_group[i - 1] + 1
    times[order] += eps * rank_in_group
    return times


def _unpack(records):
    if len(records) == 0:
        raise ValueError("no survival records")
    t = jitter_ties([r.time for r in records])
    d = np.array([r.event for r in records], dtype=np.int64)
    return t, d


@dataclass(frozen=True)
class StepSurvivalCurve:
    """Right-continuous non-increasing step estimate of S(t).

    One row per observed time: the survival value just after that time,
    the at-risk count at it, and whether it is a censoring mark.  S = 1
    before the first observed time.
    """

    times: np.ndarray
    survival: np.ndarray
    n_at_risk: np.ndarray
    is_censor_mark: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        surv = np.asarray(self.survival, dtype=np.float64)
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted ascending")
        if np.any((surv < 0) | (surv > 1)) or np.any(np.diff(surv) > 1e-12):
            raise ValueError("survival values must be non-increasing within [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "survival", surv)
        object.__setattr__(self, "n_at_risk",
                           np.asarray(self.n_at_risk, dtype=np.int64))
        object.__setattr__(self, "is_censor_mark",
                           np.asarray(self.is_censor_mark, dtype=bool))

    @property
    def max_time(self):
        return float(self.times[-1])

    @property
    def censor_times(self):
        return self.times[self.is_censor_mark]

    def evaluate(self, at):
        """S(t) for scalar or array t (1 before the first observed time)."""
        at = np.asarray(at, dtype=np.float64)
        idx = np.searchsorted(self.times, at, side="right") - 1
        padded = np.concatenate([[1.0], self.survival])
        return padded[idx + 1]


def tau_of_alpha(alpha) -> float:
    """Kendall's tau of the Clayton copula: alpha / (alpha + 2)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return float(alpha / (alpha + 2.0))


def clayton(u, v, alpha):
    """Clayton copula C(u, v) on (0, 1]^2; alpha = 0 is the product copula."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any((u <= 0) | (u > 1)) or np.any((v <= 0) | (v > 1)):
        raise ValueError("copula arguments must lie in (0, 1]")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        out = u * v
    else:
        out = (u ** -alpha + v ** -alpha - 1.0) ** (-1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def kaplan_meier(records) -> StepSurvivalCurve:
    """Product-limit estimator (the alpha = 0 copula-graphic curve)."""
    t, d = _unpack(records)
    order = np.argsort(t)
    t, d = t[order], d[order]
    n = len(t)
    n_at_risk = n - np.arange(n)
    factors = np.where(d == 1, 1.0 - 1.0 / n_at_risk, 1.0)
    survival = np.cumprod(factors)
    return StepSurvivalCurve(t, survival, n_at_risk, d == 0)


def cg_curve(records, alpha) -> StepSurvivalCurve:
    """Copula-graphic survival estimator under a Clayton copula.

    S(t) = [1 + sum_{t_i <= t, event} ((n_i-1)/n)^-a - (n_i/n)^-a]^(-1/a);
    evaluated through expm1/log1p so that tiny alpha agrees with
    Kaplan-Meier to machine precision.  A final event (n_i = 1) sends the
    curve to 0.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        return kaplan_meier(records)
    t, d = _unpack(records)
    order = np.argsort(t)
    t, d = t[order], d[order]
    n = len(t)
    n_at_risk = n - np.arange(n)
    terms = np.zeros(n)
    ev = d == 1
    safe = ev & (n_at_risk > 1)
    ni = n_at_risk[safe].astype(np.float64)
    # ((n_i-1)/n)^-a - (n_i/n)^-a, written for precision at small alpha
    terms[safe] = (ni / n) ** (-alpha) * np.expm1(-alpha * np.log((ni - 1.0) / ni))
    cum = np.cumsum(terms)
    survival = np.exp(-np.log1p(cum) / alpha)
    last_event = ev & (n_at_risk == 1)
    if last_event.any():
        survival[np.argmax(last_event):] = 0.0
    survival = np.minimum.accumulate(np.clip(survival, 0.0, 1.0))
    return StepSurvivalCurve(t, survival, n_at_risk, d == 0)


def write_curve_csv(curve: StepSurvivalCurve, path):
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "survival", "n_at_risk", "is_censor_mark"])
        for i in range(len(curve.times)):
            writer.writerow([repr(float(curve.times[i])),
                             repr(float(curve.survival[i])),
                             int(curve.n_at_risk[i]),
                             int(curve.is_censor_mark[i])])
    return path


def load_curve_csv(path) -> StepSurvivalCurve:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time", "survival", "n_at_risk", "is_censor_mark"]:
            raise DataFormatError(f"{path}: unexpected curve.csv header {header}")
        rows = [(float(a), float(b), int(c), int(e)) for a, b, c, e in reader]
    if not rows:
        raise DataFormatError(f"{path}: empty curve")
    cols = list(zip(*rows))
    return StepSurvivalCurve(np.array(cols[0]), np.array(cols[1]),
                             np.array(cols[2]), np.array(cols[3], dtype=bool))


# ---------------------------------------------------------------------------
# Cox partial likelihood

@dataclass(frozen=True)
class CoxEstimate:
    beta: float
    se: float
    wald_p: float
    converged: bool
    n_iter: int
    loglik: float


def _cox_quantities(beta, x, event_pos, rev_order):
    """Breslow log partial likelihood, score and information."""
    ex = np.exp(beta * x)
    a0 = np.cumsum(ex[rev_order])[::-1]
    a1 = np.cumsum((x * ex)[rev_order])[::-1]
    a2 = np.cumsum((x * x * ex)[rev_order])[::-1]
    a0e, a1e, a2e = a0[event_pos], a1[event_pos], a2[event_pos]
    loglik = float(np.sum(beta * x[event_pos] - np.log(a0e)))
    score = float(np.sum(x[event_pos] - a1e / a0e))
    info = float(np.sum(a2e / a0e - (a1e / a0e) ** 2))
    return loglik, score, info


def cox_univariate(records, x, tol=1e-8, max_iter=100) -> CoxEstimate:
    """Newton-Raphson maximizer of the Breslow partial likelihood."""
    t, d = _unpack(records)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != t.shape:
        raise ValueError(f"x has length {x.shape}, expected {t.shape}")
    if not np.isfinite(x).all():
        raise ValueError("x contains non-finite values")
    if d.sum() < 2:
        raise FitError("need at least 2 events for a Cox fit")
    if np.ptp(x) == 0:
        raise FitError("covariate is constant")
    order = np.argsort(t)
    x_sorted = x[order]
    center = x_sorted.mean()
    xs = x_sorted - center  # beta is invariant to centering
    event_pos = np.flatnonzero(d[order] == 1)
    rev = np.arange(len(t))[::-1]

    beta = 0.0
    loglik, score, info = _cox_quantities(beta, xs, event_pos, rev)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if abs(score) < tol:
            converged = True
            break
        step = score / max(info, 1e-12)
        new_beta = beta + step
        new_ll, new_score, new_info = _cox_quantities(new_beta, xs, event_pos, rev)
        halvings = 0
        while new_ll < loglik and halvings < 30:
            step /= 2.0
            new_beta = beta + step
            new_ll, new_score, new_info = _cox_quantities(new_beta, xs, event_pos, rev)
            halvings += 1
        beta, loglik, score, info = new_beta, new_ll, new_score, new_info
    else:
        converged = abs(score) < tol
    se = 1.0 / np.sqrt(info) if info > 0 else np.inf
    wald_p = float(2.0 * norm.sf(abs(beta) / se)) if np.isfinite(se) else 1.0
    wald_p = min(max(wald_p, np.finfo(float).tiny), 1.0)
    return CoxEstimate(float(beta), float(se), wald_p, converged, it, loglik)


def breslow_baseline(records, x, beta):
    """Breslow cumulative-hazard jumps at event times given a coefficient."""
    t, d = _unpack(records)
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(t)
    t, d, x = t[order], d[order], x[order]
    ex = np.exp(beta * (x - x.mean()))
    a0 = np.cumsum(ex[::-1])[::-1] * np.exp(beta * x.mean())
    event_pos = np.flatnonzero(d == 1)
    return t[event_pos], 1.0 / a0[event_pos]


# ---------------------------------------------------------------------------
# Dependent-Cox semiparametric MLE

@dataclass(frozen=True)
class DependentCoxEstimate:
    alpha: float
    beta: float
    gamma: float
    se: float
    wald_p: float
    lambda0_times: np.ndarray
    lambda0: np.ndarray  # cumulative baseline hazard of T after each time
    gamma0_times: np.ndarray
    gamma0: np.ndarray
    loglik: float
    converged: bool
    n_iter: int


class _DependentCoxProblem:
    """Negative log-likelihood of the Clayton dependent-Cox model.

    Parameters are (beta, gamma, log event jumps, log censor jumps); both
    marginals are Cox models with step baselines jumping at their own
    observed times.  The i-th contribution is the appropriate partial
    derivative of C_alpha(S_T, S_U): density-in-T for an event,
    density-in-U for a censoring.
    """

    def __init__(self, t, d, x, alpha):
        order = np.argsort(t)
        self.t = t[order]
        self.d = d[order]
        self.x = x[order]
        self.alpha = float(alpha)
        self.event_pos = np.flatnonzero(self.d == 1)
        self.censor_pos = np.flatnonzero(self.d == 0)
        self.n = len(t)
        self.n_events = len(self.event_pos)
        self.n_censor = len(self.censor_pos)

    def split(self, theta):
        beta, gamma = theta[0], theta[1]
        log_jl = theta[2: 2 + self.n_events]
        log_jg = theta[2 + self.n_events:]
        return beta, gamma, log_jl, log_jg

    def cumhaz(self, log_jl, log_jg):
        jl = np.zeros(self.n)
        jl[self.event_pos] = np.exp(log_jl)
        jg = np.zeros(self.n)
        jg[self.censor_pos] = np.exp(log_jg)
        return np.cumsum(jl), np.cumsum(jg), jl, jg

    @staticmethod
    def _revcumsum(v):
        return np.cumsum(v[::-1])[::-1]

    def negloglik_grad(self, theta):
        beta, gamma, log_jl, log_jg = self.split(theta)
        lam, gam, jl, jg = self.cumhaz(log_jl, log_jg)
        ebx = np.exp(beta * self.x)
        egx = np.exp(gamma * self.x)
        lam_i = lam * ebx
        gam_i = gam * egx
        alpha = self.alpha

        if alpha == 0.0:
            loglik = (np.sum(log_jl) + beta * self.x[self.event_pos].sum()
                      + np.sum(log_jg) + gamma * self.x[self.censor_pos].sum()
                      - np.sum(lam_i + gam_i))
            grad = np.empty_like(theta)
            grad[0] = self.x[self.event_pos].sum() - np.sum(lam_i * self.x)
            grad[1] = self.x[self.censor_pos].sum() - np.sum(gam_i * self.x)
            rl = self._revcumsum(ebx)
            rg = self._revcumsum(egx)
            grad[2: 2 + self.n_events] = 1.0 - jl[self.event_pos] * rl[self.event_pos]
            grad[2 + self.n_events:] = 1.0 - jg[self.censor_pos] * rg[self.censor_pos]
            return -loglik, -grad

        a = alpha * lam_i
        b = alpha * gam_i
        m = np.maximum(a, b)
        big = m > _LOGW_SWITCH
        logw = np.empty(self.n)
        logw[big] = np.logaddexp(a[big], b[big])
        small = ~big
        logw[small] = np.log1p(np.expm1(a[small]) + np.expm1(b[small]))
        c = 1.0 + 1.0 / alpha
        loglik = (np.sum(log_jl) + beta * self.x[self.event_pos].sum()
                  + a[self.event_pos].sum()
                  + np.sum(log_jg) + gamma * self.x[self.censor_pos].sum()
                  + b[self.censor_pos].sum()
                  - c * logw.sum())
        # d loglik / da_i and / db_i
        ga = np.where(self.d == 1, 1.0, 0.0) - c * np.exp(a - logw)
        gb = np.where(self.d == 0, 1.0, 0.0) - c * np.exp(b - logw)
        grad = np.empty_like(theta)
        grad[0] = self.x[self.event_pos].sum() + np.sum(ga * a * self.x)
        grad[1] = self.x[self.censor_pos].sum() + np.sum(gb * b * self.x)
        rl = self._revcumsum(ga * alpha * ebx)
        rg = self._revcumsum(gb * alpha * egx)
        grad[2: 2 + self.n_events] = 1.0 + jl[self.event_pos] * rl[self.event_pos]
        grad[2 + self.n_events:] = 1.0 + jg[self.censor_pos] * rg[self.censor_pos]
        return -loglik, -grad

    def warm_theta(self, records_sorted, beta0=None, gamma0=None):
        """Independence-fit starting point: Cox coefficients for each margin
        with the matching Breslow baseline jumps."""
        if beta0 is None:
            try:
                beta0 = cox_univariate(records_sorted, self.x).beta
            except FitError:
                beta0 = 0.0
        if gamma0 is None:
            flipped = [SurvivalRecord(r.patient_id, r.time, 1 - r.event)
                       for r in records_sorted]
            try:
                gamma0 = cox_univariate(flipped, self.x).beta
            except FitError:
                gamma0 = 0.0
        rl = self._revcumsum(np.exp(beta0 * self.x))
        rg = self._revcumsum(np.exp(gamma0 * self.x))
        theta = np.empty(2 + self.n_events + self.n_censor)
        theta[0], theta[1] = beta0, gamma0
        theta[2: 2 + self.n_events] = -np.log(rl[self.event_pos])
        theta[2 + self.n_events:] = -np.log(rg[self.censor_pos])
        return theta


def dependent_cox(records, x, alpha, compute_se=True,
                  multi_start=False) -> DependentCoxEstimate:
    """Semiparametric MLE of the Clayton dependent-Cox model at fixed alpha.

    Joint quasi-Newton (L-BFGS with analytic gradients) over the regression
    coefficients and the log jump sizes of both baseline cumulative
    hazards, warm-started from the independence fits.  With
    ``multi_start`` the (beta, gamma) grid {0, +/-0.5}^2 is tried as well
    and the best likelihood kept.  At alpha = 0 the estimate reduces to the
    univariate Cox fit.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    t, d = _unpack(records)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != t.shape:
        raise ValueError(f"x has length {x.shape}, expected {t.shape}")
    if d.sum() < 2 or (1 - d).sum() < 2:
        raise FitError("need at least 2 events and 2 censorings")
    if np.ptp(x) == 0:
        raise FitError("covariate is constant")

    order = np.argsort(t)
    records_sorted = [records[i] for i in order]
    problem = _DependentCoxProblem(t, d, x, alpha)

    starts = [problem.warm_theta(records_sorted)]
    if multi_start:
        for b0 in (0.0, 0.5, -0.5):
            for g0 in (0.0, 0.5, -0.5):
                starts.append(problem.warm_theta(records_sorted, b0, g0))

    best = None
    for theta0 in starts:
        res = optimize.minimize(problem.negloglik_grad, theta0, jac=True,
                                method="L-BFGS-B",
                                options={"maxiter": 200, "maxcor": 25,
                                         "ftol": 1e-14, "gtol": 1e-6})
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    grad_inf = float(np.abs(best.jac).max())
    converged = grad_inf < 1e-5
    beta, gamma, log_jl, log_jg = problem.split(theta)
    lam, gam, jl, jg = problem.cumhaz(log_jl, log_jg)

    se = np.nan
    wald_p = np.nan
    if compute_se:
        se = _wald_se(problem, theta)
        if np.isfinite(se) and se > 0:
            wald_p = float(2.0 * norm.sf(abs(beta) / se))
            wald_p = min(max(wald_p, np.finfo(float).tiny), 1.0)
        else:
            converged = False
    return DependentCoxEstimate(
        alpha=float(alpha), beta=float(beta), gamma=float(gamma), se=float(se),
        wald_p=float(wald_p),
        lambda0_times=problem.t[problem.event_pos].copy(),
        lambda0=lam[problem.event_pos].copy(),
        gamma0_times=problem.t[problem.censor_pos].copy(),
        gamma0=gam[problem.censor_pos].copy(),
        loglik=-float(best.fun), converged=bool(converged), n_iter=int(best.nit))


def _wald_se(problem, theta, h=1e-5):
    """Model-based SE of beta: central-difference observed information over
    all parameters, inverted; sqrt of the (beta, beta) entry."""
    k = len(theta)
    hess = np.empty((k, k))
    for j in range(k):
        step = h * max(1.0, abs(theta[j]))
        up = theta.copy()
        up[j] += step
        dn = theta.copy()
        dn[j] -= step
        _, gu = problem.negloglik_grad(up)
        _, gd = problem.negloglik_grad(dn)
        hess[:, j] = (gu - gd) / (2.0 * step)
    hess = 0.5 * (hess + hess.T)
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return np.nan
    var = cov[0, 0]
    return float(np.sqrt(var)) if var > 0 else np.nan


# ---------------------------------------------------------------------------
# Concordance

def harrell_c(risk, records) -> float:
    """Harrell's c: over pairs whose shorter time is an event, the fraction
    where the shorter time has the higher risk (risk ties earn 1/2)."""
    risk = np.asarray(risk, dtype=np.float64)
    t, d = _unpack(records)
    if risk.shape != t.shape:
        raise ValueError(f"risk has length {risk.shape}, expected {t.shape}")
    earlier = (t[:, None] < t[None, :]) & (d[:, None] == 1)
    n_usable = int(earlier.sum())
    if n_usable == 0:
        raise FitError("no usable pairs for the concordance index")
    higher = risk[:, None] > risk[None, :]
    tied = risk[:, None] == risk[None, :]
    concordant = float((earlier & higher).sum())
    ties = float((earlier & tied).sum())
    return (concordant + 0.5 * ties) / n_usable


# ---------------------------------------------------------------------------
# Dependence selection and feature screening

@dataclass(frozen=True)
class AlphaSelection:
    grid: tuple[float, ...]
    cv_cindex: np.ndarray
    alpha_hat: float
    tau_hat: float


@dataclass(frozen=True)
class FeatureEffect:
    name: str
    coefficient: float
    p_value: float


def _event_stratified_folds(d, n_folds, rng):
    """Fold labels preserving the event/censoring mix per fold."""
    fold = np.empty(len(d), dtype=np.int64)
    start = 0
    for cls in (0, 1):
        idx = np.flatnonzero(d == cls)
        idx = rng.permutation(idx)
        fold[idx] = (np.arange(len(idx)) + start) % n_folds
        start += len(idx)
    return fold


def _aligned_records(records, table):
    by_id = {r.patient_id: r for r in records}
    missing = [p for p in table.patient_ids if p not in by_id]
    if missing:
        raise ValueError(f"records missing for patients {missing[:5]}")
    return [by_id[p] for p in table.patient_ids]


def select_alpha(records, table: FeatureTable, candidates, grid,
                 folds=5, seed=0) -> AlphaSelection:
    """Pick the dependence level maximizing the cross-validated c-index.

    Per alpha and fold: fit dependent_cox per candidate on the training
    records, score test patients by the compound risk sum_j beta_j x_j,
    pool test scores over folds and compute Harrell's c against the pooled
    records.  Ties resolve to the smallest alpha.
    """
    grid = tuple(float(a) for a in grid)
    if not grid:
        raise ValueError("alpha grid is empty")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate features")
    records = _aligned_records(records, table)
    x_all = table.scaled_matrix(candidates)
    if np.isnan(x_all).any():
        raise ValueError("candidate features contain missing values")
    d = np.array([r.event for r in records])
    rng = spawn_rng(seed, 0)
    fold_of = _event_stratified_folds(d, folds, rng)

    pooled_risk = {a: np.empty(len(records)) for a in grid}
    for f in range(folds):
        train = np.flatnonzero(fold_of != f)
        test = np.flatnonzero(fold_of == f)
        train_records = [records[i] for i in train]
        if sum(r.event for r in train_records) < 2:
            raise FitError(f"fold {f} leaves fewer than 2 training events")
        for a in grid:
            coefs = np.array([
                dependent_cox(train_records, x_all[train, j], a,
                              compute_se=False).beta
                for j in range(len(candidates))])
            pooled_risk[a][test] = x_all[test] @ coefs
    cindex = np.array([harrell_c(pooled_risk[a], records) for a in grid])
    best = int(np.argmax(cindex))
    return AlphaSelection(grid, cindex, grid[best], tau_of_alpha(grid[best]))


def select_features_dependent(records, table: FeatureTable, alpha,
                              p_threshold=0.05,
                              candidates=None) -> list[FeatureEffect]:
    """Per-feature dependent-Cox screen: keep Wald p < p_threshold, sorted
    ascending by p-value."""
    candidates = list(candidates) if candidates is not None else table.feature_names
    records = _aligned_records(records, table)
    x_all = table.scaled_matrix(candidates)
    if np.isnan(x_all).any():
        raise ValueError("candidate features contain missing values")
    kept = []
    for j, name in enumerate(candidates):
        est = dependent_cox(records, x_all[:, j], alpha)
        if np.isfinite(est.wald_p) and est.wald_p < p_threshold:
            kept.append(FeatureEffect(name, est.beta, est.wald_p))
    kept.sort(key=lambda e: (e.p_value, e.name))
    return kept
