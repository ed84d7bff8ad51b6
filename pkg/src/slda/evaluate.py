"""Misclassification-rate computation: closed-form conditional rates
against normal populations, Monte Carlo rates for t and multi-class
populations, empirical test rates, and leave-one-out cross-validation
with grid search over the threshold constants (M1, M2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import build_slda, classify, classify_many, classify_multi_many
from .errors import DataError, DomainError, ShapeError, SldaError
from .estimation import compute_an, compute_tn, summarize
from .model import Dataset, LinearRule, MultiRule, PopulationSpec, ThresholdConfig, NORMAL
from .numerics import spd_solve, std_normal_cdf

CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"
EMPIRICAL = "empirical"


@dataclass(frozen=True)
class RateReport:
    """Misclassification rate, equal-weight average of per-class errors."""

    conditional_rate: float
    per_class_error: tuple[float, ...]
    method: str
    n_mc: int | None = None
    stderr: float | None = None
    n_test: int | None = None
    degenerate: bool = False


def mahalanobis_from(pop: PopulationSpec) -> float:
    """sqrt(delta' Sigma^{-1} delta) of a two-class population."""
    w = spd_solve(pop.chol, pop.delta)
    return math.sqrt(float(pop.delta @ w))


def optimal_rate(pop: PopulationSpec) -> RateReport:
    """Rate of the optimal (Bayes, equal priors) rule: Phi(-Delta_p/2).

    Only defined in closed form for normal populations; use
    conditional_rate_mc with the oracle rule for a t population.
    """
    if pop.distribution != NORMAL:
        raise DomainError("optimal_rate has a closed form only for normal populations")
    if pop.n_classes != 2:
        raise DomainError("optimal_rate requires a two-class population")
    rate = std_normal_cdf(-0.5 * mahalanobis_from(pop))
    return RateReport(conditional_rate=rate, per_class_error=(rate, rate), method=CLOSED_FORM)


def conditional_rate(rule: LinearRule, pop: PopulationSpec) -> RateReport:
    """Closed-form conditional rate of a linear rule under a normal
    two-class population.

    Class-1 error is P(w'x < c | mu_1) = Phi((c - w'mu_1)/sigma_w) and
    class-2 error Phi((w'mu_2 - c)/sigma_w) with sigma_w = sqrt(w'Sigma w).
    A degenerate rule classifies everything to class 1, so its errors
    are (0, 1) and the rate exactly 1/2.
    """
    if pop.distribution != NORMAL:
        raise DomainError("conditional_rate needs a normal population; use conditional_rate_mc")
    if pop.n_classes != 2:
        raise DomainError("conditional_rate requires a two-class population")
    if rule.p != pop.p:
        raise ShapeError(f"rule dimension {rule.p} != population dimension {pop.p}")
    if rule.degenerate:
        return RateReport(conditional_rate=0.5, per_class_error=(0.0, 1.0),
                          method=CLOSED_FORM, degenerate=True)
    w, c = rule.weights, rule.cutoff
    sigma_w = math.sqrt(float(w @ (pop.covariance @ w)))
    e1 = std_normal_cdf((c - float(w @ pop.means[0])) / sigma_w)
    e2 = std_normal_cdf((float(w @ pop.means[1]) - c) / sigma_w)
    return RateReport(conditional_rate=0.5 * (e1 + e2), per_class_error=(e1, e2),
                      method=CLOSED_FORM)


def _class_scores(pop: PopulationSpec, cls: int, weights: np.ndarray,
                  n_mc: int, gen: np.random.Generator) -> np.ndarray:
    # Scores of n_mc draws from class ``cls`` against each weight column.
    # Drawing z and projecting through L' @ weights gives the same draws
    # as materializing x = mu + L z (same z, reassociated product).
    z = gen.standard_normal((n_mc, pop.p))
    proj = pop.chol.lower.T @ weights
    raw = z @ proj
    if pop.distribution != NORMAL:
        scale = np.sqrt(pop.df / gen.chisquare(pop.df, n_mc))
        raw = raw * (scale[:, None] if raw.ndim == 2 else scale)
    return raw + pop.means[cls - 1] @ weights


def _binomial_report(errors: list[float], n_mc: int, degenerate: bool = False) -> RateReport:
    rate = float(np.mean(errors))
    var = sum(e * (1.0 - e) / n_mc for e in errors) / (len(errors) ** 2)
    return RateReport(conditional_rate=rate, per_class_error=tuple(errors),
                      method=MONTE_CARLO, n_mc=n_mc, stderr=math.sqrt(var),
                      degenerate=degenerate)


def conditional_rate_mc_joint(rules: dict[str, LinearRule], pop: PopulationSpec,
                              n_mc: int, gen: np.random.Generator) -> dict[str, RateReport]:
    """Monte Carlo rates for several linear rules on one shared draw set.

    Each rule's estimate is distributed exactly as a separate
    conditional_rate_mc call; sharing the n_mc draws per class couples
    the estimates (common random numbers) and costs one pass.
    """
    if n_mc < 1:
        raise DomainError(f"n_mc must be >= 1, got {n_mc}")
    if pop.n_classes != 2:
        raise DomainError("joint evaluation expects a two-class population")
    names = list(rules)
    weights = np.column_stack([rules[m].weights for m in names])
    cutoffs = np.array([rules[m].cutoff for m in names])
    errors = np.empty((2, len(names)))
    for cls in (1, 2):
        scores = _class_scores(pop, cls, weights, n_mc, gen) - cutoffs
        wrong = scores < 0.0 if cls == 1 else scores >= 0.0
        errors[cls - 1] = wrong.mean(axis=0)
    return {m: _binomial_report([errors[0, j], errors[1, j]], n_mc,
                                degenerate=rules[m].degenerate)
            for j, m in enumerate(names)}


def conditional_rate_mc(rule, pop: PopulationSpec, n_mc: int,
                        gen: np.random.Generator) -> RateReport:
    """Monte Carlo conditional rate for a LinearRule or MultiRule.

    Draws n_mc samples per class from the population's distribution
    (normal or t), classifies them, and averages the per-class error
    rates with equal weights. The reported stderr is the binomial
    standard error of that average.
    """
    if n_mc < 1:
        raise DomainError(f"n_mc must be >= 1, got {n_mc}")
    k = pop.n_classes
    if isinstance(rule, MultiRule):
        if rule.n_classes != k:
            raise ShapeError(f"rule has {rule.n_classes} classes, population {k}")
        pairs = sorted(rule.pairwise)
        weights = np.column_stack([rule.pairwise[ab].weights for ab in pairs])
        cutoffs = np.array([rule.pairwise[ab].cutoff for ab in pairs])
        errors = []
        for cls in range(1, k + 1):
            scores = _class_scores(pop, cls, weights, n_mc, gen) - cutoffs
            s = np.zeros((n_mc, k, k))
            for idx, (a, b) in enumerate(pairs):
                s[:, a - 1, b - 1] = scores[:, idx]
                s[:, b - 1, a - 1] = -scores[:, idx]
            s[:, np.arange(k), np.arange(k)] = np.inf
            labels = np.argmax(s.min(axis=2), axis=1) + 1
            errors.append(float(np.mean(labels != cls)))
    else:
        if rule.p != pop.p:
            raise ShapeError(f"rule dimension {rule.p} != population dimension {pop.p}")
        if k != 2:
            raise DomainError("a LinearRule evaluates against a two-class population")
        errors = []
        for cls in (1, 2):
            scores = _class_scores(pop, cls, rule.weights, n_mc, gen) - rule.cutoff
            wrong = scores < 0.0 if cls == 1 else scores >= 0.0
            errors.append(float(np.mean(wrong)))
    return _binomial_report(errors, n_mc, degenerate=getattr(rule, "degenerate", False))


def empirical_rate(rule, test: Dataset) -> RateReport:
    """Per-class misclassified fraction on a labeled test set,
    averaged with equal class weights."""
    n_classes = rule.n_classes if isinstance(rule, MultiRule) else 2
    if test.n_classes != n_classes:
        raise DataError(
            f"test set has {test.n_classes} classes; rule expects {n_classes} "
            "(a class with no test samples has undefined error)"
        )
    if isinstance(rule, MultiRule):
        predicted = classify_multi_many(rule, test.features)
    else:
        predicted = classify_many(rule, test.features)
    errors = []
    for cls in range(1, n_classes + 1):
        mask = test.labels == cls
        errors.append(float(np.mean(predicted[mask] != cls)))
    return RateReport(conditional_rate=float(np.mean(errors)),
                      per_class_error=tuple(errors), method=EMPIRICAL, n_test=test.n)


def loocv_rate(dataset: Dataset, config: ThresholdConfig) -> float:
    """Leave-one-out cross-validation estimate of the SLDA rate.

    Each fold refits on the remaining n-1 samples (thresholds t_n, a_n
    recomputed with n-1) and classifies the held-out point; the return
    value is the unweighted mean of the n error indicators.
    """
    if min(dataset.class_counts) < 3:
        raise DataError("loocv_rate requires every class count >= 3")
    wrong = 0
    for i in range(dataset.n):
        try:
            sub = dataset.drop(i)
            rule, _ = build_slda(sub, config)
            predicted = classify(rule, dataset.features[i])
        except SldaError as exc:
            raise SldaError(f"LOOCV refit failed on fold {i}: {exc}") from exc
        if predicted != int(dataset.labels[i]):
            wrong += 1
    return wrong / dataset.n


@dataclass(frozen=True)
class CvSurface:
    """Grid of (M1, M2) pairs with their LOOCV scores and the winner."""

    grid: tuple[tuple[float, float], ...]
    scores: tuple[float, ...]
    best: tuple[float, float]
    best_score: float


def cv_grid_search(dataset: Dataset, m1_grid, m2_grid, alpha: float = 0.3,
                   threads: int = 1) -> CvSurface:
    """Evaluate loocv_rate on the product grid and pick the minimum.

    Ties are broken toward the most sparse rule: largest M2, then
    largest M1. A fold failure marks that grid point's score 1.0
    (worst) instead of aborting the scan. Grid points are independent;
    with threads > 1 they are evaluated concurrently and aggregated in
    grid order, so the surface is identical to the sequential one.
    """
    m1_grid = [float(v) for v in m1_grid]
    m2_grid = [float(v) for v in m2_grid]
    if not m1_grid or not m2_grid:
        raise DomainError("cv_grid_search requires non-empty grids")
    grid = [(m1, m2) for m1 in m1_grid for m2 in m2_grid]

    def point_score(point):
        try:
            return loocv_rate(dataset, ThresholdConfig(m1=point[0], m2=point[1], alpha=alpha))
        except SldaError:
            return 1.0

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(point_score, grid))
    else:
        scores = [point_score(point) for point in grid]
    best = None
    best_score = None
    for (m1, m2), rate in zip(grid, scores):
        if (best is None or rate < best_score
                or (rate == best_score and (m2, m1) > (best[1], best[0]))):
            best = (m1, m2)
            best_score = rate
    return CvSurface(grid=tuple(grid), scores=tuple(scores), best=best, best_score=best_score)


def default_grids(dataset: Dataset, alpha: float = 0.3, size: int = 7):
    """Data-driven (M1, M2) grids when the caller supplies none.

    M2 values are log-spaced so that a_n sweeps the 50th to 99.9th
    percentile of |delta_hat_j|; M1 likewise from the off-diagonal
    |S_jl| percentiles against t_n's scale factor.
    """
    summary = summarize(dataset)
    if summary.delta_hat is None:
        raise DomainError("default_grids requires a two-class dataset")
    n, p = dataset.n, dataset.p
    scale_a = compute_an(1.0, n, p, alpha)
    scale_t = compute_tn(1.0, n, p)

    def log_spaced(values, scale):
        lo = max(float(np.quantile(values, 0.5)), 1e-12)
        hi = max(float(np.quantile(values, 0.999)), lo * (1.0 + 1e-9))
        return list(np.exp(np.linspace(math.log(lo), math.log(hi), size)) / scale)

    offdiag = np.abs(summary.pooled_cov[np.triu_indices(p, k=1)])
    m1_grid = log_spaced(offdiag, scale_t)
    m2_grid = log_spaced(np.abs(summary.delta_hat), scale_a)
    return m1_grid, m2_grid
