"""Rule families: LDA, known-covariance LDA, SLDA, oracle and the
pairwise multi-class extension."""

import numpy as np
import pytest

from conftest import random_population, random_spd, two_class_dataset
from slda.classify import (
    build_lda,
    build_lda_known_sigma,
    build_oracle,
    build_slda,
    build_slda_multi,
    classify,
    classify_many,
    classify_multi,
    classify_multi_many,
)
from slda.diagnostics import lemma2_counts
from slda.errors import DomainError
from slda.estimation import compute_an, summarize
from slda.model import (
    Dataset,
    LinearRule,
    MultiRule,
    PopulationSpec,
    ThresholdConfig,
    default_config,
)
from slda.numerics import cholesky_spd, sample_mvn, spd_solve, substream


def draw_two_class(pop, n1, n2, gen):
    x1 = sample_mvn(pop.means[0], pop.chol, gen, size=n1)
    x2 = sample_mvn(pop.means[1], pop.chol, gen, size=n2)
    return two_class_dataset(x1, x2)


class TestBuildLda:
    def test_separated_toy(self, rng):
        x1 = np.column_stack([3.0 + 0.01 * rng.standard_normal(10), rng.standard_normal(10)])
        x2 = np.column_stack([-3.0 + 0.01 * rng.standard_normal(10), rng.standard_normal(10)])
        ds = two_class_dataset(x1, x2)
        rule = build_lda(ds)
        assert abs(rule.weights[0]) > 10 * abs(rule.weights[1])
        assert np.array_equal(classify_many(rule, ds.features), ds.labels)

    def test_rank_deficient_uses_pseudo_inverse(self, rng):
        ds = two_class_dataset(rng.standard_normal((3, 10)), rng.standard_normal((3, 10)))
        rule = build_lda(ds)  # p = 10 > n = 6: S is singular
        assert np.all(np.isfinite(rule.weights))
        assert not rule.degenerate

    def test_direction_converges_to_oracle(self):
        gen = substream(2024, 0)
        sigma = np.array([[2.0, 0.5, 0.0, 0.0, 0.0],
                          [0.5, 1.5, 0.3, 0.0, 0.0],
                          [0.0, 0.3, 1.0, 0.2, 0.0],
                          [0.0, 0.0, 0.2, 1.2, 0.1],
                          [0.0, 0.0, 0.0, 0.1, 0.8]])
        delta = np.array([1.0, -0.5, 0.25, 0.0, 0.75])
        pop = PopulationSpec(means=np.vstack([delta, np.zeros(5)]), covariance=sigma)
        ds = draw_two_class(pop, 5000, 5000, gen)
        w = build_lda(ds).weights
        target = spd_solve(pop.chol, delta)
        cosine = w @ target / (np.linalg.norm(w) * np.linalg.norm(target))
        assert cosine >= 0.99


class TestBuildLdaKnownSigma:
    def test_identity_gives_delta_hat(self, rng):
        ds = two_class_dataset(rng.standard_normal((5, 3)) + 1.0, rng.standard_normal((6, 3)))
        rule = build_lda_known_sigma(ds, np.eye(3))
        assert np.allclose(rule.weights, summarize(ds).delta_hat, rtol=1e-14)

    def test_scaling_sigma_scales_rule(self, rng):
        ds = two_class_dataset(rng.standard_normal((5, 3)) + 1.0, rng.standard_normal((6, 3)))
        sigma = random_spd(rng, 3)
        base = build_lda_known_sigma(ds, sigma)
        scaled = build_lda_known_sigma(ds, 4.0 * sigma)
        assert np.allclose(scaled.weights, base.weights / 4.0, rtol=1e-12)
        assert scaled.cutoff == pytest.approx(base.cutoff / 4.0, rel=1e-12)
        probes = rng.standard_normal((100, 3))
        assert np.array_equal(classify_many(base, probes), classify_many(scaled, probes))

    def test_diagonal_solve(self):
        # delta_hat = (1, -3), Sigma = diag(0.5, 0.5) -> w = (2, -6)
        ds = two_class_dataset([[0.0, 0.0], [2.0, 0.0]], [[0.0, 2.0], [0.0, 4.0]])
        rule = build_lda_known_sigma(ds, np.diag([0.5, 0.5]))
        assert np.allclose(rule.weights, [2.0, -6.0], rtol=1e-14)


class TestBuildSlda:
    def test_zero_thresholds_reduce_to_lda(self, rng):
        pop = random_population(rng, 20)
        ds = draw_two_class(pop, 100, 100, substream(31, 0))
        lda = build_lda(ds)
        slda, report = build_slda(ds, ThresholdConfig(m1=0.0, m2=0.0, alpha=0.3))
        assert np.max(np.abs(slda.weights - lda.weights)) <= 1e-10
        assert abs(slda.cutoff - lda.cutoff) <= 1e-10
        probes = rng.standard_normal((1000, 20))
        assert np.array_equal(classify_many(slda, probes), classify_many(lda, probes))
        assert report.q_hat == 20

    def test_huge_m2_degenerates(self, rng):
        ds = two_class_dataset(rng.standard_normal((5, 4)) + 1.0, rng.standard_normal((5, 4)))
        rule, report = build_slda(ds, ThresholdConfig(m1=1.0, m2=1e9, alpha=0.3))
        assert rule.degenerate and report.degenerate
        assert not np.any(rule.weights)
        assert classify(rule, np.full(4, -100.0)) == 1

    def test_sparsity_report_fractions(self, rng):
        ds = two_class_dataset(rng.standard_normal((15, 10)) + 1.0,
                               rng.standard_normal((15, 10)))
        _, report = build_slda(ds, ThresholdConfig(m1=1.0, m2=0.5, alpha=0.3))
        assert report.frac_delta_kept == report.q_hat / 10
        assert report.frac_cov_kept == 2 * report.nnz_offdiag / (10 * 9)

    def test_qhat_within_lemma_bracket(self):
        # sparse scenario: p = 200, ten unit signals, identity covariance,
        # n = 100, package-default constants; the kept count sits in the
        # bracket computed from the true delta in >= 18 of 20 seeded runs
        p, n1, n2 = 200, 50, 50
        delta = np.zeros(p)
        delta[np.arange(10) * (p // 10)] = 1.0
        pop = PopulationSpec(means=np.vstack([delta, np.zeros(p)]), covariance=np.eye(p))
        cfg = default_config()
        a_n = compute_an(cfg.m2, n1 + n2, p, cfg.alpha)
        q_n0, q_n = lemma2_counts(delta, a_n, r=2.0)
        inside = 0
        for rep in range(20):
            ds = draw_two_class(pop, n1, n2, substream(515, rep))
            _, report = build_slda(ds, cfg)
            inside += q_n0 <= report.q_hat <= q_n
        assert inside >= 18


class TestBuildOracle:
    def test_identity_sigma(self):
        pop = PopulationSpec(means=np.array([[1.0, 0.0], [-1.0, 0.0]]),
                             covariance=np.eye(2))
        rule = build_oracle(pop)
        assert np.allclose(rule.weights, [2.0, 0.0], rtol=1e-14)
        assert rule.cutoff == pytest.approx(0.0, abs=1e-15)
        assert classify(rule, np.array([1.0, 0.0])) == 1
        assert classify(rule, np.array([-1.0, 0.0])) == 2

    def test_label_exchange_negates(self, rng):
        pop = random_population(rng, 4)
        flipped = PopulationSpec(means=pop.means[::-1].copy(), covariance=pop.covariance)
        a, b = build_oracle(pop), build_oracle(flipped)
        assert np.allclose(a.weights, -b.weights, rtol=1e-12)
        probes = rng.standard_normal((200, 4)) + pop.mid
        la = classify_many(a, probes)
        lb = classify_many(b, probes)
        # boundary has measure zero for random probes: labels swap
        assert np.array_equal(la, 3 - lb)

    def test_correlated_two_by_two(self):
        pop = PopulationSpec(means=np.array([[1.0, 1.0], [0.0, 0.0]]),
                             covariance=np.array([[2.0, 1.0], [1.0, 2.0]]))
        rule = build_oracle(pop)
        assert np.allclose(rule.weights, [1.0 / 3.0, 1.0 / 3.0], rtol=1e-12)


class TestClassify:
    def test_boundary_goes_to_class_one(self):
        rule = LinearRule(weights=np.array([1.0, 0.0]), cutoff=0.5)
        assert classify(rule, np.array([0.5, 123.0])) == 1
        assert classify(rule, np.array([0.49999, 0.0])) == 2

    def test_feature_rescaling_covariance(self, rng):
        # LDA rules transform covariantly: labels are unchanged when
        # train and probes are scaled together
        pop = random_population(rng, 6)
        ds = draw_two_class(pop, 30, 30, substream(77, 0))
        probes = rng.standard_normal((300, 6))
        s = 7.3
        scaled = Dataset(features=ds.features * s, labels=ds.labels,
                         class_counts=ds.class_counts)
        base = classify_many(build_lda(ds), probes)
        assert np.array_equal(base, classify_many(build_lda(scaled), probes * s))
        # SLDA: the threshold constants carry units, so they scale too
        # (M1 by s^2 against S, M2 by s against delta_hat)
        cfg = ThresholdConfig(m1=0.8, m2=0.9, alpha=0.3)
        cfg_scaled = ThresholdConfig(m1=0.8 * s * s, m2=0.9 * s, alpha=0.3)
        r1, _ = build_slda(ds, cfg)
        r2, _ = build_slda(scaled, cfg_scaled)
        assert np.array_equal(classify_many(r1, probes), classify_many(r2, probes * s))


def oracle_multi_rule(means, sigma):
    """Pairwise rules from true parameters (test-local oracle builder)."""
    factor = cholesky_spd(sigma)
    k = means.shape[0]
    pairwise = {}
    for a in range(1, k):
        for b in range(a + 1, k + 1):
            w = spd_solve(factor, means[a - 1] - means[b - 1])
            c = float(w @ (0.5 * (means[a - 1] + means[b - 1])))
            pairwise[(a, b)] = LinearRule(weights=w, cutoff=c, degenerate=False)
    return MultiRule(pairwise=pairwise, n_classes=k)


def nearest_mahalanobis(means, sigma, probes):
    """Brute-force assignment to the closest class mean, lowest index wins."""
    inv = np.linalg.inv(sigma)
    d = np.stack([np.einsum("ij,jk,ik->i", probes - mu, inv, probes - mu) for mu in means])
    return np.argmin(d, axis=0) + 1


class TestMultiClass:
    def test_pairwise_antisymmetry(self, rng):
        k, p = 3, 6
        means = rng.standard_normal((k, p)) * 2
        x = [means[c] + 0.3 * rng.standard_normal((8, p)) for c in range(k)]
        ds = Dataset(features=np.vstack(x),
                     labels=np.repeat(np.arange(1, k + 1), 8),
                     class_counts=(8, 8, 8))
        rule = build_slda_multi(ds, ThresholdConfig(m1=1.0, m2=0.1, alpha=0.3))
        probe = rng.standard_normal(p)
        r12 = rule.pairwise[(1, 2)]
        s12 = r12.weights @ probe - r12.cutoff
        from slda.classify import multi_scores

        s = multi_scores(rule, probe)[0]
        assert s[0, 1] == pytest.approx(s12, rel=1e-15)
        assert s[1, 0] == -s[0, 1]

    def test_three_separated_classes_zero_training_error(self, rng):
        k, p = 3, 4
        means = np.array([[10.0, 0, 0, 0], [0, 10.0, 0, 0], [0, 0, 10.0, 0]])
        x = [means[c] + rng.standard_normal((10, p)) for c in range(k)]
        ds = Dataset(features=np.vstack(x),
                     labels=np.repeat(np.arange(1, k + 1), 10),
                     class_counts=(10, 10, 10))
        rule = build_slda_multi(ds, ThresholdConfig(m1=1.0, m2=0.5, alpha=0.3))
        assert np.array_equal(classify_multi_many(rule, ds.features), ds.labels)

    def test_collinear_means_middle_interval(self):
        means = np.array([[-2.0, 0.0], [0.0, 0.0], [2.0, 0.0]])
        sigma = np.eye(2)
        rule = oracle_multi_rule(means, sigma)
        grid = np.column_stack([np.linspace(-4, 4, 81), np.zeros(81)])
        got = classify_multi_many(rule, grid)
        expected = nearest_mahalanobis(means, sigma, grid)
        assert np.array_equal(got, expected)
        # interval structure: class 2 exactly between the boundaries
        assert np.all(got[np.abs(grid[:, 0]) < 1.0] == 2)
        assert np.all(got[grid[:, 0] < -1.0] == 1)
        assert np.all(got[grid[:, 0] > 1.0] == 3)

    def test_matches_nearest_mean_oracle_k4(self, rng):
        k, p = 4, 6
        means = rng.standard_normal((k, p)) * 1.5
        sigma = random_spd(rng, p)
        rule = oracle_multi_rule(means, sigma)
        probes = rng.standard_normal((1000, p)) + means.mean(axis=0)
        assert np.array_equal(classify_multi_many(rule, probes),
                              nearest_mahalanobis(means, sigma, probes))

    def test_equidistant_tie_lowest_index(self):
        # origin is exactly equidistant from classes 1 and 2 (norms 1),
        # both of which dominate class 3; lowest index wins the tie
        means = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0]])
        rule = oracle_multi_rule(means, np.eye(2))
        assert classify_multi(rule, np.zeros(2)) == 1

    def test_probe_at_class_mean(self, rng):
        means = np.array([[8.0, 0.0, 0.0], [0.0, 8.0, 0.0], [0.0, 0.0, 8.0]])
        rule = oracle_multi_rule(means, np.eye(3))
        for c in range(3):
            assert classify_multi(rule, means[c]) == c + 1

    def test_reduces_to_two_class_rule(self, rng):
        pop = random_population(rng, 5)
        rule2 = build_oracle(pop)
        multi = oracle_multi_rule(pop.means, pop.covariance)
        probes = rng.standard_normal((400, 5))
        assert np.array_equal(classify_multi_many(multi, probes),
                              classify_many(rule2, probes))

    def test_requires_three_classes(self, rng):
        ds = two_class_dataset(rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
        with pytest.raises(DomainError):
            build_slda_multi(ds, ThresholdConfig(m1=1.0, m2=1.0, alpha=0.3))
