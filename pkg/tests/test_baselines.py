import time

import numpy as np
import pytest

from dppnystrom import (
    PsdMatrix,
    RankExhaustedWarning,
    ScoreVector,
    adaptive_full,
    adaptive_partial,
    approx_leverage_scores,
    kmeans_landmarks,
    leverage_scores,
    philox_stream,
    regularized_leverage_scores,
    sample_by_scores,
    select_landmarks,
    uniform_landmarks,
)
from dppnystrom.baselines import _AdaptiveSampler

from helpers import random_psd, random_rbf_kernel


class TestUniform:
    def test_exhaustion(self):
        assert uniform_landmarks(5, 5, 0).as_tuple() == (0, 1, 2, 3, 4)

    def test_empty(self):
        assert uniform_landmarks(5, 0, 0).cardinality == 0

    def test_pair_frequencies(self):
        rng = philox_stream(0)
        counts = {}
        draws = 60_000
        for _ in range(draws):
            s = uniform_landmarks(6, 2, rng).as_tuple()
            counts[s] = counts.get(s, 0) + 1
        assert len(counts) == 15
        for v in counts.values():
            assert abs(v / draws - 1 / 15) <= 0.005


class TestLeverageScores:
    def test_identity_symmetric_split(self):
        s = leverage_scores(np.eye(5), 2)
        assert np.allclose(s.scores, 0.4)

    def test_axis_eigenvector(self):
        s = leverage_scores(np.diag([5.0, 1.0, 1.0]), 1)
        assert np.allclose(s.scores, [1.0, 0.0, 0.0], atol=1e-12)

    def test_sum_equals_k(self):
        K = random_psd(np.random.default_rng(0), 7)
        s = leverage_scores(K, 3)
        assert abs(s.total - 3.0) <= 1e-8


class TestRegularizedLeverage:
    def test_identity_shrinkage(self):
        n, gamma = 4, 0.5
        s = regularized_leverage_scores(np.eye(n), gamma)
        assert np.allclose(s.scores, 1.0 / (1.0 + n * gamma))

    def test_large_gamma_vanishes(self):
        s = regularized_leverage_scores(random_psd(np.random.default_rng(1), 5), 1e12)
        assert s.scores.max() < 1e-10

    def test_trace_identity(self):
        K = random_psd(np.random.default_rng(2), 6)
        gamma = 0.3
        s = regularized_leverage_scores(K, gamma)
        ref = np.trace(K @ np.linalg.inv(K + 6 * gamma * np.eye(6)))
        assert abs(s.total - ref) <= 1e-8

    def test_gamma_guard(self):
        with pytest.raises(ValueError):
            regularized_leverage_scores(np.eye(3), 0.0)


class TestApproxLeverage:
    def test_full_anchors_match_exact(self):
        K = random_psd(np.random.default_rng(3), 8)
        approx = approx_leverage_scores(np.diag(K), lambda idx: K[idx], 8, 0.0, 0)
        exact = leverage_scores(K, 8)
        assert np.abs(approx.scores - exact.scores).max() <= 1e-6

    def test_full_anchors_match_regularized(self):
        K = random_psd(np.random.default_rng(4), 7)
        gamma = 0.2
        approx = approx_leverage_scores(np.diag(K), lambda idx: K[idx], 7, gamma, 0)
        exact = regularized_leverage_scores(K, gamma)
        assert np.abs(approx.scores - exact.scores).max() <= 1e-6

    def test_unit_diagonal_uniform_anchors(self):
        # constant diagonal makes the anchor draw uniform without replacement
        K, _ = random_rbf_kernel(np.random.default_rng(5), 30)
        rng = philox_stream(3)
        counts = np.zeros(30)
        for _ in range(4000):
            anchors = sample_by_scores(ScoreVector(np.diag(K)), 3, rng)
            counts[anchors.indices] += 1
        freq = counts / (4000 * 3)
        assert np.abs(freq - 1 / 30).max() <= 0.01

    def test_p_guard(self):
        with pytest.raises(ValueError):
            approx_leverage_scores(np.ones(4), lambda idx: np.eye(4)[idx], 0)


class TestSampleByScores:
    def test_one_hot(self):
        s = ScoreVector(np.array([0.0, 1.0, 0.0]))
        for seed in range(5):
            assert sample_by_scores(s, 1, seed).as_tuple() == (1,)

    def test_weighted_frequency(self):
        rng = philox_stream(4)
        hits = 0
        draws = 40_000
        for _ in range(draws):
            if sample_by_scores(np.array([2.0, 1.0, 1.0]), 1, rng).as_tuple() == (0,):
                hits += 1
        assert abs(hits / draws - 0.5) <= 0.01

    def test_uniform_reduction(self):
        rng = philox_stream(5)
        counts = {}
        draws = 30_000
        for _ in range(draws):
            s = sample_by_scores(np.ones(5), 2, rng).as_tuple()
            counts[s] = counts.get(s, 0) + 1
        for v in counts.values():
            assert abs(v / draws - 1 / 10) <= 0.01

    def test_insufficient_positive(self):
        with pytest.raises(ValueError, match="positive"):
            sample_by_scores(np.array([1.0, 0.0, 0.0]), 2, 0)


class TestAdaptive:
    def test_single_nonzero_column(self):
        K = np.diag([1.0, 0.0, 0.0])
        for seed in range(5):
            assert adaptive_full(K, 1, seed).as_tuple() == (0,)

    def test_rank_exhaustion_flags(self):
        K = random_psd(np.random.default_rng(6), 5, rank=2)
        with pytest.warns(RankExhaustedWarning):
            out = adaptive_full(K, 4, 0)
        assert out.cardinality == 4

    def test_identity_is_uniform_without_replacement(self):
        # walk every pick sequence up to depth 3 and check the algorithm's
        # own probabilities stay uniform over unchosen indices, which makes
        # the outcome distribution exactly uniform without replacement
        n = 5

        def walk(chosen, depth):
            state = _AdaptiveSampler(np.eye(n), partial=False)
            for j in chosen:
                state.choose(j)
            p = state.probabilities()
            expected = np.ones(n)
            expected[list(chosen)] = 0.0
            expected /= expected.sum()
            assert np.abs(p - expected).max() <= 1e-12
            if depth < 3:
                for j in range(n):
                    if j not in chosen:
                        walk(chosen + [j], depth + 1)

        walk([], 1)

    def test_partial_first_round_matches_full(self):
        K = random_psd(np.random.default_rng(7), 6)
        full = _AdaptiveSampler(K, partial=False)
        part = _AdaptiveSampler(K, partial=True)
        assert np.abs(full.probabilities() - part.probabilities()).max() == 0.0

    def test_partial_identity_uniform(self):
        state = _AdaptiveSampler(np.eye(6), partial=True)
        state.choose(2)
        p = state.probabilities()
        expected = np.ones(6)
        expected[2] = 0.0
        expected /= expected.sum()
        assert np.abs(p - expected).max() <= 1e-12

    def test_partial_much_faster_on_large_instance(self):
        K, _ = random_rbf_kernel(np.random.default_rng(8), 4000, d=4)
        t0 = time.perf_counter()
        adaptive_full(K, 100, 0)
        t_full = time.perf_counter() - t0
        t0 = time.perf_counter()
        adaptive_partial(K, 100, 0)
        t_part = time.perf_counter() - t0
        assert t_full >= 5.0 * t_part

    def test_determinism(self):
        K = random_psd(np.random.default_rng(9), 10)
        assert adaptive_full(K, 4, 5) == adaptive_full(K, 4, 5)
        assert adaptive_partial(K, 4, 5) == adaptive_partial(K, 4, 5)


class TestKmeans:
    def test_singleton_clusters(self):
        X = np.random.default_rng(10).standard_normal((6, 2))
        cl = kmeans_landmarks(X, 6, rng=0)
        got = {tuple(row) for row in cl.centroids}
        assert got == {tuple(row) for row in X}

    def test_two_clusters_recovered(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((30, 2)) * 0.05
        b = rng.standard_normal((30, 2)) * 0.05 + 10.0
        cl = kmeans_landmarks(np.vstack([a, b]), 2, rng=0)
        means = sorted(cl.centroids[:, 0].tolist())
        assert abs(means[0] - a[:, 0].mean()) < 0.1
        assert abs(means[1] - b[:, 0].mean()) < 0.1

    def test_objective_nonincreasing(self):
        X = np.random.default_rng(12).standard_normal((60, 3))
        cl = kmeans_landmarks(X, 5, rng=1)
        trace = np.array(cl.wcss_trace)
        assert np.all(np.diff(trace) <= 1e-9)


class TestSelectLandmarks:
    def test_every_method_returns_c_items(self):
        K, X = random_rbf_kernel(np.random.default_rng(13), 25)
        Km = PsdMatrix(K)
        for method in ("kdpp", "unif", "lev", "reglev", "applev", "appreglev", "adapfull", "adappart", "kmeans"):
            out = select_landmarks(
                method, Km, 4, 0, features=X, gamma=0.1, gibbs_iterations=50
            )
            assert out.cardinality == 4, method

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown"):
            select_landmarks("bogus", np.eye(4), 2, 0)

    def test_determinism(self):
        K, X = random_rbf_kernel(np.random.default_rng(14), 20)
        a = select_landmarks("kdpp", PsdMatrix(K), 3, 7, features=X, gibbs_iterations=100)
        b = select_landmarks("kdpp", PsdMatrix(K), 3, 7, features=X, gibbs_iterations=100)
        assert a == b
