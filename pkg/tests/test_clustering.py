import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import best_two_partition
from qmcreduce import clustering, nets
from qmcreduce.errors import DegenerateSplitError, ParameterError, ShapeError


def _check_partition(model, N):
    allidx = np.concatenate(model.partition)
    assert np.array_equal(np.sort(allidx), np.arange(N))


def _check_means(model, Y):
    for k, p in enumerate(model.partition):
        assert model.responses[k] == pytest.approx(np.mean(Y[p]), rel=1e-12, abs=1e-15)


class TestTwoMeans:
    def test_pair(self):
        centers, (a, b) = clustering.two_means(np.array([[0.0], [1.0]]), 0)
        assert sorted(centers[:, 0].tolist()) == [0.0, 1.0]
        assert len(a) == len(b) == 1

    def test_blobs_match_exhaustive(self):
        rng = np.random.default_rng(0)
        X = np.concatenate([rng.normal(0.2, 0.01, 50), rng.normal(0.8, 0.01, 50)])[:, None]
        centers, (a, b) = clustering.two_means(X, 1)
        # oracle: 2-means on a 12-point subsample reaches the exhaustive optimum
        sub = np.concatenate([X[:6], X[50:56]])
        _, (sa, sb) = clustering.two_means(sub, 2)
        got = sum(np.sum((sub[i, 0] - sub[i, 0].mean()) ** 2) for i in (sa, sb))
        assert got == pytest.approx(best_two_partition(sub[:, 0]), abs=1e-12)
        for c, blob in zip(sorted(centers[:, 0]), (X[:50, 0], X[50:, 0])):
            assert abs(c - blob.mean()) < 0.05

    def test_identical_points(self):
        with pytest.raises(DegenerateSplitError):
            clustering.two_means(np.ones((5, 2)), 0)


class TestSupercompress:
    def test_invariants(self):
        rng = np.random.default_rng(1)
        X = rng.random((300, 2))
        Y = np.sin(6 * X[:, 0]) + rng.normal(0, 0.1, 300)
        model = clustering.supercompress(X, Y, 20, 3)
        assert model.K == 20
        _check_partition(model, 300)
        _check_means(model, Y)
        for k, p in enumerate(model.partition):
            np.testing.assert_allclose(model.centers[k], X[p].mean(axis=0), rtol=1e-12)
            assert model.losses[k] == pytest.approx(np.sum((Y[p] - Y[p].mean()) ** 2), rel=1e-9, abs=1e-12)
        assert all(b <= a + 1e-12 for a, b in zip(model.history, model.history[1:]))

    def test_constant_response(self):
        rng = np.random.default_rng(2)
        X = rng.random((40, 2))
        model = clustering.supercompress(X, np.full(40, 3.0), 4, 0)
        assert math.fsum(model.losses) == 0
        assert model.history == [0.0, 0.0, 0.0]
        # zero-loss ties split the largest cluster: no singleton splits off early
        assert min(len(p) for p in model.partition) > 1

    def test_k_equals_n(self):
        rng = np.random.default_rng(3)
        X = rng.random((12, 2))
        model = clustering.supercompress(X, rng.normal(size=12), 12, 0)
        assert all(len(p) == 1 for p in model.partition)
        assert math.fsum(model.losses) == 0

    def test_exhaustion_flag(self):
        X = np.array([[0.1, 0.1]] * 3 + [[0.9, 0.9]] * 3)
        with pytest.warns(RuntimeWarning):
            model = clustering.supercompress(X, np.arange(6.0), 4, 0)
        assert model.exhausted and model.K == 2

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        X = rng.random((200, 3))
        Y = rng.normal(size=200)
        a = clustering.supercompress(X, Y, 16, 9)
        b = clustering.supercompress(X, Y, 16, 9)
        np.testing.assert_array_equal(a.centers, b.centers)
        np.testing.assert_array_equal(a.responses, b.responses)

    def test_bad_k(self):
        with pytest.raises(ParameterError):
            clustering.supercompress(np.zeros((3, 1)) + 0.1, np.zeros(3), 4)

    @given(st.integers(3, 10), st.integers(0, 2**32 - 1))
    def test_small_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.random(n)
        y = rng.normal(size=n)
        model = clustering.supercompress(x[:, None], y, 2, seed)
        total = math.fsum(model.losses)
        # supercompress splits on x, so it can only do as well as the best 2-partition of y
        assert total >= best_two_partition(y) - 1e-9

    def test_small_oracle_separated(self):
        x = np.array([0.01, 0.02, 0.03, 0.04, 0.9, 0.91, 0.92])
        y = np.array([0.0, 0.1, 0.05, 0.02, 5.0, 5.1, 4.9])
        model = clustering.supercompress(x[:, None], y, 2, 0)
        assert math.fsum(model.losses) == pytest.approx(best_two_partition(y), abs=1e-9)


class TestRobust:
    def test_lambda_half_is_plain_y(self):
        rng = np.random.default_rng(5)
        X = rng.random((80, 2))
        Y = rng.random(80)
        m = clustering.robust_supercompress(X, Y, 6, 0.5, 0)
        assert m.response_scale == 1.0
        _check_partition(m, 80)
        _check_means(m, Y)
        for k, p in enumerate(m.partition):
            Z = np.column_stack([X[p], Y[p]])
            assert m.losses[k] == pytest.approx(np.sum((Z - Z.mean(axis=0)) ** 2), rel=1e-9, abs=1e-12)

    def test_lambda_one_ignores_y(self):
        rng = np.random.default_rng(6)
        X = rng.random((60, 2))
        a = clustering.robust_supercompress(X, rng.random(60), 5, 1.0, 3)
        b = clustering.robust_supercompress(X, rng.random(60), 5, 1.0, 3)
        assert [p.tolist() for p in a.partition] == [p.tolist() for p in b.partition]

    def test_default_lambda(self):
        assert clustering.default_lambda(196) == 1 / 197

    def test_scaled_responses(self):
        rng = np.random.default_rng(7)
        X = rng.random((50, 3))
        Y = rng.random(50)
        m = clustering.robust_supercompress(X, Y, 5, None, 0)
        yt = Y * math.sqrt((1 - 0.25) / 0.25)
        for k, p in enumerate(m.partition):
            assert m.scaled_responses[k] == pytest.approx(yt[p].mean(), rel=1e-12)

    def test_x_only(self):
        rng = np.random.default_rng(8)
        X = rng.random((50, 2))
        m = clustering.robust_supercompress(X, rng.random(50), 4, 0.3, 0, joint=False)
        _check_partition(m, 50)

    def test_bad_lambda(self):
        with pytest.raises(ParameterError):
            clustering.robust_supercompress(np.zeros((3, 1)), np.zeros(3), 2, 1.5)


class TestVoronoi:
    def test_data_is_net(self):
        net = nets.faure_net(2, 3, 2)
        Y = np.arange(8.0)
        m = clustering.qmc_voronoi(net.points, Y, net)
        assert m.K == 8
        np.testing.assert_array_equal(m.responses, Y)
        np.testing.assert_array_equal(m.net_index, np.arange(8))

    def test_single_region(self):
        net = nets.faure_net(2, 3, 2)
        X = np.full((5, 2), 0.99) - np.linspace(0, 0.01, 5)[:, None]
        Y = np.arange(5.0)
        m = clustering.qmc_voronoi(X, Y, net)
        assert m.K == 1 and m.responses[0] == 2.0

    @given(st.integers(1, 80), st.integers(0, 2**32 - 1))
    def test_nearest_exhaustive(self, n, seed):
        rng = np.random.default_rng(seed)
        net = nets.faure_net(3, 2, 2)
        X = rng.random((n, 2))
        Y = rng.normal(size=n)
        m = clustering.qmc_voronoi(X, Y, net)
        _check_partition(m, n)
        _check_means(m, Y)
        for k, p in enumerate(m.partition):
            for i in p:
                d_own = np.sum((X[i] - m.centers[k]) ** 2)
                assert np.all(d_own <= np.sum((X[i] - m.centers) ** 2, axis=1))
                # ties break to the lowest net index among all net points
                d_all = np.sum((X[i] - net.points) ** 2, axis=1)
                assert m.net_index[k] == np.flatnonzero(d_all == d_all.min())[0]

    def test_shape_check(self):
        with pytest.raises(ShapeError):
            clustering.qmc_voronoi(np.zeros((2, 3)), np.zeros(2), nets.faure_net(2, 2, 2))


class TestKmeans:
    def test_k_one(self):
        rng = np.random.default_rng(9)
        X = rng.random((30, 2))
        m = clustering.kmeans(X, 1, 0)
        np.testing.assert_allclose(m.centers[0], X.mean(axis=0), rtol=1e-12)

    def test_k_n(self):
        rng = np.random.default_rng(10)
        X = rng.random((10, 2))
        m = clustering.kmeans(X, 10, 0, np.arange(10.0))
        assert sorted(len(p) for p in m.partition) == [1] * 10

    def test_means(self):
        rng = np.random.default_rng(11)
        X = rng.random((100, 2))
        Y = rng.random(100)
        m = clustering.kmeans(X, 7, 0, Y)
        _check_partition(m, 100)
        _check_means(m, Y)


class TestHelpers:
    def test_app_clst(self):
        assert clustering.app_clst([1.0, 2.0], [1.0, 2.0]) == 0
        assert clustering.app_clst([0.0], [2.0]) == 4

    def test_round_half_up(self):
        assert clustering.round_half_up([8.5, 2.5, 0.49, 3.5000001]).tolist() == [9, 3, 0, 4]

    def test_lloyd_reseeds_empty(self):
        X = np.array([[0.0], [0.1], [1.0]])
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            centers, labels, _ = clustering.lloyd(X, np.array([[0.05], [5.0]]))
        assert len(set(labels.tolist())) == 2
