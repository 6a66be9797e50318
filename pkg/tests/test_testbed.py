import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qmcreduce import testbed
from qmcreduce.errors import ParameterError

unit_points = hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
                         elements=st.floats(0, 1, exclude_max=True))


class TestFunctions:
    def test_f1_at_u(self):
        assert testbed.eval_f1([[0.5, 0.5, 0.5]])[0] == 1.0

    def test_f1_origin(self):
        assert testbed.eval_f1([[0.0, 0.0]])[0] == pytest.approx(math.exp(-5), rel=1e-15)

    @given(unit_points, st.integers(0, 3), st.floats(0, 1))
    def test_f1_monotone_towards_u(self, X, j, t):
        j = j % X.shape[1]
        Y = X.copy()
        Y[:, j] = X[:, j] + t * (0.5 - X[:, j])
        assert np.all(testbed.eval_f1(Y) >= testbed.eval_f1(X) * (1 - 1e-15))

    def test_f2_cut(self):
        assert testbed.eval_f2([[0.6, 0.1]])[0] == 0.0
        assert testbed.eval_f2([[0.1, 0.6, 0.1]])[0] == 0.0

    def test_f2_origin(self):
        assert testbed.eval_f2([[0.0, 0.0, 0.0]])[0] == 1.0

    def test_f2_boundary(self):
        assert testbed.eval_f2([[0.5, 0.5]])[0] == pytest.approx(math.exp(5), rel=1e-15)

    def test_f2_only_first_two_cut(self):
        assert testbed.eval_f2([[0.1, 0.1, 0.9]])[0] > 0

    def test_f3_1d(self):
        phi = lambda v: math.exp(-v * v / 2) / math.sqrt(2 * math.pi)  # noqa: E731
        assert testbed.eval_f3([[1 / 3]])[0] == pytest.approx(5 * (phi(0) + phi(-10 / 3)), rel=1e-12)
        assert testbed.eval_f3([[1 / 3]])[0] == pytest.approx(2.00242, abs=1e-5)

    def test_f3_2d(self):
        expect = 50 * (1 / (2 * math.pi) + math.exp(-100 / 9) / (2 * math.pi))
        assert testbed.eval_f3([[1 / 3, 1 / 3]])[0] == pytest.approx(expect, rel=1e-12)
        # the commonly quoted maximum 7.9579 is this value rounded
        assert testbed.eval_f3([[1 / 3, 1 / 3]])[0] == pytest.approx(7.9579, abs=1e-4)

    @given(unit_points)
    def test_f3_symmetry(self, X):
        np.testing.assert_allclose(testbed.eval_f3(X), testbed.eval_f3(1 - X), rtol=1e-9, atol=1e-300)

    @given(unit_points)
    def test_total_and_finite(self, X):
        for kind in testbed.FUNCTIONS:
            v = testbed.get_function(kind)(X)
            assert v.shape == (X.shape[0],) and np.all(np.isfinite(v))

    def test_f2_sup_norm(self):
        assert testbed.f2_sup_norm(2) == pytest.approx(math.exp(5), rel=1e-15)
        rng = np.random.default_rng(0)
        for s in (1, 2, 3):
            X = rng.random((20000, s))
            assert testbed.eval_f2(X).max() <= testbed.f2_sup_norm(s) * (1 + 1e-12)

    def test_unknown(self):
        with pytest.raises(ParameterError):
            testbed.get_function("f4")


class TestErr:
    def test_exact(self):
        X = np.random.default_rng(1).random((10, 2))
        assert testbed.err(testbed.eval_f1, X, testbed.eval_f1(X)) == 0

    def test_single(self):
        assert testbed.err(lambda x: np.zeros(len(x)), np.array([[0.2]]), [3.0]) == 9

    def test_noise_level(self):
        from qmcreduce.dataset import add_noise

        X = np.random.default_rng(2).random((100_000, 2))
        Y = add_noise(testbed.eval_f1(X), 0.02, 3)
        assert abs(testbed.err(testbed.eval_f1, X, Y) - 0.02) < 0.002

    @given(st.integers(1, 50), st.integers(0, 2**32 - 1))
    def test_permutation_invariant(self, n, seed):
        rng = np.random.default_rng(seed)
        X = rng.random((n, 2))
        Y = rng.normal(size=n)
        p = rng.permutation(n)
        assert testbed.err(testbed.eval_f3, X[p], Y[p]) == testbed.err(testbed.eval_f3, X, Y)

    @given(st.floats(-100, 100).filter(lambda c: abs(c) > 1e-3), st.integers(0, 2**32 - 1))
    def test_quadratic_homogeneity(self, c, seed):
        rng = np.random.default_rng(seed)
        X = rng.random((30, 2))
        Y = rng.normal(size=30)
        lhs = testbed.err(lambda x: c * testbed.eval_f1(x), X, c * Y)
        assert lhs == pytest.approx(c * c * testbed.err(testbed.eval_f1, X, Y), rel=1e-12)


class TestExperiments:
    def test_zero_reps(self):
        with pytest.raises(ParameterError):
            testbed.run_error_experiment(testbed.ExperimentConfig(repetitions=0))

    def test_k_not_power(self):
        with pytest.raises(ParameterError):
            testbed.run_error_experiment(testbed.ExperimentConfig(Ks=(100,), repetitions=1))

    def test_small_run_and_determinism(self):
        cfg = testbed.ExperimentConfig(N=400, Ks=(16, 32), repetitions=2, function="f3",
                                       methods=("supercompress", "qmc-avg", "voronoi", "kmeans", "robust"))
        a = testbed.run_error_experiment(cfg)
        b = testbed.run_error_experiment(cfg)
        assert a.to_csv(include_timing=False) == b.to_csv(include_timing=False)
        assert len(a.rows) == 10
        assert all(r.error >= 0 and np.isfinite(r.error) for r in a.rows)
        assert "time" not in a.to_csv(include_timing=False).splitlines()[0]
        doc = json.loads(a.to_json(include_timing=False))
        assert doc["kind"] == "error" and "time" not in doc["rows"][0]
        assert "supercompress" in a.pretty()

    def test_lookup(self):
        cfg = testbed.ExperimentConfig(N=200, Ks=(16,), repetitions=1, methods=("voronoi",))
        rep = testbed.run_error_experiment(cfg)
        assert rep.lookup("voronoi", 16).K == 16
        with pytest.raises(KeyError):
            rep.lookup("voronoi", 32)

    def test_gamma_at_sup_norm_is_unscaled(self):
        base = testbed.ExperimentConfig(N=300, Ks=(16,), repetitions=1, function="f2", methods=("qmc-avg",))
        g = testbed.f2_sup_norm(2) ** 2
        plain = testbed.run_error_experiment(base).rows[0].error
        scaled = testbed.run_scale_experiment(base, (g,)).rows[0].error
        assert scaled == pytest.approx(plain, rel=1e-12)

    def test_scaling_without_noise_is_quadratic(self):
        base = testbed.ExperimentConfig(N=300, Ks=(16,), repetitions=1, function="f1",
                                        methods=("supercompress",), noise_var=0.0)
        rep = testbed.run_scale_experiment(base, (100.0, 10.0))
        assert rep.rows[0].error / rep.rows[1].error == pytest.approx(10.0, rel=1e-9)

    def test_noise_before_scaling_ratio(self):
        base = testbed.ExperimentConfig(N=300, Ks=(16,), repetitions=2, function="f2",
                                        methods=("supercompress",), noise_after_scaling=False)
        rep = testbed.run_scale_experiment(base, (100.0, 10.0))
        assert rep.rows[0].error / rep.rows[1].error == pytest.approx(10.0, rel=1e-9)

    def test_timing_empty(self):
        rep = testbed.run_timing_experiment(testbed.ExperimentConfig(methods=()))
        assert rep.rows == []

    def test_timing_rows(self):
        cfg = testbed.ExperimentConfig(N=500, Ks=(32,), repetitions=1, methods=("supercompress", "voronoi"))
        rep = testbed.run_timing_experiment(cfg)
        assert {r.method for r in rep.rows} == {"supercompress", "voronoi"}
        assert all(r.time > 0 for r in rep.rows)

    def test_experiment_net_high_dim(self):
        net = testbed.experiment_net(2, 4, 3)
        assert net.s == 3 and net.t is not None
