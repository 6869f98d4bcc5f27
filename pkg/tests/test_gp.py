import math

import numpy as np
import pytest

from peftbo import gp
from peftbo.errors import DimensionError, InvalidConfigurationError


def _fd_gradient(func, vec, h=1e-5):
    out = np.zeros_like(vec)
    for i in range(len(vec)):
        e = np.zeros_like(vec)
        e[i] = h
        out[i] = (
            func(gp.KernelHyperparams.from_vector(vec + e))
            - func(gp.KernelHyperparams.from_vector(vec - e))
        ) / (2 * h)
    return out


def _random_problem(seed, n=12, d=4):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    y = np.sin(3 * X[:, 0]) + 0.5 * X[:, min(2, d - 1)] + 0.05 * rng.standard_normal(n)
    h = gp.KernelHyperparams(
        log_outputscale=rng.uniform(-0.5, 0.5),
        log_noise=math.log(0.01),
        log_inv_sq_lengthscales=np.log(rng.uniform(0.5, 2.0, d) ** 2),
        log_tau=math.log(0.2),
    )
    return h, X, y


class TestLogMarginalLikelihood:
    def test_single_observation_closed_form(self):
        # noise floored at 1e-6, so aim for exactly 1.0 total
        h = gp.KernelHyperparams(
            log_outputscale=math.log(1.7),
            log_noise=math.log(1.0 - gp.NOISE_FLOOR),
            log_inv_sq_lengthscales=np.zeros(3),
            log_tau=0.0,
        )
        X = np.array([[0.3, 0.4, 0.5]])
        y = np.array([0.0])
        expected = -0.5 * math.log(2 * math.pi * (1.7 + 1.0))
        assert gp.log_marginal_likelihood(h, X, y) == pytest.approx(expected, abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        for seed in range(3):
            h, X, y = _random_problem(seed)
            grad = gp.log_marginal_likelihood_grad(h, X, y)
            fd = _fd_gradient(lambda hp: gp.log_marginal_likelihood(hp, X, y), h.as_vector())
            rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
            assert rel.max() < 1e-4

    def test_posterior_gradient_matches_finite_differences(self):
        h, X, y = _random_problem(7)
        from peftbo.gp import log_posterior, log_posterior_grad

        grad = log_posterior_grad(h, X, y)
        fd = _fd_gradient(lambda hp: log_posterior(hp, X, y), h.as_vector())
        rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
        assert rel.max() < 1e-4

    def test_duplicate_point_never_raises_perplexity(self):
        # adding an identical (point, value) pair should not make the
        # average per-point log density worse
        for seed in (0, 1, 2):
            h, X, y = _random_problem(seed, n=6, d=3)
            base = gp.log_marginal_likelihood(h, X, y) / len(y)
            X2 = np.vstack([X, X[0]])
            y2 = np.append(y, y[0])
            doubled = gp.log_marginal_likelihood(h, X2, y2) / len(y2)
            assert doubled >= base - 1e-9

    def test_dimension_mismatch(self):
        h, X, y = _random_problem(0)
        with pytest.raises(DimensionError):
            gp.log_marginal_likelihood(h, X[:, :2], y)
        with pytest.raises(DimensionError):
            gp.log_marginal_likelihood(h, X, y[:-1])


class TestFit:
    def test_two_point_interpolation(self):
        ens = gp.fit(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), restarts=8, rng_seed=1)
        mean, _ = gp.predict(ens[0], np.array([0.0]))
        assert abs(mean - 0.0) < 1e-3
        mean1, _ = gp.predict(ens[0], np.array([1.0]))
        assert abs(mean1 - 1.0) < 1e-3

    def test_sparsity_recovery(self):
        # 15 dims, only dims 2 and 10 matter
        passed = 0
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            X = rng.uniform(0, 1, (60, 15))
            y = np.sin(2 * np.pi * X[:, 2]) + 2.0 * X[:, 10] ** 2
            ens = gp.fit(X, y, restarts=8, rng_seed=seed)
            rhos = np.array([m.hyperparams.inv_sq_lengthscales for m in ens])
            relevant = np.median(rhos[:, [2, 10]])
            rest = [i for i in range(15) if i not in (2, 10)]
            irrelevant = np.median(rhos[:, rest])
            if relevant >= 10 * irrelevant:
                passed += 1
        assert passed >= 4

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (20, 5))
        y = X[:, 0] + np.sin(X[:, 1])
        a = gp.fit(X, y, restarts=4, rng_seed=9)
        b = gp.fit(X, y, restarts=4, rng_seed=9)
        for ma, mb in zip(a, b):
            assert np.array_equal(
                ma.hyperparams.as_vector(), mb.hyperparams.as_vector()
            )
            assert np.array_equal(ma.alpha, mb.alpha)

    def test_constant_values_absorbed_by_noise(self):
        X = np.array([[0.0], [0.5], [1.0]])
        ens = gp.fit(X, np.full(3, 2.5), restarts=2, rng_seed=0)
        mean, var = gp.predict(ens[0], np.array([0.25]))
        assert mean == pytest.approx(2.5, abs=1e-6)

    def test_preconditions(self):
        with pytest.raises(InvalidConfigurationError):
            gp.fit(np.array([[0.0]]), np.array([1.0]))
        with pytest.raises(DimensionError):
            gp.fit(np.array([[0.0], [1.0]]), np.array([1.0]))


class TestPredict:
    def test_training_point_variance_bounded_by_noise(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, (15, 3))
        y = X[:, 0] * 2
        ens = gp.fit(X, y, restarts=4, rng_seed=0)
        model = ens[0]
        _, var = gp.predict(model, X)
        noise_raw = model.hyperparams.noise * model.y_sd**2
        assert (var <= noise_raw + 1e-6 * model.y_sd**2 + 1e-12).all()

    def test_far_point_variance_approaches_outputscale(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 0.2, (10, 2))
        y = X.sum(axis=1)
        ens = gp.fit(X, y, restarts=4, rng_seed=3)
        model = ens[0]
        # place the probe many lengthscales away from all data
        rho_max = model.hyperparams.inv_sq_lengthscales.max()
        offset = 12.0 / math.sqrt(max(rho_max, 1e-12))
        probe = X[0] + offset
        _, var = gp.predict(model, probe)
        outputscale_raw = model.hyperparams.outputscale * model.y_sd**2
        assert var >= 0.9 * outputscale_raw

    def test_equidistant_points_get_equal_means(self):
        h = gp.KernelHyperparams(0.0, math.log(0.01), np.log([1.0, 4.0]), 0.0)
        model = gp.condition(h, np.array([[0.5, 0.5], [0.9, 0.2]]), np.array([1.0, -0.3]))
        # equidistant from the first training point in the scaled metric
        p1 = np.array([0.5 + 0.2, 0.5])
        p2 = np.array([0.5, 0.5 + 0.1])  # rho 4 means half the distance
        # distance to the second training point also matters: pick points
        # symmetric about both -> use a single-training-point model instead
        model = gp.condition(h, np.array([[0.5, 0.5]]), np.array([1.0]))
        m1, _ = gp.predict(model, p1)
        m2, _ = gp.predict(model, p2)
        assert m1 == pytest.approx(m2, abs=1e-12)

    def test_standardization_roundtrip(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (25, 4))
        y = 40.0 + 13.0 * np.sin(4 * X[:, 0]) + 5 * X[:, 1]
        ens = gp.fit(X, y, restarts=4, rng_seed=2)
        mean, _ = gp.predict(ens[0], X)
        noise_sd_raw = math.sqrt(ens[0].hyperparams.noise) * ens[0].y_sd
        assert np.abs(mean - y).max() <= max(5 * noise_sd_raw, 1e-3 * ens[0].y_sd)

    def test_objective_invariant_under_dimension_permutation(self):
        h, X, y = _random_problem(11, n=10, d=5)
        perm = [3, 1, 4, 0, 2]
        h_perm = gp.KernelHyperparams(
            h.log_outputscale,
            h.log_noise,
            h.log_inv_sq_lengthscales[perm],
            h.log_tau,
        )
        a = gp.log_posterior(h, X, y)
        b = gp.log_posterior(h_perm, X[:, perm], y)
        assert a == pytest.approx(b, rel=1e-12)


class TestSamplePosterior:
    def test_zero_variance_samples_equal_means(self):
        h = gp.KernelHyperparams(0.0, math.log(1e-12), np.log([2.0]), 0.0)
        X = np.array([[0.0], [0.5], [1.0]])
        y = np.array([1.0, 3.0, 2.0])
        model = gp.condition(h, X, y)
        draws = gp.sample_posterior([model], X, 64, seed=4)
        means, _ = gp.predict(model, X)
        # jitter-limited: the escalation floor bounds deviations
        assert np.abs(draws - means).max() < 0.02 * model.y_sd

    def test_sample_mean_within_standard_errors(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 1, (8, 2))
        y = X[:, 0] + 0.2 * rng.standard_normal(8)
        ens = gp.fit(X, y, restarts=2, rng_seed=0)
        probe = np.array([[0.2, 0.9], [0.9, 0.1]])
        n = 10_000
        draws = gp.sample_posterior(ens, probe, n, seed=11)
        for i, model in enumerate(ens):
            mean, var = gp.predict(model, probe)
            se = np.sqrt(var / n)
            assert (np.abs(draws[i].mean(axis=0) - mean) <= 3 * se + 1e-9).all()

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 1, (6, 2))
        y = X.sum(axis=1)
        ens = gp.fit(X, y, restarts=2, rng_seed=1)
        a = gp.sample_posterior(ens, X, 16, seed=3)
        b = gp.sample_posterior(ens, X, 16, seed=3)
        assert np.array_equal(a, b)

    def test_variance_nonnegative_everywhere(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, (30, 4))
        y = np.cos(5 * X[:, 0])
        ens = gp.fit(X, y, restarts=2, rng_seed=4)
        probes = rng.uniform(-0.5, 1.5, (200, 4))
        _, var = gp.predict(ens[0], probes)
        assert (var >= 0).all()


def test_jitter_ladder_exhaustion_raises_numerical_error():
    from peftbo.errors import NumericalError
    from peftbo.gp import _chol_with_ladder

    with pytest.raises(NumericalError):
        _chol_with_ladder(-np.eye(4))
    # mildly indefinite matrices get rescued by the ladder
    K = np.eye(3)
    K[0, 0] = -1e-7
    L, jitter = _chol_with_ladder(K)
    assert jitter > 0
