import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpreg.oracles import plugin_binary, plugin_linear, plugin_lse
from dpreg.privacy import PrivacyBudget, lse_total_budget
from dpreg.regression import (
    LabelClampWarning,
    LinearConfig,
    LseConfig,
    block_sigma_prime,
    is_invertible,
    lambda_max_bound,
    lambda_min_bound,
    lambda_min_isotropic,
    priv_learn_binary,
    priv_learn_linear,
    priv_learn_lse,
)
from dpreg.synthetic import Dataset, GeneratorSpec, generate

INF = PrivacyBudget(math.inf, 1e-6)
ONE = PrivacyBudget(1.0, 1e-6)


def lse_data(n, seed, d=3):
    spec = GeneratorSpec(d=d, n=n, setting="lse", mu=[0.5, -0.5, 0.25][:d], beta=[1.0, -0.5, 0.0][:d], seed=seed)
    return generate(spec)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            LseConfig(ONE, c=0.0)
        with pytest.raises(ValueError):
            LseConfig(ONE, kappa=0.5)
        with pytest.raises(ValueError):
            LseConfig(ONE, eta=1.5)
        with pytest.raises(ValueError):
            LinearConfig(PrivacyBudget(1.0, 0.0))

    def test_joint_kappa_default(self):
        cfg = LinearConfig(ONE, kappa=1.0, beta_bound=math.sqrt(2), noise_bound=0.5)
        assert cfg.joint_kappa() == pytest.approx(6.0)
        assert LinearConfig(ONE, kappa_z=3.0).joint_kappa() == 3.0


class TestLse:
    def test_zero_response(self):
        data = lse_data(2000, 0)
        data = Dataset(data.X, np.zeros(data.n))
        est = priv_learn_lse(data, LseConfig(INF, kappa=2.0), np.random.default_rng(0))
        assert np.allclose(est.beta_hat, 0.0)

    def test_degenerate_matches_plugin(self):
        data = lse_data(5000, 1)
        est = priv_learn_lse(data, LseConfig(INF, kappa=2.0, c=1.0), np.random.default_rng(0))
        ref = plugin_lse(data.X, data.y, 2.0, 1.0, 0.05)
        assert np.allclose(est.beta_hat, ref, rtol=1e-6, atol=1e-9)

    def test_degenerate_with_preconditioned_label_mean(self):
        data = lse_data(6000, 2)
        cfg = LseConfig(INF, kappa=3.0, c=2.0)  # c^2 kappa = 12 needs a preconditioner
        est = priv_learn_lse(data, cfg, np.random.default_rng(0))
        assert est.diagnostics["rounds_xy"] > 0
        assert np.allclose(est.beta_hat, plugin_lse(data.X, data.y, 3.0, 2.0, 0.05), rtol=1e-6)

    def test_accuracy(self):
        data = lse_data(100000, 3)
        est = priv_learn_lse(data, LseConfig(ONE, kappa=2.0), np.random.default_rng(1))
        ref = plugin_lse(data.X, data.y, 2.0, 1.0, 0.05)
        assert np.linalg.norm(est.beta_hat - ref) < 0.1

    def test_budget_reported(self):
        data = lse_data(3000, 4)
        est = priv_learn_lse(data, LseConfig(PrivacyBudget(0.7, 1e-5), kappa=2.0), np.random.default_rng(0))
        target = lse_total_budget(0.7, 1e-5)
        assert est.budget.epsilon == pytest.approx(target.epsilon, rel=1e-15)
        assert est.budget.delta == pytest.approx(target.delta, rel=1e-15)
        assert est.diagnostics["budget_epsilon"] == est.budget.epsilon

    def test_label_clamping(self):
        data = lse_data(3000, 5)
        y = data.y.copy()
        y[:7] = 5.0
        with pytest.warns(LabelClampWarning):
            est = priv_learn_lse(Dataset(data.X, y), LseConfig(ONE, kappa=2.0), np.random.default_rng(0))
        assert est.diagnostics["labels_clamped"] == 7

    def test_bottom_on_singular_moment(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(4000, 1))
        X = np.hstack([x, x])
        est = priv_learn_lse(Dataset(X, np.tanh(x[:, 0])), LseConfig(INF), rng)
        assert est.is_bottom and est.diagnostics["bottom_reason"] == "singular"

    def test_bottom_on_no_release(self):
        X = np.column_stack([np.arange(60) * 1e4, np.zeros(60)])
        est = priv_learn_lse(Dataset(X, np.zeros(60)), LseConfig(ONE), np.random.default_rng(0))
        assert est.is_bottom and est.diagnostics["bottom_reason"] == "no-release"

    def test_requires_labels(self):
        with pytest.raises(ValueError):
            priv_learn_lse(Dataset(np.ones((20, 2))), LseConfig(ONE), np.random.default_rng(0))


class TestBinary:
    def data(self, beta, n=20000, seed=0):
        return generate(GeneratorSpec(d=len(beta), n=n, setting="binary", beta=beta, seed=seed))

    def test_rejects_non_binary_labels(self):
        data = lse_data(100, 0)
        with pytest.raises(ValueError):
            priv_learn_binary(data, LseConfig(ONE), np.random.default_rng(0))

    def test_degenerate_matches_plugin(self):
        data = self.data([1.0, 0.5, 0.0])
        est = priv_learn_binary(data, LseConfig(INF), np.random.default_rng(0))
        assert np.allclose(est.beta_hat, plugin_binary(data.X, data.y, 1.0, 0.05), rtol=1e-6)

    def test_two_stage_budget(self):
        est = priv_learn_binary(self.data([1.0, 0.0]), LseConfig(ONE), np.random.default_rng(0))
        assert est.diagnostics["stages"] == 2
        assert est.budget.epsilon == pytest.approx(lse_total_budget(1.0, 1e-6).epsilon, rel=1e-15)

    def test_label_flip_negates_without_noise(self):
        data = self.data([1.0, -1.0, 0.5])
        a = priv_learn_binary(data, LseConfig(INF), np.random.default_rng(3))
        b = priv_learn_binary(Dataset(data.X, -data.y), LseConfig(INF), np.random.default_rng(3))
        assert np.allclose(a.beta_hat, -b.beta_hat, rtol=1e-12, atol=1e-14)

    def test_label_flip_distribution(self):
        data = self.data([1.0, 0.0], n=20000, seed=1)
        flipped = Dataset(data.X, -data.y)
        a = np.mean([priv_learn_binary(data, LseConfig(ONE), np.random.default_rng(s)).beta_hat for s in range(20)], axis=0)
        b = np.mean([priv_learn_binary(flipped, LseConfig(ONE), np.random.default_rng(s)).beta_hat for s in range(20)], axis=0)
        assert np.allclose(a, -b, atol=0.03)

    def test_sharper_link_gives_larger_norm(self):
        norms = []
        for lam in (2.0, 20.0):
            spec = GeneratorSpec(d=2, n=50000, setting="binary", beta=[1.0, 0.0], link="smoothed-sign", link_lambda=lam, seed=9)
            data = generate(spec)
            est = priv_learn_binary(data, LseConfig(ONE), np.random.default_rng(9))
            norms.append(np.linalg.norm(est.beta_hat))
        assert norms[1] > norms[0]


class TestLinear:
    def data(self, beta, sigma_eps, n, seed=0, mu=None):
        return generate(GeneratorSpec(d=len(beta), n=n, setting="linear", beta=beta, sigma_eps=sigma_eps, mu=mu, seed=seed))

    def test_zero_beta(self):
        data = self.data([0.0, 0.0, 0.0], 1.0, 100000)
        est = priv_learn_linear(data, LinearConfig(ONE), np.random.default_rng(0))
        assert np.linalg.norm(est.beta_hat) < 0.1

    def test_degenerate_matches_plugin(self):
        data = self.data([1.0, -1.0, 0.0], 0.5, 8000, mu=[3.0, -2.0, 1.0])
        cfg = LinearConfig(INF, beta_bound=math.sqrt(2), noise_bound=0.5)
        est = priv_learn_linear(data, cfg, np.random.default_rng(0))
        ref = plugin_linear(data.X, data.y, 1.0, cfg.joint_kappa(), 0.05)
        assert np.allclose(est.beta_hat, ref, rtol=1e-6)

    def test_binary_labels_run(self):
        data = generate(GeneratorSpec(d=2, n=4000, setting="binary", beta=[1.0, 0.0]))
        est = priv_learn_linear(data, LinearConfig(ONE), np.random.default_rng(0))
        assert est.beta_hat is not None

    def test_unknown_mean_ok(self):
        data = self.data([1.0, 2.0], 0.5, 100000, mu=[1e3, -1e3])
        est = priv_learn_linear(data, LinearConfig(ONE, beta_bound=3.0, noise_bound=0.5), np.random.default_rng(0))
        assert np.linalg.norm(est.beta_hat - [1.0, 2.0]) < 0.2


class TestBlockMatrix:
    def test_trivial(self):
        assert np.array_equal(block_sigma_prime(np.eye(3), np.zeros(3), 1.0), np.eye(4))

    def test_last_column(self):
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        beta = np.array([1.0, -2.0])
        M = block_sigma_prime(S, beta, 0.25)
        assert np.allclose(M[:2, 2], S @ beta)
        assert M[2, 2] == pytest.approx(0.25 + beta @ S @ beta)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            block_sigma_prime(np.eye(3), np.ones(2), 1.0)
        with pytest.raises(ValueError):
            block_sigma_prime(np.ones((2, 3)), np.ones(2), 1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.floats(1.0, 50.0), st.integers(0, 2**31), st.floats(0.01, 10.0))
    def test_isotropic_closed_form(self, d, kappa, seed, sigma_eps):
        beta = np.random.default_rng(seed).normal(size=d) * 2
        lam = np.linalg.eigvalsh(block_sigma_prime(kappa * np.eye(d), beta, sigma_eps**2))
        assert lambda_min_isotropic(kappa, beta, sigma_eps**2) == pytest.approx(lam[0], rel=1e-8)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31), st.floats(0.1, 3.0))
    def test_eigen_sandwich(self, d, seed, sigma_eps):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        S = (Q * rng.uniform(1, 10, size=d)) @ Q.T
        beta = rng.normal(size=d)
        beta *= rng.uniform(0, 3) / max(np.linalg.norm(beta), 1e-12)
        lam = np.linalg.eigvalsh(block_sigma_prime(S, beta, sigma_eps**2))
        assert lam[-1] <= lambda_max_bound(S, beta, sigma_eps**2) * (1 + 1e-12)
        assert lam[0] >= lambda_min_bound(S, beta, sigma_eps**2) * (1 - 1e-10)


def test_invertibility_threshold():
    assert is_invertible(np.diag([1.0, 1e-7]))
    assert not is_invertible(np.diag([1.0, 1e-9]))
    assert not is_invertible(np.zeros((2, 2)))
