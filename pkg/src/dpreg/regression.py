"""Private least squares fitting, binary regression and linear regression.

All three estimators take the algorithm parameters ``(epsilon, delta)`` and
deliver the guarantee ``(eps^2/2 + eps*sqrt(2 log(1/delta)), delta)``; that
total is divided evenly among the private sub-calls and recombined by basic
composition, which is what ``RegressionEstimate.budget`` reports.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .multivariate import (
    EstimationConfig,
    learn_covariance_hd,
    learn_mean_hd,
    paired_differences,
)
from .privacy import PrivacyBudget, compose, lse_total_budget
from .synthetic import Dataset

INVERTIBILITY_RATIO = 1e-8


class LabelClampWarning(UserWarning):
    """Some labels exceeded the configured bound ``c`` and were clamped."""


@dataclass(frozen=True)
class LseConfig:
    """Parameters shared by :func:`priv_learn_lse` and :func:`priv_learn_binary`.

    ``budget`` holds the algorithm's (epsilon, delta) parameters; the
    guarantee actually delivered is :meth:`total_budget`.
    """

    budget: PrivacyBudget
    kappa: float = 1.0
    c: float = 1.0
    alpha: float = 0.1
    eta: float = 0.1
    gamma: float = 0.05

    def __post_init__(self):
        self.budget.require_usable()
        if not (self.c > 0):
            raise ValueError("c must be positive")
        if not (self.kappa >= 1):
            raise ValueError("kappa must be at least 1")
        for name in ("alpha", "eta", "gamma"):
            value = getattr(self, name)
            if not (0 < value < 1):
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    def total_budget(self) -> PrivacyBudget:
        return lse_total_budget(self.budget.epsilon, self.budget.delta)


@dataclass(frozen=True)
class LinearConfig:
    """Parameters of :func:`priv_learn_linear`.

    ``kappa_z`` bounds the spectrum of the joint covariance of (x, y). When
    omitted it is derived from rough bounds on ||beta|| and sigma_eps as
    2 (beta_bound^2 kappa + max(kappa, noise_bound^2)).
    """

    budget: PrivacyBudget
    kappa: float = 1.0
    alpha: float = 0.1
    eta: float = 0.1
    gamma: float = 0.05
    beta_bound: float = 1.0
    noise_bound: float = 1.0
    kappa_z: Optional[float] = None

    def __post_init__(self):
        self.budget.require_usable()
        if not (self.kappa >= 1):
            raise ValueError("kappa must be at least 1")
        for name in ("alpha", "eta", "gamma"):
            value = getattr(self, name)
            if not (0 < value < 1):
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    def joint_kappa(self) -> float:
        if self.kappa_z is not None:
            return max(1.0, float(self.kappa_z))
        return 2.0 * (self.beta_bound**2 * self.kappa + max(self.kappa, self.noise_bound**2))

    def total_budget(self) -> PrivacyBudget:
        return lse_total_budget(self.budget.epsilon, self.budget.delta)


@dataclass
class RegressionEstimate:
    """``beta_hat`` is ``None`` for the bottom output (singular moment matrix or no release)."""

    beta_hat: Optional[np.ndarray]
    budget: PrivacyBudget
    diagnostics: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)

    @property
    def is_bottom(self) -> bool:
        return self.beta_hat is None


def condition_number(M: np.ndarray) -> float:
    lam = np.linalg.eigvalsh((M + M.T) / 2.0)
    if lam[0] <= 0:
        return math.inf
    return float(lam[-1] / lam[0])


def is_invertible(M: np.ndarray) -> bool:
    """Numerically invertible: lambda_min >= 1e-8 * lambda_max (and positive)."""
    lam = np.linalg.eigvalsh((M + M.T) / 2.0)
    return bool(lam[-1] > 0 and lam[0] >= INVERTIBILITY_RATIO * lam[-1])


def clamp_labels(y: np.ndarray, c: float) -> tuple[np.ndarray, int]:
    over = np.abs(y) > c
    count = int(over.sum())
    if count:
        warnings.warn(f"{count} labels exceed c={c} and were clamped", LabelClampWarning)
        y = np.clip(y, -c, c)
    return y, count


def _solve_or_bottom(M, rhs, budget, diagnostics, moments) -> RegressionEstimate:
    diagnostics["condition_number"] = condition_number(M)
    if not is_invertible(M):
        diagnostics["bottom_reason"] = "singular"
        return RegressionEstimate(None, budget, diagnostics, moments)
    beta = np.linalg.solve(M, rhs)
    if not np.all(np.isfinite(beta)):
        diagnostics["bottom_reason"] = "non-finite"
        return RegressionEstimate(None, budget, diagnostics, moments)
    return RegressionEstimate(beta, budget, diagnostics, moments)


def _no_release(budget, diagnostics, moments) -> RegressionEstimate:
    diagnostics["bottom_reason"] = "no-release"
    return RegressionEstimate(None, budget, diagnostics, moments)


def _diagnostics(stages: list[PrivacyBudget], **extra) -> tuple[PrivacyBudget, dict]:
    budget = compose(stages)
    diag = {"budget_epsilon": budget.epsilon, "budget_delta": budget.delta, "stages": len(stages)}
    diag.update(extra)
    return budget, diag


def priv_learn_lse(data: Dataset, cfg: LseConfig, rng: np.random.Generator) -> RegressionEstimate:
    """Private least squares estimate for bounded labels and Gaussian covariates.

    Three equal-budget sub-calls: covariance of X (on paired differences),
    mean of X, and mean of y*X with spectral bound c^2 kappa. Returns
    ``M^{-1} mean(yX)`` with ``M = Sigma_hat + mu_hat mu_hat^T``.
    """
    X, y = _unpack(data)
    y, clamped = clamp_labels(y, cfg.c)
    stages = cfg.total_budget().split(3)
    budget, diag = _diagnostics(stages, labels_clamped=clamped)

    cov, pre = learn_covariance_hd(paired_differences(X), _est(cfg.kappa, stages[0], cfg.alpha, cfg), rng)
    mean_x, _ = learn_mean_hd(X, _est(cfg.kappa, stages[1], cfg.alpha, cfg), rng)
    yx = y[:, None] * X
    mean_xy, pre_xy = learn_mean_hd(yx, _est(_label_kappa(cfg), stages[2], cfg.eta, cfg), rng)
    diag.update(rounds_cov=pre.rounds, rounds_xy=pre_xy.rounds)
    moments = {"cov_x": cov, "mean_x": mean_x, "mean_xy": mean_xy}
    if mean_x is None or mean_xy is None:
        return _no_release(budget, diag, moments)
    M = cov + np.outer(mean_x, mean_x)
    moments["M"] = M
    return _solve_or_bottom(M, mean_xy, budget, diag, moments)


def priv_learn_binary(data: Dataset, cfg: LseConfig, rng: np.random.Generator) -> RegressionEstimate:
    """The least squares pipeline with the covariate mean fixed at zero.

    Targets k * beta for labels from a GLM. The budget third meant for the
    covariate mean is shared equally by the two remaining sub-calls.
    """
    X, y = _unpack(data)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary regression needs labels in {-1, +1}")
    stages = cfg.total_budget().split(2)
    budget, diag = _diagnostics(stages, labels_clamped=0)

    cov, pre = learn_covariance_hd(X, _est(cfg.kappa, stages[0], cfg.alpha, cfg), rng)
    mean_xy, pre_xy = learn_mean_hd(y[:, None] * X, _est(cfg.kappa, stages[1], cfg.eta, cfg), rng)
    diag.update(rounds_cov=pre.rounds, rounds_xy=pre_xy.rounds)
    moments = {"cov_x": cov, "mean_x": np.zeros(X.shape[1]), "mean_xy": mean_xy, "M": cov}
    if mean_xy is None:
        return _no_release(budget, diag, moments)
    return _solve_or_bottom(cov, mean_xy, budget, diag, moments)


def priv_learn_linear(data: Dataset, cfg: LinearConfig, rng: np.random.Generator) -> RegressionEstimate:
    """Private coefficient of a Gaussian linear model from the joint covariance of (x, y).

    The first half of the rows estimates the joint covariance, whose last
    column gives Sigma beta; the second half estimates Sigma. Both estimates
    use paired differences so the covariate mean may be arbitrary.
    """
    X, y = _unpack(data)
    n, d = X.shape
    half = n // 2
    stages = cfg.total_budget().split(2)
    budget, diag = _diagnostics(stages, kappa_z=cfg.joint_kappa())

    Z = np.column_stack([X[:half], y[:half]])
    joint_cfg = EstimationConfig(cfg.joint_kappa(), stages[0], cfg.alpha, cfg.gamma)
    joint, pre_z = learn_covariance_hd(paired_differences(Z), joint_cfg, rng)
    sigma_beta = joint[:d, d]
    cov, pre_x = learn_covariance_hd(
        paired_differences(X[half:]), EstimationConfig(cfg.kappa, stages[1], cfg.alpha, cfg.gamma), rng
    )
    diag.update(rounds_joint=pre_z.rounds, rounds_cov=pre_x.rounds)
    moments = {"joint_cov": joint, "sigma_beta": sigma_beta, "cov_x": cov}
    return _solve_or_bottom(cov, sigma_beta, budget, diag, moments)


def _est(kappa, budget, accuracy, cfg) -> EstimationConfig:
    return EstimationConfig(kappa=kappa, budget=budget, alpha=accuracy, gamma=cfg.gamma)


def _label_kappa(cfg: LseConfig) -> float:
    return max(1.0, cfg.c**2 * cfg.kappa)


def _unpack(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if data.y is None:
        raise ValueError("regression needs labels")
    return data.X, data.y


# --------------------------------------------------------------------------
# joint covariance of (x, y) under the linear model
# --------------------------------------------------------------------------


def block_sigma_prime(Sigma, beta, sigma_eps2: float) -> np.ndarray:
    """[[Sigma, Sigma beta], [beta^T Sigma, sigma_eps2 + beta^T Sigma beta]]."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    beta = np.asarray(beta, dtype=float).ravel()
    d = Sigma.shape[0]
    if Sigma.shape != (d, d):
        raise ValueError(f"Sigma must be square, got shape {Sigma.shape}")
    if beta.shape != (d,):
        raise ValueError(f"beta must have length {d}, got {beta.size}")
    if not (sigma_eps2 >= 0):
        raise ValueError("sigma_eps2 must be non-negative")
    sb = Sigma @ beta
    out = np.empty((d + 1, d + 1))
    out[:d, :d] = Sigma
    out[:d, d] = sb
    out[d, :d] = sb
    out[d, d] = sigma_eps2 + beta @ sb
    return out


def lambda_max_bound(Sigma, beta, sigma_eps2: float) -> float:
    """2 (beta^T Sigma beta + max(lambda_max(Sigma), sigma_eps2))."""
    Sigma = np.asarray(Sigma, dtype=float)
    beta = np.asarray(beta, dtype=float)
    kappa = float(np.linalg.eigvalsh(Sigma)[-1])
    return 2.0 * (float(beta @ Sigma @ beta) + max(kappa, sigma_eps2))


def lambda_min_bound(Sigma, beta, sigma_eps2: float) -> float:
    """sigma_eps2 lambda_min(Sigma) / (sigma_eps2 + beta^T Sigma beta + lambda_min(Sigma))."""
    Sigma = np.asarray(Sigma, dtype=float)
    beta = np.asarray(beta, dtype=float)
    lam = float(np.linalg.eigvalsh(Sigma)[0])
    return sigma_eps2 * lam / (sigma_eps2 + float(beta @ Sigma @ beta) + lam)


def lambda_min_isotropic(kappa: float, beta, sigma_eps2: float) -> float:
    """Smallest eigenvalue of the joint covariance when Sigma = kappa I.

    It is the smaller root of t^2 - 2a t + kappa sigma_eps2 with
    2a = sigma_eps2 + kappa ||beta||^2 + kappa, written in the
    cancellation-free form kappa sigma_eps2 / (a + sqrt(a^2 - kappa sigma_eps2)).
    """
    b2 = float(np.dot(beta, beta))
    a = (sigma_eps2 + kappa * b2 + kappa) / 2.0
    prod = kappa * sigma_eps2
    return prod / (a + math.sqrt(max(a * a - prod, 0.0)))
