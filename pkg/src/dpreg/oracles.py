"""Non-private reference computations used to check the private estimators.

Nothing here is private. These are ground truths: exact least squares (two
independent solve paths), the Stein scaling factor of a binary GLM (Monte
Carlo and quadrature), the inverse-Wishart mean factor, and plug-in versions
of the regression pipelines that the private code must reproduce when the
mechanisms are switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, linalg
from scipy.stats import norm

from .multivariate import C0
from .synthetic import Link


class SingularDesignError(np.linalg.LinAlgError):
    pass


# --------------------------------------------------------------------------
# least squares
# --------------------------------------------------------------------------


def exact_lse(X: np.ndarray, y: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """(X^T X)^{-1} X^T y through a thin QR factorisation of X."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < d:
        raise SingularDesignError(f"X^T X is singular: n={n} < d={d}")
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.min() <= rtol * max(diag.max(), 1.0):
        raise SingularDesignError("X^T X is singular")
    return linalg.solve_triangular(R, Q.T @ y)


def lse_normal_equations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second solve path: Cholesky on the normal equations."""
    X = np.asarray(X, dtype=float)
    G = X.T @ X
    try:
        factor = linalg.cho_factor(G)
    except linalg.LinAlgError as exc:
        raise SingularDesignError("X^T X is singular") from exc
    return linalg.cho_solve(factor, X.T @ np.asarray(y, dtype=float))


def lse_residual(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """Relative normal-equation residual ||X^T X b - X^T y|| / ||X^T y||."""
    rhs = X.T @ y
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(X.T @ (X @ beta) - rhs) / (scale if scale > 0 else 1.0))


# --------------------------------------------------------------------------
# Stein scaling factor
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFactor:
    k: float
    stderr: float
    expectation: float
    finite_sample: float


def finite_sample_factor(n: int, d: int) -> float:
    """2n / (n - d - 1)."""
    return 2.0 * wishart_factor(n, d)


def _projection_sd(beta, Sigma) -> float:
    beta = np.asarray(beta, dtype=float)
    var = float(beta @ np.asarray(Sigma, dtype=float) @ beta)
    if not math.isfinite(var) or var < 0:
        raise ValueError("beta^T Sigma beta must be finite and non-negative")
    return math.sqrt(var)


def stein_k(
    link: Link,
    beta,
    Sigma,
    n: int,
    d: int,
    mc_samples: int,
    rng: np.random.Generator,
) -> ScalingFactor:
    """Monte Carlo k = 2n/(n-d-1) * E[f'(s)], s ~ N(0, beta^T Sigma beta), with its standard error."""
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be at least 1e4")
    factor = finite_sample_factor(n, d)
    sd = _projection_sd(beta, Sigma)
    draws = np.asarray(link.fprime(sd * rng.standard_normal(mc_samples)), dtype=float)
    mean = float(draws.mean())
    se = float(draws.std(ddof=1) / math.sqrt(mc_samples))
    return ScalingFactor(factor * mean, factor * se, mean, factor)


def stein_expectation_quad(link: Link, beta, Sigma) -> float:
    """E[f'(s)] by adaptive quadrature over [-10 sd, 10 sd] (tolerance 1e-8)."""
    sd = _projection_sd(beta, Sigma)
    if sd == 0:
        return float(link.fprime(np.array(0.0)))

    def integrand(s):
        return float(link.fprime(np.array(s))) * norm.pdf(s, scale=sd)

    value, _ = integrate.quad(integrand, -10 * sd, 10 * sd, epsabs=1e-8, epsrel=1e-8, limit=200, points=[0.0])
    return float(value)


def stein_k_quad(link: Link, beta, Sigma, n: int, d: int) -> float:
    return finite_sample_factor(n, d) * stein_expectation_quad(link, beta, Sigma)


# --------------------------------------------------------------------------
# Wishart
# --------------------------------------------------------------------------


def wishart_factor(n: int, d: int) -> float:
    """n / (n - d - 1): E[(sample second moment)^{-1}] = factor * Sigma^{-1}."""
    if n <= d + 1:
        raise ValueError(f"factor undefined for n={n} <= d+1={d + 1}")
    return n / (n - d - 1)


def wishart_mc(n: int, d: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Average of ((1/n) sum V_i V_i^T)^{-1} over ``trials`` draws of V ~ N(0, I_d)."""
    wishart_factor(n, d)
    V = rng.standard_normal((trials, n, d))
    moments = np.einsum("tni,tnj->tij", V, V) / n
    return np.linalg.inv(moments).mean(axis=0)


# --------------------------------------------------------------------------
# Q diagnostics
# --------------------------------------------------------------------------


def _inv_sqrt(Sigma: np.ndarray) -> np.ndarray:
    lam, U = np.linalg.eigh(np.asarray(Sigma, dtype=float))
    if lam[0] <= 0:
        raise ValueError("Sigma must be positive definite")
    return (U / np.sqrt(lam)) @ U.T


def q_diagnostics(moments: dict, X: np.ndarray, y: np.ndarray, Sigma_true: np.ndarray, mu_true=None):
    """Spectral norm of Sigma^{-1/2} Q1 Sigma^{-1/2} and Euclidean norm of Sigma^{-1/2} Q2.

    Q1 = Sigma_hat + mu_hat mu_hat^T - X^T X / n and Q2 = mean_hat(yX) - X^T y / n,
    where the hats come from ``moments`` (as stored on a RegressionEstimate).
    ``mu_true`` is accepted for symmetry with the generator but does not enter.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    mean_x = moments.get("mean_x")
    mean_x = np.zeros(X.shape[1]) if mean_x is None else mean_x
    W = _inv_sqrt(Sigma_true)
    Q1 = moments["cov_x"] + np.outer(mean_x, mean_x) - X.T @ X / n
    q1 = float(np.linalg.norm(W @ Q1 @ W, 2))
    mean_xy = moments.get("mean_xy")
    q2 = math.nan if mean_xy is None else float(np.linalg.norm(W @ (mean_xy - X.T @ y / n)))
    return q1, q2


@dataclass(frozen=True)
class OracleReport:
    beta_star: np.ndarray
    k_mc: Optional[float] = None
    k_stderr: Optional[float] = None
    q1_norm: Optional[float] = None
    q2_norm: Optional[float] = None


# --------------------------------------------------------------------------
# plug-in pipelines (mechanisms off)
# --------------------------------------------------------------------------


def _needs_preconditioner(kappa: float) -> bool:
    return kappa > C0


def plugin_mean(samples: np.ndarray, kappa: float) -> np.ndarray:
    """Empirical mean of the rows the private mean estimator reserves for its coordinates."""
    n = samples.shape[0]
    start = (2 * n) // 3 if _needs_preconditioner(kappa) else 0
    return samples[start:].mean(axis=0)


def plugin_covariance(zero_mean_rows: np.ndarray, kappa: float, gamma: float) -> np.ndarray:
    """Truncated empirical second moment of zero-mean rows."""
    m, d = zero_mean_rows.shape
    radius = math.sqrt(kappa * d * math.log(m / gamma))
    norms = np.linalg.norm(zero_mean_rows, axis=1)
    rows = zero_mean_rows * np.minimum(1.0, radius / np.maximum(norms, 1e-300))[:, None]
    return rows.T @ rows / m


def _pairs(rows: np.ndarray) -> np.ndarray:
    m = rows.shape[0] // 2
    return np.array([(rows[2 * i + 1] - rows[2 * i]) / math.sqrt(2.0) for i in range(m)]).reshape(m, -1)


def plugin_lse(X, y, kappa: float, c: float, gamma: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.clip(np.asarray(y, dtype=float), -c, c)
    cov = plugin_covariance(_pairs(X), kappa, gamma)
    mu = plugin_mean(X, kappa)
    mean_xy = plugin_mean(y[:, None] * X, max(1.0, c * c * kappa))
    return np.linalg.solve(cov + np.outer(mu, mu), mean_xy)


def plugin_binary(X, y, kappa: float, gamma: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    cov = plugin_covariance(X, kappa, gamma)
    return np.linalg.solve(cov, plugin_mean(y[:, None] * X, kappa))


def plugin_linear(X, y, kappa: float, kappa_z: float, gamma: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    half = n // 2
    Z = np.column_stack([X[:half], y[:half]])
    joint = plugin_covariance(_pairs(Z), kappa_z, gamma)
    cov = plugin_covariance(_pairs(X[half:]), kappa, gamma)
    return np.linalg.solve(cov, joint[:d, d])
