"""Private covariance and mean estimation for (sub-)gaussian vectors.

Building blocks, bottom-up:

* :func:`naive_pce` - truncate rows, add a symmetric Gaussian matrix to the
  empirical second moment, project onto the PSD cone.
* :func:`learn_preconditioner` - repeated ``naive_pce`` rounds that shrink the
  dominant directions until the spectral bound falls below ``C0``.
* :func:`learn_covariance_hd` / :func:`learn_mean_hd` - estimation in the
  preconditioned coordinates, mapped back with ``A^{-1}``.

Covariance routines assume zero-mean input; use :func:`paired_differences`
first when the mean is unknown.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .privacy import (
    PrivacyBudget,
    ZcdpBudget,
    compose,
    per_step_budget,
    symmetric_gaussian_matrix,
)
from .univariate import UnivariateMeanConfig, estimate_mean_1d

C0 = 4.0
SHRINK = 0.7
UPPER_CONDITIONING = 1000.0
EIG_TOL = 1e-10


class RankDeficientWarning(UserWarning):
    """Fewer samples than dimensions: the empirical second moment is singular."""


@dataclass(frozen=True)
class EstimationConfig:
    kappa: float
    budget: PrivacyBudget
    alpha: float = 0.1
    gamma: float = 0.05

    def __post_init__(self):
        if not (self.kappa >= 1):
            raise ValueError(f"kappa must be at least 1, got {self.kappa}")
        if not (0 < self.alpha < 1):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (0 < self.gamma < 1):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        self.budget.require_usable()


@dataclass(frozen=True)
class Preconditioner:
    """Symmetric ``A`` with (w.h.p.) I <= A Sigma A <= 1000 I.

    ``kappa_out`` is the spectral bound the last round certified for the
    preconditioned data; later stages calibrate against it.
    """

    A: np.ndarray
    kappa_in: float
    kappa_out: float
    rounds: int

    @classmethod
    def identity(cls, d: int, kappa: float) -> Preconditioner:
        return cls(np.eye(d), kappa, kappa, 0)

    def apply(self, samples: np.ndarray) -> np.ndarray:
        """Rows ``A x_i`` (A is symmetric)."""
        return np.asarray(samples) @ self.A


@dataclass(frozen=True)
class GaussianEstimate:
    mean_hat: np.ndarray
    cov_hat: np.ndarray
    preconditioner: Preconditioner
    budget_spent: PrivacyBudget


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def as_zcdp(budget: PrivacyBudget | ZcdpBudget) -> ZcdpBudget:
    if isinstance(budget, ZcdpBudget):
        return budget
    return ZcdpBudget.from_approx_dp(budget)


def paired_differences(samples: np.ndarray) -> np.ndarray:
    """(x_{2i} - x_{2i-1}) / sqrt(2): zero-mean rows with the same covariance."""
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0] // 2
    return (samples[1 : 2 * m : 2] - samples[0 : 2 * m : 2]) / math.sqrt(2.0)


def truncation_radius_sq(kappa: float, d: int, n: int, gamma: float) -> float:
    """Squared norm kappa * d * log(n / gamma) beyond which rows are projected back."""
    return kappa * d * math.log(n / gamma)


def truncate_rows(samples: np.ndarray, radius_sq: float) -> tuple[np.ndarray, int]:
    """Project every row onto the ball of squared radius ``radius_sq``."""
    samples = np.asarray(samples, dtype=float)
    norms_sq = np.einsum("ij,ij->i", samples, samples)
    over = norms_sq > radius_sq
    if not over.any():
        return samples, 0
    scale = np.ones_like(norms_sq)
    scale[over] = np.sqrt(radius_sq / norms_sq[over])
    return samples * scale[:, None], int(over.sum())


def covariance_sensitivity(kappa: float, d: int, n: int, gamma: float) -> float:
    """Frobenius bound on the change of the truncated second moment under one swap."""
    return 2.0 * truncation_radius_sq(kappa, d, n, gamma) / n


def psd_projection(M: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm; eigenvalues below EIG_TOL*||M|| become 0."""
    M = np.asarray(M, dtype=float)
    sym = (M + M.T) / 2.0
    lam, U = np.linalg.eigh(sym)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    lam = np.where(lam > EIG_TOL * scale, lam, 0.0)
    out = (U * lam) @ U.T
    return (out + out.T) / 2.0


def preconditioner_rounds(kappa: float) -> int:
    """Number of 0.7-shrink rounds needed to bring ``kappa`` down to C0."""
    if kappa <= C0:
        return 0
    return math.ceil(math.log(kappa / C0) / math.log(1.0 / SHRINK))


# --------------------------------------------------------------------------
# NaivePCE
# --------------------------------------------------------------------------


def naive_pce(
    samples: np.ndarray,
    kappa: float,
    budget: PrivacyBudget | ZcdpBudget,
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Private second moment of zero-mean rows with covariance <= kappa * I.

    The Gaussian noise has standard deviation ``sensitivity / sqrt(2 rho)``
    so the release is rho-zCDP; an approximate-DP ``budget`` is first
    converted to the largest rho it affords.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ValueError("samples must be a 2-d array")
    n, d = samples.shape
    if n == 0:
        raise ValueError("no samples")
    if kappa < 1:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    if n < d:
        warnings.warn(f"n={n} < d={d}: empirical covariance is rank deficient", RankDeficientWarning)
    rho = as_zcdp(budget).rho

    truncated, _ = truncate_rows(samples, truncation_radius_sq(kappa, d, n, gamma))
    emp = truncated.T @ truncated / n
    if not math.isinf(rho):
        sigma = covariance_sensitivity(kappa, d, n, gamma) / math.sqrt(2.0 * rho)
        emp = emp + symmetric_gaussian_matrix(d, sigma, rng)
    return psd_projection(emp)


# --------------------------------------------------------------------------
# preconditioner
# --------------------------------------------------------------------------


def _symmetric_factor(B: np.ndarray) -> np.ndarray:
    """Symmetric square root of B^T B (polar factor); (.)Sigma(.) keeps B Sigma B^T's spectrum."""
    w, V = np.linalg.eigh(B.T @ B)
    A = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return (A + A.T) / 2.0


def _shrink_rounds(samples, kappa, rho_round, rounds, gamma, rng):
    d = samples.shape[1]
    B = np.eye(d)
    kappa_j = float(kappa)
    for _ in range(rounds):
        est = naive_pce(samples @ B.T, kappa_j, rho_round, gamma, rng)
        lam, U = np.linalg.eigh(est)
        kappa_next = SHRINK * kappa_j
        big = lam > kappa_j / 2.0
        if big.any():
            Ub = U[:, big]
            factors = np.sqrt(kappa_next / lam[big])
            B = (np.eye(d) + (Ub * (factors - 1.0)) @ Ub.T) @ B
        kappa_j = kappa_next
    return _symmetric_factor(B), kappa_j


def learn_preconditioner(
    samples: np.ndarray,
    kappa: float,
    budget: PrivacyBudget | ZcdpBudget,
    gamma: float,
    rng: np.random.Generator,
) -> Preconditioner:
    """Private symmetric preconditioner for zero-mean rows with I <= Sigma <= kappa I.

    Each round runs :func:`naive_pce` on the current rescaled rows and shrinks
    every direction whose estimated variance exceeds half the current bound,
    after which the bound drops by a factor 0.7. The budget is split evenly
    over the rounds. If ``kappa`` understates the true spectral norm the
    output carries no guarantee.
    """
    samples = np.asarray(samples, dtype=float)
    d = samples.shape[1]
    if kappa < 1:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    rounds = preconditioner_rounds(kappa)
    if rounds == 0:
        return Preconditioner.identity(d, kappa)
    rho_round = ZcdpBudget(as_zcdp(budget).rho / rounds)
    A, kappa_out = _shrink_rounds(samples, kappa, rho_round, rounds, gamma, rng)
    return Preconditioner(A, float(kappa), kappa_out, rounds)


# --------------------------------------------------------------------------
# covariance and mean
# --------------------------------------------------------------------------


def learn_covariance_hd(
    samples: np.ndarray, cfg: EstimationConfig, rng: np.random.Generator
) -> tuple[np.ndarray, Preconditioner]:
    """Private covariance of zero-mean (sub-)gaussian rows.

    zCDP budget is shared evenly by every ``naive_pce`` call: one per
    preconditioner round plus the final pass on the preconditioned rows.
    """
    samples = np.asarray(samples, dtype=float)
    n, d = samples.shape
    rounds = preconditioner_rounds(cfg.kappa)
    rho = as_zcdp(cfg.budget).rho
    rho_call = ZcdpBudget(rho / (rounds + 1))
    if rounds:
        A, kappa_out = _shrink_rounds(samples, cfg.kappa, rho_call, rounds, cfg.gamma, rng)
        pre = Preconditioner(A, float(cfg.kappa), kappa_out, rounds)
    else:
        pre = Preconditioner.identity(d, cfg.kappa)
    inner = naive_pce(pre.apply(samples), max(1.0, pre.kappa_out), rho_call, cfg.gamma, rng)
    A_inv = np.linalg.inv(pre.A)
    cov = A_inv @ inner @ A_inv
    return (cov + cov.T) / 2.0, pre


def learn_mean_hd(
    samples: np.ndarray, cfg: EstimationConfig, rng: np.random.Generator
) -> tuple[np.ndarray | None, Preconditioner]:
    """Private mean of (sub-)gaussian rows with unknown, unbounded mean.

    When a preconditioner is needed (kappa > C0) the first ``floor(2n/3)``
    rows are paired into differences to learn it with half the budget, and
    the remaining rows feed the coordinate-wise estimates. Otherwise A = I
    and all rows and all budget go to the coordinates. Returns ``None`` for
    the mean if any coordinate fails to release.
    """
    samples = np.asarray(samples, dtype=float)
    n, d = samples.shape
    if preconditioner_rounds(cfg.kappa) == 0:
        pre = Preconditioner.identity(d, cfg.kappa)
        rows, coord_total = samples, cfg.budget
    else:
        n_pre = (2 * n) // 3
        pre_budget, coord_total = cfg.budget.split(2)
        pre = learn_preconditioner(
            paired_differences(samples[:n_pre]), cfg.kappa, pre_budget, cfg.gamma, rng
        )
        rows = samples[n_pre:]

    coord_cfg = UnivariateMeanConfig(
        variance_upper=max(1.0, pre.kappa_out),
        budget=per_step_budget(coord_total, d),
        gamma=cfg.gamma,
    )
    projected = pre.apply(rows)
    streams = rng.spawn(d)
    estimates = []
    for j in range(d):
        est = estimate_mean_1d(projected[:, j], coord_cfg, streams[j])
        if est is None:
            return None, pre
        estimates.append(est)
    return np.linalg.solve(pre.A, np.array(estimates)), pre


def learn_gaussian_hd(
    samples: np.ndarray, cfg: EstimationConfig, rng: np.random.Generator
) -> GaussianEstimate | None:
    """Mean and covariance of a Gaussian with unknown mean; budget split evenly."""
    samples = np.asarray(samples, dtype=float)
    cov_budget, mean_budget = cfg.budget.split(2)
    cov, pre = learn_covariance_hd(paired_differences(samples), replace(cfg, budget=cov_budget), rng)
    mean, _ = learn_mean_hd(samples, replace(cfg, budget=mean_budget), rng)
    if mean is None:
        return None
    return GaussianEstimate(mean, cov, pre, compose([cov_budget, mean_budget]))
