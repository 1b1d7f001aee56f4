"""Privacy accounting, noise mechanisms and the stability-based histogram.

Budgets are plain frozen dataclasses. ``PrivacyBudget`` is an approximate
(epsilon, delta) guarantee, ``ZcdpBudget`` a zero-concentrated one. Every
mechanism takes an explicit ``numpy.random.Generator`` so results are a pure
function of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) differential privacy guarantee.

    ``epsilon`` may be ``math.inf`` to switch the mechanisms off (no noise),
    which the degeneracy checks rely on. Zero is allowed so that the empty
    composition has a representation.
    """

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon >= 0):
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not (0 <= self.delta < 1):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.epsilon)

    def require_usable(self) -> None:
        """Raise unless this budget can drive a mechanism (eps > 0, 0 < delta < 1)."""
        if not (self.epsilon > 0 and 0 < self.delta < 1):
            raise ValueError(f"mechanism needs epsilon > 0 and 0 < delta < 1, got {self}")

    def split(self, k: int) -> list[PrivacyBudget]:
        if k < 1:
            raise ValueError("k must be at least 1")
        return [PrivacyBudget(self.epsilon / k, self.delta / k) for _ in range(k)]


@dataclass(frozen=True)
class ZcdpBudget:
    """A rho-zCDP guarantee."""

    rho: float

    def __post_init__(self):
        if not (self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")

    @classmethod
    def from_epsilon(cls, epsilon: float) -> ZcdpBudget:
        """The epsilon^2/2 parametrisation used throughout the estimators."""
        return cls(epsilon * epsilon / 2.0)

    @classmethod
    def from_approx_dp(cls, budget: PrivacyBudget) -> ZcdpBudget:
        """Largest rho whose conversion at ``budget.delta`` stays within ``budget.epsilon``."""
        budget.require_usable()
        if budget.is_infinite:
            return cls(math.inf)
        log_term = math.log(1.0 / budget.delta)
        root = math.sqrt(log_term + budget.epsilon) - math.sqrt(log_term)
        return cls(root * root)

    def to_approx_dp(self, delta: float) -> PrivacyBudget:
        if not (0 < delta < 1):
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        if math.isinf(self.rho):
            return PrivacyBudget(math.inf, delta)
        return PrivacyBudget(self.rho + 2.0 * math.sqrt(self.rho * math.log(1.0 / delta)), delta)

    def split(self, k: int) -> list[ZcdpBudget]:
        if k < 1:
            raise ValueError("k must be at least 1")
        return [ZcdpBudget(self.rho / k) for _ in range(k)]


def compose(budgets: Iterable[PrivacyBudget]) -> PrivacyBudget:
    """Basic composition: epsilons and deltas add."""
    budgets = list(budgets)
    return PrivacyBudget(sum(b.epsilon for b in budgets), sum(b.delta for b in budgets))


def advanced_compose(per_step: PrivacyBudget, N: int, delta_prime: float) -> PrivacyBudget:
    """Advanced composition of ``N`` adaptive steps, each ``per_step``.

    Returns (eps * sqrt(6 N log(1/delta')), delta' + N * delta).
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if not (0 < delta_prime < 1):
        raise ValueError("delta_prime must lie in (0, 1)")
    eps = per_step.epsilon * math.sqrt(6 * N * math.log(1.0 / delta_prime))
    return PrivacyBudget(eps, delta_prime + N * per_step.delta)


def per_step_budget(total: PrivacyBudget, k: int) -> PrivacyBudget:
    """Largest per-step budget whose ``k``-fold composition fits in ``total``.

    Tries basic composition and advanced composition (with half of delta
    reserved for the slack term) and keeps whichever leaves more epsilon per
    step.
    """
    basic = total.split(k)[0]
    if total.is_infinite or k == 1:
        return basic
    delta_prime = total.delta / 2.0
    adv = PrivacyBudget(
        total.epsilon / math.sqrt(6 * k * math.log(1.0 / delta_prime)),
        total.delta / (2.0 * k),
    )
    return adv if adv.epsilon > basic.epsilon else basic


def lse_total_budget(epsilon: float, delta: float) -> PrivacyBudget:
    """Guarantee of an epsilon^2/2-zCDP procedure: (eps^2/2 + eps*sqrt(2 log(1/delta)), delta)."""
    if math.isinf(epsilon):
        return PrivacyBudget(math.inf, delta)
    return PrivacyBudget(epsilon**2 / 2.0 + epsilon * math.sqrt(2.0 * math.log(1.0 / delta)), delta)


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------


def laplace_noise(scale: float, rng: np.random.Generator) -> float:
    if not (scale > 0) or math.isinf(scale):
        raise ValueError(f"Laplace scale must be positive and finite, got {scale}")
    return float(rng.laplace(0.0, scale))


def symmetric_gaussian_matrix(d: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric d x d matrix whose upper triangle (diagonal included) is iid N(0, sigma^2)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if not (sigma > 0) or math.isinf(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    upper = np.triu(rng.normal(0.0, sigma, size=(d, d)))
    return upper + np.triu(upper, 1).T


# --------------------------------------------------------------------------
# stability-based histogram
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramResult:
    bin_index: int
    bin_lower: float
    bin_width: float

    @property
    def bin_upper(self) -> float:
        return self.bin_lower + self.bin_width


def bin_indices(values: np.ndarray, bin_width: float) -> np.ndarray:
    """Index k of the bin [k w, (k+1) w) holding each value."""
    return np.floor(np.asarray(values, dtype=float) / bin_width).astype(np.int64)


def histogram_threshold(n: int, budget: PrivacyBudget, gamma: float) -> float:
    """Stability threshold 2 log(2/(delta gamma)) / (n eps) + 1/n on normalised counts."""
    if budget.is_infinite:
        return 1.0 / n
    return 2.0 * math.log(2.0 / (budget.delta * gamma)) / (n * budget.epsilon) + 1.0 / n


def dp_histogram(
    values: Sequence[float] | np.ndarray,
    bin_width: float,
    budget: PrivacyBudget,
    gamma: float,
    rng: np.random.Generator,
) -> HistogramResult | None:
    """Release the most populated bin of the (infinite) grid of width ``bin_width``.

    Only occupied bins are materialised. Normalised counts get
    Laplace(2/(n eps)) noise; a bin is eligible only if its noisy count
    exceeds the stability threshold. Returns ``None`` when nothing clears it.
    Ties go to the lowest bin index.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("dp_histogram needs at least one value")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if not (bin_width > 0):
        raise ValueError("bin_width must be positive")
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0, 1)")
    budget.require_usable()

    bins, counts = np.unique(bin_indices(values, bin_width), return_counts=True)
    noisy = counts / n
    if not budget.is_infinite:
        noisy = noisy + rng.laplace(0.0, 2.0 / (n * budget.epsilon), size=bins.size)
    threshold = histogram_threshold(n, budget, gamma)
    eligible = noisy > threshold
    if not eligible.any():
        return None
    masked = np.where(eligible, noisy, -np.inf)
    best = int(np.argmax(masked))
    k = int(bins[best])
    return HistogramResult(bin_index=k, bin_lower=k * bin_width, bin_width=bin_width)


def histogram_counts(values: Sequence[float] | np.ndarray, bin_width: float) -> dict[int, float]:
    """Exact normalised counts of the occupied bins (the statistic the histogram privatises)."""
    values = np.asarray(values, dtype=float)
    bins, counts = np.unique(bin_indices(values, bin_width), return_counts=True)
    return {int(b): c / values.size for b, c in zip(bins, counts)}
