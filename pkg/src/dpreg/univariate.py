"""Private mean of a univariate sub-gaussian sample with no prior bound on the mean.

Phase one locates a coarse bin with the stability histogram; phase two clamps
the data to a window around that bin and releases a Laplace-noised mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .privacy import PrivacyBudget, dp_histogram

MIN_SAMPLES = 10


@dataclass(frozen=True)
class UnivariateMeanConfig:
    """Parameters of :func:`estimate_mean_1d`.

    ``variance_upper`` bounds the variance of the samples; the histogram bins
    have width ``sqrt(variance_upper)``. The whole ``budget.delta`` goes to
    the histogram, epsilon is split evenly between the two phases.
    """

    variance_upper: float
    budget: PrivacyBudget
    gamma: float = 0.05

    def __post_init__(self):
        if not (self.variance_upper >= 1):
            raise ValueError(f"variance_upper must be at least 1, got {self.variance_upper}")
        if not (0 < self.gamma < 1):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        self.budget.require_usable()

    @property
    def bin_width(self) -> float:
        return math.sqrt(self.variance_upper)

    @property
    def histogram_budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.budget.epsilon / 2.0, self.budget.delta)

    @property
    def mean_epsilon(self) -> float:
        return self.budget.epsilon / 2.0


def truncation_margin(bin_width: float, n: int, gamma: float) -> float:
    """Half-width added on each side of the located bin: w * sqrt(2 log(2n/gamma))."""
    return bin_width * math.sqrt(2.0 * math.log(2.0 * n / gamma))


def private_range(values, cfg: UnivariateMeanConfig, rng: np.random.Generator):
    """Phase one: a private window (lo, hi) expected to hold every sample, or None."""
    values = np.asarray(values, dtype=float)
    n = values.size
    _check_n(n)
    hist = dp_histogram(values, cfg.bin_width, cfg.histogram_budget, cfg.gamma, rng)
    if hist is None:
        return None
    r = truncation_margin(cfg.bin_width, n, cfg.gamma)
    return hist.bin_lower - r, hist.bin_upper + r


def estimate_mean_1d(values, cfg: UnivariateMeanConfig, rng: np.random.Generator) -> float | None:
    """(eps, delta)-DP mean of ``values``; ``None`` when the histogram refuses to release.

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> cfg = UnivariateMeanConfig(1.0, PrivacyBudget(1.0, 1e-6))
    >>> x = rng.normal(1e6, 1.0, size=20_000)
    >>> abs(estimate_mean_1d(x, cfg, rng) - 1e6) < 0.1
    True
    """
    values = np.asarray(values, dtype=float)
    window = private_range(values, cfg, rng)
    if window is None:
        return None
    lo, hi = window
    clamped_mean = float(np.clip(values, lo, hi).mean())
    if cfg.budget.is_infinite:
        return clamped_mean
    scale = (hi - lo) / (values.size * cfg.mean_epsilon)
    return clamped_mean + float(rng.laplace(0.0, scale))


def _check_n(n: int) -> None:
    if n == 0:
        raise ValueError("no samples")
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
