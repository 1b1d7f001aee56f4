"""Differentially private least squares, binary and linear regression for Gaussian covariates."""

from .multivariate import (
    EstimationConfig,
    GaussianEstimate,
    Preconditioner,
    learn_covariance_hd,
    learn_gaussian_hd,
    learn_mean_hd,
    learn_preconditioner,
    naive_pce,
)
from .privacy import (
    PrivacyBudget,
    ZcdpBudget,
    advanced_compose,
    compose,
    dp_histogram,
    lse_total_budget,
)
from .regression import (
    LinearConfig,
    LseConfig,
    RegressionEstimate,
    block_sigma_prime,
    priv_learn_binary,
    priv_learn_linear,
    priv_learn_lse,
)
from .synthetic import Dataset, GeneratorSpec, generate, make_link
from .univariate import UnivariateMeanConfig, estimate_mean_1d

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EstimationConfig",
    "GaussianEstimate",
    "GeneratorSpec",
    "LinearConfig",
    "LseConfig",
    "Preconditioner",
    "PrivacyBudget",
    "RegressionEstimate",
    "UnivariateMeanConfig",
    "ZcdpBudget",
    "advanced_compose",
    "block_sigma_prime",
    "compose",
    "dp_histogram",
    "estimate_mean_1d",
    "generate",
    "learn_covariance_hd",
    "learn_gaussian_hd",
    "learn_mean_hd",
    "learn_preconditioner",
    "lse_total_budget",
    "make_link",
    "naive_pce",
    "priv_learn_binary",
    "priv_learn_linear",
    "priv_learn_lse",
]
