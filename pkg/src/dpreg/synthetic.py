"""Seeded generators for the three regression settings, link functions, and dataset IO.

Datasets are written as CSV (``x1,...,xd,y``) plus a JSON sidecar holding the
:class:`GeneratorSpec`, which carries the seed and the ground-truth beta.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

SETTINGS = ("lse", "binary", "linear")


# --------------------------------------------------------------------------
# links
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Link:
    """Model function f: R -> [0, 1] with its derivative."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    lam: float = 1.0

    def validate(self, grid: Optional[np.ndarray] = None) -> None:
        grid = np.linspace(-50, 50, 2001) if grid is None else grid
        vals = np.asarray(self.f(grid), dtype=float)
        if np.any(vals < 0) or np.any(vals > 1):
            raise ValueError(f"link {self.name!r} leaves [0, 1]")
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError(f"link {self.name!r} is not non-decreasing")


def logistic() -> Link:
    return Link("logistic", expit, lambda s: expit(s) * expit(-s))


def smoothed_sign(lam: float) -> Link:
    """Sigmoid approximation of sign, rescaled to [0, 1]: f(x) = 1 / (1 + exp(-lam x))."""
    if not (lam > 0):
        raise ValueError("lam must be positive")
    return Link(
        "smoothed-sign",
        lambda s: expit(lam * np.asarray(s)),
        lambda s: lam * expit(lam * np.asarray(s)) * expit(-lam * np.asarray(s)),
        lam=float(lam),
    )


def custom_link(f, fprime=None, name: str = "custom") -> Link:
    """Wrap a user CDF-like map; the derivative defaults to a central difference."""
    if fprime is None:
        h = 1e-5

        def fprime(s):
            s = np.asarray(s, dtype=float)
            return (f(s + h) - f(s - h)) / (2 * h)

    link = Link(name, f, fprime)
    link.validate()
    return link


def make_link(name: str, lam: float = 1.0) -> Link:
    if name == "logistic":
        return logistic()
    if name in ("smoothed-sign", "smoothed_sign"):
        return smoothed_sign(lam)
    raise ValueError(f"unknown link {name!r}")


# --------------------------------------------------------------------------
# specs and datasets
# --------------------------------------------------------------------------


@dataclass
class Dataset:
    """Covariates ``X`` (n x d) and optional labels ``y``; one row is one privacy unit."""

    X: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float).ravel()
            if self.y.size != self.X.shape[0]:
                raise ValueError("X and y have different numbers of rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class GeneratorSpec:
    d: int
    n: int
    setting: str = "linear"
    mu: Optional[list] = None
    Sigma: Optional[list] = None
    beta: Optional[list] = None
    sigma_eps: float = 1.0
    link: str = "logistic"
    link_lambda: float = 1.0
    c: float = 1.0
    label_noise: float = 0.3
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting: must be one of {SETTINGS}, got {self.setting!r}")
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        mu = self.mean_vector()
        if mu.shape != (self.d,):
            raise ValueError(f"mu: expected length {self.d}")
        if self.setting == "binary" and np.any(mu != 0):
            raise ValueError("mu: the binary setting requires zero-mean covariates")
        Sigma = self.covariance()
        if Sigma.shape != (self.d, self.d):
            raise ValueError(f"Sigma: expected shape ({self.d}, {self.d})")
        if not np.allclose(Sigma, Sigma.T):
            raise ValueError("Sigma: matrix is not symmetric")
        lam_min = float(np.linalg.eigvalsh(Sigma)[0])
        if lam_min < 0:
            raise ValueError(f"Sigma: negative eigenvalue {lam_min:.3g}")
        if lam_min < 1 - 1e-9:
            raise ValueError(f"Sigma: eigenvalues must be at least 1, smallest is {lam_min:.3g}")
        if self.coefficients().shape != (self.d,):
            raise ValueError(f"beta: expected length {self.d}")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps: must be non-negative")
        if self.c <= 0:
            raise ValueError("c: must be positive")

    def mean_vector(self) -> np.ndarray:
        return np.zeros(self.d) if self.mu is None else np.asarray(self.mu, dtype=float)

    def covariance(self) -> np.ndarray:
        return np.eye(self.d) if self.Sigma is None else np.asarray(self.Sigma, dtype=float)

    def coefficients(self) -> np.ndarray:
        if self.beta is None:
            return np.zeros(self.d)
        return np.asarray(self.beta, dtype=float)

    def make_link(self) -> Link:
        return make_link(self.link, self.link_lambda)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> GeneratorSpec:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**data)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def sample_gaussian(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    """n rows iid N(mu, Sigma) drawn through an eigen factorisation."""
    Sigma = spec.covariance()
    lam, U = np.linalg.eigh(Sigma)
    if lam[0] < -1e-12:
        raise ValueError("Sigma is not PSD")
    root = U * np.sqrt(np.clip(lam, 0.0, None))
    z = rng.standard_normal((spec.n, spec.d))
    return spec.mean_vector() + z @ root.T


def label_binary(X: np.ndarray, link: Link, beta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """y_i = +1 with probability f(beta^T x_i), else -1."""
    p = link.f(X @ np.asarray(beta, dtype=float))
    u = rng.random(X.shape[0])
    return np.where(u < p, 1.0, -1.0)


def label_linear(X: np.ndarray, beta: np.ndarray, sigma_eps: float, rng: np.random.Generator) -> np.ndarray:
    """y_i = beta^T x_i + N(0, sigma_eps^2)."""
    noise = rng.standard_normal(X.shape[0])
    return X @ np.asarray(beta, dtype=float) + sigma_eps * noise


def label_bounded(
    X: np.ndarray, beta: np.ndarray, c: float, noise: float, rng: np.random.Generator
) -> np.ndarray:
    """An arbitrary bounded response, c * tanh(beta^T x + noise); |y| <= c by construction."""
    eps = rng.standard_normal(X.shape[0])
    return c * np.tanh(X @ np.asarray(beta, dtype=float) + noise * eps)


def generate(spec: GeneratorSpec, rng: Optional[np.random.Generator] = None) -> Dataset:
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    X = sample_gaussian(spec, rng)
    beta = spec.coefficients()
    if spec.setting == "binary":
        y = label_binary(X, spec.make_link(), beta, rng)
    elif spec.setting == "linear":
        y = label_linear(X, beta, spec.sigma_eps, rng)
    else:
        y = label_bounded(X, beta, spec.c, spec.label_noise, rng)
    return Dataset(X, y)


# --------------------------------------------------------------------------
# IO
# --------------------------------------------------------------------------


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_dataset(data: Dataset, path: str | Path, spec: Optional[GeneratorSpec] = None) -> list[Path]:
    """Write ``path`` as CSV and, if ``spec`` is given, its JSON sidecar next to it."""
    path = Path(path)
    header = [f"x{j + 1}" for j in range(data.d)] + ["y"]
    y = data.y if data.y is not None else np.full(data.n, np.nan)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row, label in zip(data.X, y):
            writer.writerow([_fmt(v) for v in row] + [_fmt(label)])
    written = [path]
    if spec is not None:
        side = sidecar_path(path)
        side.write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(side)
    return written


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "y":
            raise ValueError(f"{path}: line 1: expected header x1,...,xd,y")
        d = len(header) - 1
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise ValueError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) if v != "" else math.nan for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    arr = np.array(rows, dtype=float).reshape(-1, d + 1)
    y = arr[:, -1]
    return Dataset(arr[:, :-1], None if np.all(np.isnan(y)) else y)


def read_sidecar(csv_path: str | Path) -> GeneratorSpec:
    side = sidecar_path(csv_path)
    if not side.exists():
        raise FileNotFoundError(f"sidecar {side} not found")
    return GeneratorSpec.from_dict(json.loads(side.read_text()))


def _fmt(v: float) -> str:
    if math.isnan(v):
        return ""
    return repr(float(v))
