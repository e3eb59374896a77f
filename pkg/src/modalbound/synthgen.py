"""Synthetic data families: overlap-controlled modalities and the composite linear model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import stream
from .exceptions import InvalidConfigError
from .modal_data import Dataset, ModalitySchema, config_digest


@dataclass(frozen=True)
class OverlapConfig:
    """Four modalities sharing a fraction ``w`` of the first one."""

    w: float
    n_samples: int
    dim: int = 100
    K: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise InvalidConfigError(f"overlap weight must lie in [0, 1], got {self.w}")
        if self.n_samples < 1 or self.dim < 1 or self.K < 1:
            raise InvalidConfigError("n_samples, dim and K must be positive")

    @property
    def schema(self) -> ModalitySchema:
        return ModalitySchema.uniform(self.K, self.dim)

    def oracle_residual(self, k: int) -> float:
        """Residual variance of the best predictor from the first ``k`` blocks.

        Label = (1 + (K-1)w) s_1 + (1-w)(s_2 + ... + s_K) with s_i the coordinate
        sum of the i-th independent draw, so the blocks beyond k leave
        (K-k) * dim * (1-w)^2 unexplained (zero when w = 1).
        """
        return (self.K - k) * self.dim * (1.0 - self.w) ** 2


def generate_overlap(config: OverlapConfig) -> Dataset:
    rng = stream(config.seed, "data")
    m = rng.standard_normal((config.n_samples, config.K * config.dim))
    blocks = m.reshape(config.n_samples, config.K, config.dim)
    first = blocks[:, :1, :]
    blocks[:, 1:, :] = (1.0 - config.w) * blocks[:, 1:, :] + config.w * first
    X = blocks.reshape(config.n_samples, -1)
    y = X.sum(axis=1)
    meta = {"generator": "overlap", "config": asdict(config), "seed": config.seed,
            "digest": config_digest({"overlap": asdict(config)})}
    return Dataset(config.schema, X, y, metadata=meta)


def random_orthonormal(d: int, n: int, seed: int) -> np.ndarray:
    """d x n matrix with orthonormal columns, from the QR factor of a Gaussian matrix."""
    if not 1 <= n <= d:
        raise InvalidConfigError(f"need 1 <= n <= d, got n={n}, d={d}")
    g = stream(seed, "data", "orthonormal", d, n).standard_normal((d, n))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def random_spd(d: int, seed: int, floor: float = 0.5) -> np.ndarray:
    """Well-conditioned random SPD matrix ``W W^T / d + floor I``."""
    w = stream(seed, "data", "spd", d).standard_normal((d, d))
    return w @ w.T / d + floor * np.eye(d)


@dataclass(frozen=True)
class LinearGenConfig:
    """``y = beta*^T A*^T x + eps`` with ``x ~ N(0, Sigma)`` and Gaussian noise.

    ``noise_sampler`` may replace the Gaussian noise; it receives
    ``(rng, size)`` and must return zero-mean draws with variance ``noise_var``.
    """

    dims: tuple[int, ...]
    A_star: np.ndarray
    beta_star: np.ndarray
    noise_var: float = 0.0
    n_samples: int = 1000
    seed: int = 0
    Sigma: np.ndarray | None = None
    noise_sampler: object = field(default=None, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_star, dtype=float))
        beta = np.asarray(self.beta_star, dtype=float).reshape(-1)
        schema = ModalitySchema(tuple(self.dims))
        if A.shape != (schema.d, beta.shape[0]):
            raise InvalidConfigError(f"A* must be {schema.d}x{beta.shape[0]}, got {A.shape}")
        if not np.allclose(A.T @ A, np.eye(A.shape[1]), atol=1e-10, rtol=0):
            raise InvalidConfigError("A* must have orthonormal columns")
        if self.noise_var < 0 or self.n_samples < 1:
            raise InvalidConfigError("noise_var must be >= 0 and n_samples >= 1")
        object.__setattr__(self, "A_star", A)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "dims", schema.dims)
        if self.Sigma is not None:
            S = np.asarray(self.Sigma, dtype=float)
            object.__setattr__(self, "Sigma", S)
        self.sigma_factor  # validates Sigma

    @property
    def schema(self) -> ModalitySchema:
        return ModalitySchema(self.dims)

    @property
    def covariance(self) -> np.ndarray:
        return np.eye(self.schema.d) if self.Sigma is None else self.Sigma

    @property
    def sigma_factor(self) -> np.ndarray | None:
        if self.Sigma is None:
            return None
        S = self.Sigma
        if S.shape != (self.schema.d, self.schema.d) or not np.allclose(S, S.T, atol=1e-12):
            raise InvalidConfigError("Sigma must be a symmetric d x d matrix")
        try:
            return np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise InvalidConfigError("Sigma is not positive definite") from None

    @property
    def composite_vector(self) -> np.ndarray:
        """v* = A* beta*, the single direction the label depends on."""
        return self.A_star @ self.beta_star

    def describe(self) -> dict:
        return {"dims": list(self.dims), "A_star": self.A_star.tolist(),
                "beta_star": self.beta_star.tolist(), "noise_var": self.noise_var,
                "n_samples": self.n_samples, "seed": self.seed,
                "Sigma": None if self.Sigma is None else self.Sigma.tolist()}


def generate_linear(config: LinearGenConfig) -> Dataset:
    d = config.schema.d
    X = stream(config.seed, "data").standard_normal((config.n_samples, d))
    L = config.sigma_factor
    if L is not None:
        X = X @ L.T
    noise_rng = stream(config.seed, "noise")
    if config.noise_sampler is not None:
        eps = np.asarray(config.noise_sampler(noise_rng, config.n_samples), dtype=float)
    elif config.noise_var > 0:
        eps = np.sqrt(config.noise_var) * noise_rng.standard_normal(config.n_samples)
    else:
        eps = np.zeros(config.n_samples)
    y = X @ config.composite_vector + eps
    desc = config.describe()
    meta = {"generator": "linear", "seed": config.seed, "noise_var": config.noise_var,
            "digest": config_digest(desc)}
    return Dataset(config.schema, X, y, metadata=meta)
