"""Exactly solvable priors and closed-form posterior oracles.

These back the verification suite: a Gaussian (diagonal-covariance) prior and
a pixelwise Gaussian-mixture prior both implement the posterior-mean denoiser
contract E[x0 | x0 + sigma * eps], so the full sampling pipeline can be
checked against closed-form answers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pnpdm.images import as_image
from pnpdm.likelihood import LikelihoodModel

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianPrior:
    """N(mean, diag(variance)); mean/variance broadcast against image shapes."""

    mean: np.ndarray | float
    variance: np.ndarray | float

    def __post_init__(self):
        if np.any(np.asarray(self.variance) <= 0):
            raise ValueError("variance entries must be > 0")

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """E[x0 | x0 + sigma*eps = x] = mean + C (C + sigma^2 I)^-1 (x - mean)."""
        x = np.asarray(x, dtype=np.float64)
        if sigma == 0:
            return x.copy()
        gain = self.variance / (self.variance + sigma**2)
        return self.mean + gain * (x - self.mean)

    def log_density_smoothed(self, x: np.ndarray, sigma: float) -> float:
        """log of the sigma-smoothed prior density at x (sum over pixels)."""
        x = np.asarray(x, dtype=np.float64)
        var = np.broadcast_to(np.asarray(self.variance, dtype=np.float64) + sigma**2,
                              x.shape)
        resid = x - self.mean
        return float(np.sum(-0.5 * (resid * resid / var + np.log(var) + _LOG_2PI)))

    def sample(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        return self.mean + np.sqrt(self.variance) * rng.standard_normal(shape)


@dataclass(frozen=True)
class GmmPrior:
    """Pixelwise-independent scalar Gaussian mixture prior.

    Every pixel is i.i.d. sum_k w_k N(mu_k, c_k) with scalar component means
    and variances; multimodal enough to expose mode collapse while keeping
    the quadrature oracle one-dimensional.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.variances, dtype=np.float64)
        if w.ndim != 1 or w.size < 1 or mu.shape != w.shape or c.shape != w.shape:
            raise ValueError("weights, means, variances must be equal-length 1-D")
        if np.any(w <= 0) or np.any(c <= 0):
            raise ValueError("weights and variances must be > 0")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", c)

    def _log_resp(self, x: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel component log-responsibilities (..., K), max-subtracted."""
        var = self.variances + sigma**2  # (K,)
        resid = x[..., None] - self.means
        log_w = np.log(self.weights) - 0.5 * (np.log(var) + _LOG_2PI) \
            - 0.5 * resid * resid / var
        peak = log_w.max(axis=-1, keepdims=True)
        return log_w - peak, peak

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Responsibility-weighted mixture of per-component posterior means."""
        if sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {sigma}")
        x = np.asarray(x, dtype=np.float64)
        log_r, _ = self._log_resp(x, sigma)
        r = np.exp(log_r)
        r /= r.sum(axis=-1, keepdims=True)
        gain = self.variances / (self.variances + sigma**2)
        per_component = self.means + gain * (x[..., None] - self.means)
        return np.sum(r * per_component, axis=-1)

    def log_density_smoothed(self, x: np.ndarray, sigma: float) -> float:
        x = np.asarray(x, dtype=np.float64)
        log_r, peak = self._log_resp(x, sigma)
        per_pixel = peak[..., 0] + np.log(np.exp(log_r).sum(axis=-1))
        return float(per_pixel.sum())

    def sample(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        k = rng.choice(self.weights.size, size=shape, p=self.weights)
        return self.means[k] + np.sqrt(self.variances[k]) * rng.standard_normal(shape)


def gaussian_posterior_oracle(prior: GaussianPrior,
                              model: LikelihoodModel) -> tuple[np.ndarray, np.ndarray]:
    """Exact Gaussian posterior mean and per-pixel marginal variances.

    Dense evaluation of N((C^-1 + A^T A / s^2)^-1 (C^-1 mu + A^T y / s^2), ...);
    restricted to n <= 4096 since it materializes A and inverts n x n.
    """
    op = model.operator
    if op.n > 4096:
        raise ValueError(f"dense oracle limited to n <= 4096, got {op.n}")
    a = dense_matrix(op)
    c_inv = np.broadcast_to(
        1.0 / np.asarray(prior.variance, dtype=np.float64), op.in_shape
    ).ravel()
    mu = np.broadcast_to(np.asarray(prior.mean, dtype=np.float64), op.in_shape).ravel()
    s2 = model.noise_sigma**2
    precision = np.diag(c_inv) + a.T @ a / s2
    cov = np.linalg.inv(precision)
    rhs = c_inv * mu + a.T @ model.measurement.ravel() / s2
    mean = cov @ rhs
    return mean.reshape(op.in_shape), np.diag(cov).copy()


def dense_matrix(op) -> np.ndarray:
    """Materialize an operator as an m x n matrix (test/oracle use only)."""
    a = np.empty((op.m, op.n))
    basis = np.zeros(op.n)
    for j in range(op.n):
        basis[j] = 1.0
        a[:, j] = op.apply(basis.reshape(op.in_shape)).ravel()
        basis[j] = 0.0
    return a
