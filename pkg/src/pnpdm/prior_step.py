"""Diffusion prior refinement: reverse-time SDE integration from a coupling level.

The latent z is treated as a sample of the prior smoothed to noise level rho
(variance-exploding convention, sigma(t) = t).  Integrating the reverse SDE

    dx = -2 sigma * score(x, sigma) dt + sqrt(2 sigma) dw      (t = sigma)

down a power-law sigma grid draws from the prior conditioned on z, with the
score supplied through a posterior-mean denoiser:

    score(x, sigma) = (denoise(x, sigma) - x) / sigma^2

Discretization.  Per step sigma -> sigma', the drift uses the exactly
integrated coefficient (the Euler-Maruyama increment 2*sigma*dt replaced by
its exact integral sigma^2 - sigma'^2, to which it agrees at first order):

    x <- x + (1 - sigma'^2/sigma^2) * (denoise(x, sigma) - x)

The injected noise carries the exact reverse-transition variance

    sigma'^2 (1 - r) + (1 - r)^2 sigma^2 J,   r = sigma'^2/sigma^2

where J is the per-pixel Tweedie factor d denoise/dx (the conditional
variance of the clean pixel is sigma^2 J), estimated by one finite-difference
probe call per step.  For Gaussian priors this transition is exact, so the
step count controls cost rather than bias; a plain first-order noise term
would need far finer grids to meet the statistical tolerances.

The last grid transition is a deterministic denoiser evaluation (posterior
mean jump to sigma = 0), which avoids injecting noise where the
discretization is unstable near sigma = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Pluggable posterior-mean denoiser: (noisy image, noise level) -> estimate of
# the clean image; dims preserved.
Denoiser = Callable[[np.ndarray, float], np.ndarray]

# Intermediate iterates legitimately leave [0, 1]; only this loose clamp is
# applied during integration (hard mid-chain clamping biases the sampler).
_CLAMP_LO = -0.5
_CLAMP_HI = 1.5


@dataclass(frozen=True)
class SdeConfig:
    """Discretization of the reverse SDE.

    num_steps: Euler-Maruyama steps per prior refinement.
    sigma_floor: smallest integration noise level before the final jump.
    curvature: power-law exponent of the sigma grid (EDM-standard 7).
    stochastic: False selects the zero-noise probability-flow variant.
    """

    num_steps: int = 20
    sigma_floor: float = 0.01
    curvature: float = 7.0
    stochastic: bool = True

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.sigma_floor <= 0:
            raise ValueError(f"sigma_floor must be > 0, got {self.sigma_floor}")
        if self.curvature <= 0:
            raise ValueError(f"curvature must be > 0, got {self.curvature}")


def sigma_grid(start: float, cfg: SdeConfig) -> np.ndarray:
    """K+1 strictly decreasing noise levels from start down to the floor."""
    if start <= cfg.sigma_floor:
        raise ValueError(f"start {start} must exceed sigma_floor {cfg.sigma_floor}")
    inv = 1.0 / cfg.curvature
    frac = np.arange(cfg.num_steps + 1) / cfg.num_steps
    grid = (start**inv + frac * (cfg.sigma_floor**inv - start**inv)) ** cfg.curvature
    grid[0] = start
    grid[-1] = cfg.sigma_floor
    return grid


# Finite-difference step for the Tweedie-factor probe.
_PROBE_EPS = 1e-3


def prior_refine(z: np.ndarray, rho: float, denoise: Denoiser, cfg: SdeConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Integrate the reverse SDE from noise level rho, starting at z."""
    z = np.asarray(z, dtype=np.float64)
    grid = sigma_grid(rho, cfg)
    x = z.copy()
    for sigma, sigma_next in zip(grid[:-1], grid[1:]):
        sigma = float(sigma)
        estimate = np.clip(denoise(x, sigma), _CLAMP_LO, _CLAMP_HI)
        if estimate.shape != x.shape:
            raise ValueError(f"denoiser changed shape {x.shape} -> {estimate.shape}")
        shrink = 1.0 - sigma_next**2 / sigma**2
        if cfg.stochastic:
            probe = np.clip(denoise(x + _PROBE_EPS, sigma), _CLAMP_LO, _CLAMP_HI)
            tweedie = np.clip((probe - estimate) / _PROBE_EPS, 0.0, 1.0)
            noise_var = sigma_next**2 * shrink + shrink**2 * sigma**2 * tweedie
            x += shrink * (estimate - x)
            x += np.sqrt(noise_var) * rng.standard_normal(x.shape)
        else:
            x += shrink * (estimate - x)
    return np.clip(denoise(x, float(grid[-1])), _CLAMP_LO, _CLAMP_HI)
