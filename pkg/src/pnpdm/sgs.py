"""Annealed split-Gibbs outer loop.

Alternates the exact Gaussian data-consistency draw with the reverse-diffusion
prior refinement while the coupling width rho decays exponentially down to a
floor.  Once the floor engages the chain samples at fixed coupling; posterior
samples are collected from that stationary phase and averaged into the final
reconstruction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pnpdm.images import as_image
from pnpdm.likelihood import LikelihoodModel, sample_conditional
from pnpdm.prior_step import Denoiser, SdeConfig, prior_refine

INIT_MODES = ("adjoint-upsample", "constant-half", "random-normal")


@dataclass(frozen=True)
class AnnealSchedule:
    """Exponential coupling decay rho_q = alpha^q rho0, clamped at rho_min."""

    rho0: float = 10.0
    rho_min: float = 0.3
    alpha: float = 0.9

    def __post_init__(self):
        if not self.rho0 >= self.rho_min > 0:
            raise ValueError(f"need rho0 >= rho_min > 0, got {self.rho0}, {self.rho_min}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")

    def clamp_iteration(self) -> int:
        """First q at which the floor engages."""
        if self.rho0 == self.rho_min:
            return 0
        return math.ceil(math.log(self.rho_min / self.rho0) / math.log(self.alpha))


def rho_at(schedule: AnnealSchedule, q: int) -> float:
    if q < 0:
        raise ValueError(f"iteration index must be >= 0, got {q}")
    return max(schedule.alpha**q * schedule.rho0, schedule.rho_min)


@dataclass(frozen=True)
class RunConfig:
    """Chain length and collection policy.

    The defaults anneal for 34 iterations (where the default schedule hits its
    floor) then collect 100 stationary samples.  Samples taken during
    annealing are not draws from the target posterior, hence the burn-in.
    """

    iterations: int = 134
    burn_in: int = 34
    collect_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(
                f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}"
            )
        if self.collect_every < 1:
            raise ValueError(f"collect_every must be >= 1, got {self.collect_every}")


@dataclass
class ChainState:
    """Mutable per-chain state; each chain owns its rng stream."""

    x: np.ndarray
    z: np.ndarray | None
    q: int
    rng: np.random.Generator


def initialize(model: LikelihoodModel, mode: str = "adjoint-upsample",
               rng: np.random.Generator | None = None) -> np.ndarray:
    """Initial iterate at the reconstruction resolution."""
    op = model.operator
    if mode == "adjoint-upsample":
        # minimum-norm backprojection; for block averaging this replicates
        # each measured pixel across its block (equals f^2 A^T y)
        return op.pseudo_inverse(model.measurement)
    if mode == "constant-half":
        return np.full(op.in_shape, 0.5)
    if mode == "random-normal":
        if rng is None:
            rng = np.random.default_rng(0)
        return np.clip(0.5 + 0.25 * rng.standard_normal(op.in_shape), 0.0, 1.0)
    raise ValueError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")


def sgs_step(state: ChainState, model: LikelihoodModel, denoise: Denoiser,
             schedule: AnnealSchedule, sde: SdeConfig) -> ChainState:
    """One likelihood + prior alternation at the current coupling."""
    rho = rho_at(schedule, state.q)
    state.z = sample_conditional(model, state.x, rho, state.rng)
    state.x = prior_refine(state.z, rho, denoise, sde, state.rng)
    state.q += 1
    return state


def run_chain(model: LikelihoodModel, denoise: Denoiser,
              schedule: AnnealSchedule, sde: SdeConfig, cfg: RunConfig,
              x_init: np.ndarray,
              callback=None) -> tuple[list[np.ndarray], np.ndarray]:
    """Run one chain; returns collected samples and their clamped pixel mean.

    ``callback(q, rho, x)`` is invoked after every iteration when given.
    """
    x_init = as_image(x_init)
    if x_init.shape != model.operator.in_shape:
        raise ValueError(
            f"x_init shape {x_init.shape} != problem shape {model.operator.in_shape}"
        )
    state = ChainState(x=x_init.copy(), z=None, q=0,
                       rng=np.random.default_rng(cfg.seed))
    samples: list[np.ndarray] = []
    for q in range(cfg.iterations):
        sgs_step(state, model, denoise, schedule, sde)
        if callback is not None:
            callback(q, rho_at(schedule, q), state.x)
        if q >= cfg.burn_in and (q - cfg.burn_in) % cfg.collect_every == 0:
            samples.append(state.x.copy())
    mean = np.clip(np.mean(samples, axis=0), 0.0, 1.0)
    return samples, mean
