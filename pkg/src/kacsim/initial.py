"""Samplers for initial velocity laws with light tails and no atoms at a point.

All laws here have Gaussian tails or compact support, hence finite
exponential moments of any order below 2, and none is a single point mass.
Sampling is deterministic given the law's seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class IsotropicGaussian:
    """Centered Gaussian with the given mean kinetic energy per particle."""

    energy_per_particle: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.energy_per_particle <= 0.0:
            raise ConfigError("energy per particle must be positive")


@dataclass(frozen=True)
class UniformBall:
    """Uniform law on the solid ball of the given radius."""

    radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ConfigError("radius must be positive")


@dataclass(frozen=True)
class TwoPointMixture:
    """Mixture w * delta_{u1} + (1-w) * delta_{u2} with u1 != u2 (not a point mass)."""

    u1: tuple[float, float, float]
    u2: tuple[float, float, float]
    weight: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if tuple(self.u1) == tuple(self.u2):
            raise ConfigError("the two atoms must differ")
        if not 0.0 < self.weight < 1.0:
            raise ConfigError("mixture weight must lie strictly in (0, 1)")


InitialLaw = Union[IsotropicGaussian, UniformBall, TwoPointMixture]


def sample_initial(law: InitialLaw, n: int) -> np.ndarray:
    """n i.i.d. draws from the law as an (n, 3) array, deterministic given seed."""
    if n < 2:
        raise ConfigError("an ensemble needs at least 2 particles")
    rng = _rng(law.seed)
    if isinstance(law, IsotropicGaussian):
        sigma = np.sqrt(law.energy_per_particle / 3.0)
        return rng.normal(scale=sigma, size=(n, 3))
    if isinstance(law, UniformBall):
        direction = rng.normal(size=(n, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radii = law.radius * rng.random(n) ** (1.0 / 3.0)
        return radii[:, None] * direction
    if isinstance(law, TwoPointMixture):
        pick = rng.random(n) < law.weight
        u1 = np.asarray(law.u1, dtype=float)
        u2 = np.asarray(law.u2, dtype=float)
        return np.where(pick[:, None], u1, u2)
    raise ConfigError(f"unknown initial law {law!r}")


def normalize_ensemble(velocities) -> np.ndarray:
    """Shift to zero total momentum and rescale to unit energy per particle.

    Conserved by the dynamics afterwards, so this is a one-time choice that
    makes ensembles of different sizes directly comparable.
    """
    vel = np.asarray(velocities, dtype=float)
    if vel.ndim != 2 or vel.shape[1] != 3 or vel.shape[0] < 2:
        raise DomainError("expected an (n, 3) array with n >= 2")
    centered = vel - vel.mean(axis=0)
    energy = float(np.mean(np.sum(centered**2, axis=1)))
    if energy == 0.0:
        raise DomainError("all velocities are equal; the ensemble is a point mass")
    return centered / np.sqrt(energy)
