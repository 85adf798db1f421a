"""Cosine noise schedule and the closed-form diffusion algebra.

Index convention: timesteps t = 1..T carry noise, t = 0 is the clean state
with cumulative retention alpha_bar[0] = 1. Every function below validates
its timestep against that convention so off-by-one drift fails loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSchedule",
    "cosine_schedule",
    "q_sample",
    "recover_noise",
    "predict_x0",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep noise coefficients.

    beta[i] and alpha[i] belong to timestep t = i + 1; alpha_bar has length
    T + 1 and is indexed directly by t, with alpha_bar[0] = 1.
    """

    timesteps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def bar(self, t: int) -> float:
        """Cumulative retention alpha_bar at timestep t in 0..T."""
        if not 0 <= t <= self.timesteps:
            raise ValueError(f"timestep {t} outside 0..{self.timesteps}")
        return float(self.alpha_bar[t])


def cosine_schedule(timesteps: int, s: float = 0.008, max_beta: float = 0.999) -> NoiseSchedule:
    """Build the squared-cosine schedule.

    alpha_bar follows f(t) / f(0) with f(t) = cos(((t/T + s) / (1 + s)) * pi/2)^2
    and betas are clipped from above at ``max_beta`` before alpha_bar is
    recomputed, so the retention never collapses to exactly zero.

    Raises:
        ValueError: if timesteps <= 0.
    """
    if timesteps <= 0:
        raise ValueError("timesteps must be positive")
    t = np.arange(timesteps + 1, dtype=np.float64)
    f = np.cos(((t / timesteps + s) / (1.0 + s)) * (np.pi / 2.0)) ** 2
    raw_bar = f / f[0]
    beta = np.minimum(1.0 - raw_bar[1:] / raw_bar[:-1], max_beta)
    alpha = 1.0 - beta
    alpha_bar = np.concatenate(([1.0], np.cumprod(alpha)))
    return NoiseSchedule(timesteps=timesteps, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def _check_step(schedule: NoiseSchedule, t: int) -> None:
    if not 1 <= t <= schedule.timesteps:
        raise ValueError(f"timestep {t} outside 1..{schedule.timesteps}")


def q_sample(schedule: NoiseSchedule, x0: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    """Jump the clean signal straight to timestep t in one step.

    Computes sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.

    Raises:
        ValueError: if t is outside 1..T or shapes differ.
    """
    _check_step(schedule, t)
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} does not match signal {x0.shape}")
    bar = schedule.bar(t)
    return np.sqrt(bar) * x0 + np.sqrt(1.0 - bar) * eps


def recover_noise(schedule: NoiseSchedule, x_t: np.ndarray, x0: np.ndarray, t: int) -> np.ndarray:
    """Solve the forward step for the noise that produced x_t from x0.

    Computes (x_t - sqrt(alpha_bar_t) * x0) / sqrt(1 - alpha_bar_t). The
    clean timestep t = 0 is rejected since 1 - alpha_bar_0 = 0.

    Raises:
        ValueError: if t is outside 1..T or shapes differ.
    """
    _check_step(schedule, t)
    x_t = np.asarray(x_t, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x_t.shape != x0.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {x0.shape}")
    bar = schedule.bar(t)
    return (x_t - np.sqrt(bar) * x0) / np.sqrt(1.0 - bar)


def predict_x0(schedule: NoiseSchedule, x_t: np.ndarray, eps: np.ndarray, t: int) -> np.ndarray:
    """Closed-form estimate of the clean signal from (x_t, noise).

    Computes (x_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t); the
    exact inverse of q_sample, and of recover_noise composed with it.

    Raises:
        ValueError: if t is outside 1..T or shapes differ.
    """
    _check_step(schedule, t)
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x_t.shape != eps.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {eps.shape}")
    bar = schedule.bar(t)
    return (x_t - np.sqrt(1.0 - bar) * eps) / np.sqrt(bar)
