"""Stereo-specific reverse diffusion: iterative cost volume filtering.

The filter volume starts as standard Gaussian noise and is repeatedly
(1) mapped to the unit range and multiplied into the base cost volume,
(2) turned into a disparity prediction by the base matcher,
(3) re-discretized and used to recover the implied noise, and
(4) stepped toward the clean state with a DDIM update, after which badly
behaving pixels are reset by volume renewal. The final disparity map is a
fixed convex combination of the per-step predictions and the baseline
prediction of the unfiltered matcher.

Randomness comes from a counter-based (Philox) generator seeded via the
config, so runs are reproducible bit for bit; with eta = 0 the denoising
updates themselves are fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schedule import NoiseSchedule, cosine_schedule, recover_noise
from .volume import (
    DisparityMap,
    discretize_two_hot,
    entropy_map,
    filter_volume,
    rescale_signed,
    rescale_unit,
    signed_volume_entropy,
)

__all__ = [
    "RenewalPolicy",
    "SamplerConfig",
    "SamplerOutput",
    "time_embedding",
    "ddim_step",
    "ddpm_mean",
    "ddpm_step",
    "volume_renewal",
    "dense_integration",
    "run_reverse",
]


@dataclass(frozen=True)
class RenewalPolicy:
    """When to reset a filter column to fresh noise.

    A pixel is an outlier when its step prediction strays more than
    ``disparity_threshold`` pixels from the baseline prediction, or when
    the matcher's probability column is too uncertain (entropy above
    ``entropy_threshold`` nats; None means ln(levels) / 2).
    """

    disparity_threshold: float = 1.0
    entropy_threshold: float | None = None
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.disparity_threshold < 0:
            raise ValueError("disparity threshold must be non-negative")
        if self.entropy_threshold is not None and self.entropy_threshold < 0:
            raise ValueError("entropy threshold must be non-negative")

    def resolve_entropy_threshold(self, levels: int) -> float:
        if self.entropy_threshold is not None:
            return self.entropy_threshold
        return math.log(levels) / 2.0


def default_integration_weights(steps: int) -> tuple[float, ...]:
    """Later steps weigh more, the baseline keeps half the mass.

    For five steps this is (0, 0, 0, 0.2, 0.3, 0.5); shorter runs fold the
    leading step weights onto the final step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        return (0.5, 0.5)
    return (0.0,) * (steps - 2) + (0.2, 0.3, 0.5)


@dataclass(frozen=True)
class SamplerConfig:
    """Reverse-process parameters.

    ``weights`` holds one entry per sampling step plus a trailing baseline
    weight; None selects :func:`default_integration_weights`. The timestep
    grid is evenly spaced and descending, starting at ``total_timesteps``
    (1000, 800, 600, 400, 200 for the 5-step default).
    """

    total_timesteps: int = 1000
    steps: int = 5
    eta: float = 0.0
    weights: tuple[float, ...] | None = None
    renewal: RenewalPolicy = field(default_factory=RenewalPolicy)
    seed: int = 0
    time_embedding_mode: str = "zero"

    def __post_init__(self) -> None:
        if self.total_timesteps < 1:
            raise ValueError("total_timesteps must be >= 1")
        if not 1 <= self.steps <= self.total_timesteps:
            raise ValueError("steps must lie in 1..total_timesteps")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.time_embedding_mode not in ("zero", "sinusoidal"):
            raise ValueError(f"unknown time embedding mode {self.time_embedding_mode!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != self.steps + 1:
                raise ValueError(
                    f"{len(w)} weights for {self.steps} steps; need steps + 1"
                )
            if any(x < 0 for x in w):
                raise ValueError("integration weights must be non-negative")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("integration weights must sum to 1")
            object.__setattr__(self, "weights", w)
        grid = self.timestep_grid()
        if any(a <= b for a, b in zip(grid, grid[1:])) or grid[-1] < 1:
            raise ValueError("timestep grid must be strictly decreasing and end >= 1")

    def timestep_grid(self) -> tuple[int, ...]:
        """Descending sampling timesteps t_S > ... > t_1 >= 1 with t_S = T."""
        T, S = self.total_timesteps, self.steps
        return tuple(round(i * T / S) for i in range(S, 0, -1))

    def integration_weights(self) -> tuple[float, ...]:
        if self.weights is not None:
            return self.weights
        return default_integration_weights(self.steps)


@dataclass
class SamplerOutput:
    """Everything a reverse run produces.

    ``predictions`` are the per-step disparity maps in sampling order
    (noisiest filter first). ``entropy_trace`` holds the mean column
    entropy of the filter volume at each grid timestep, measured on the
    denoised state before any renewal resets. ``snapshots`` optionally
    keeps those signed filter volumes for probing.
    """

    predictions: list[DisparityMap]
    integrated: DisparityMap
    outlier_counts: list[int]
    entropy_trace: list[float]
    snapshots: list[np.ndarray] | None = None


def time_embedding(t: int, dim: int, mode: str = "zero") -> np.ndarray:
    """Per-level additive embedding announcing the timestep to the filter.

    Zero mode disables the shift entirely; sinusoidal mode is the standard
    alternating sin/cos positional code scaled by 0.1.

    Raises:
        ValueError: for dim < 2 or an unknown mode.
    """
    if dim < 2:
        raise ValueError("embedding dimension must be >= 2")
    if mode == "zero":
        return np.zeros(dim, dtype=np.float64)
    if mode == "sinusoidal":
        idx = np.arange(dim, dtype=np.float64)
        freq = np.exp(-np.log(10000.0) * (2.0 * (idx // 2)) / dim)
        phase = t * freq
        emb = np.where(idx % 2 == 0, np.sin(phase), np.cos(phase))
        return 0.1 * emb
    raise ValueError(f"unknown time embedding mode {mode!r}")


def _ddim_sigma(schedule: NoiseSchedule, t: int, t_prev: int, eta: float) -> float:
    bar_t = schedule.bar(t)
    bar_prev = schedule.bar(t_prev)
    return eta * math.sqrt((1.0 - bar_t / bar_prev) * (1.0 - bar_prev) / (1.0 - bar_t))


def ddim_step(
    schedule: NoiseSchedule,
    x_t: np.ndarray,
    x0: np.ndarray,
    eps: np.ndarray,
    t: int,
    t_prev: int,
    eta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One (possibly skipping) reverse update from timestep t to t_prev.

    Computes sqrt(abar_prev) * x0 + sqrt(1 - abar_prev - sigma^2) * eps
    plus sigma times fresh Gaussian noise, with sigma scaled by eta. With
    eta = 0 the update is deterministic; stepping to t_prev = 0 lands on
    x0 exactly.

    Raises:
        ValueError: unless t > t_prev >= 0, or if sigma^2 exceeds
            1 - abar_prev (inconsistent configuration).
    """
    if not (t > t_prev >= 0):
        raise ValueError(f"need t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    sigma = _ddim_sigma(schedule, t, t_prev, eta)
    bar_prev = schedule.bar(t_prev)
    radicand = 1.0 - bar_prev - sigma * sigma
    if radicand < -1e-12:
        raise ValueError(f"sigma^2 = {sigma * sigma:.6g} exceeds 1 - alpha_bar = {1.0 - bar_prev:.6g}")
    out = np.sqrt(bar_prev) * np.asarray(x0, dtype=np.float64)
    out += math.sqrt(max(radicand, 0.0)) * np.asarray(eps, dtype=np.float64)
    if sigma > 0.0:
        out += sigma * rng.standard_normal(out.shape)
    return out


def ddpm_mean(schedule: NoiseSchedule, x_t: np.ndarray, x0: np.ndarray, t: int) -> np.ndarray:
    """Posterior mean of the single-step reverse distribution.

    mu = sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t) * x_t
       + sqrt(abar_{t-1}) beta_t / (1 - abar_t) * x0

    Raises:
        ValueError: if t < 1.
    """
    if not 1 <= t <= schedule.timesteps:
        raise ValueError(f"timestep {t} outside 1..{schedule.timesteps}")
    bar_t = schedule.bar(t)
    bar_prev = schedule.bar(t - 1)
    alpha_t = float(schedule.alpha[t - 1])
    beta_t = float(schedule.beta[t - 1])
    coef_xt = math.sqrt(alpha_t) * (1.0 - bar_prev) / (1.0 - bar_t)
    coef_x0 = math.sqrt(bar_prev) * beta_t / (1.0 - bar_t)
    return coef_xt * np.asarray(x_t, dtype=np.float64) + coef_x0 * np.asarray(x0, dtype=np.float64)


def ddpm_step(
    schedule: NoiseSchedule,
    x_t: np.ndarray,
    x0: np.ndarray,
    t: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Stochastic single-step reverse update t -> t - 1.

    Adds noise with the posterior standard deviation
    sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t)) to :func:`ddpm_mean`;
    the variance vanishes at t = 1.
    """
    mean = ddpm_mean(schedule, x_t, x0, t)
    bar_t = schedule.bar(t)
    bar_prev = schedule.bar(t - 1)
    beta_t = float(schedule.beta[t - 1])
    sigma = math.sqrt(beta_t * (1.0 - bar_prev) / (1.0 - bar_t))
    if sigma > 0.0:
        mean = mean + sigma * rng.standard_normal(mean.shape)
    return mean


def volume_renewal(
    dv: np.ndarray,
    pred: DisparityMap,
    baseline: DisparityMap,
    probabilities: np.ndarray,
    policy: RenewalPolicy,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Reset filter columns at outlier pixels to fresh rescaled noise.

    Outliers deviate from the baseline prediction by more than the policy's
    disparity threshold or carry an over-uncertain probability column.
    Their filter columns are replaced by standard-normal draws min-max
    rescaled to [0, 1] per column and mapped to the signed state; other
    columns pass through untouched.

    Returns:
        (renewed volume, outlier mask, outlier count).
    """
    dv = np.asarray(dv, dtype=np.float64)
    if dv.ndim != 3 or dv.shape[1:] != pred.values.shape or pred.values.shape != baseline.values.shape:
        raise ValueError("filter volume, prediction and baseline shapes must agree")
    if probabilities.shape != dv.shape:
        raise ValueError("probability volume shape must match the filter volume")
    if not policy.enabled:
        return dv, np.zeros(dv.shape[1:], dtype=bool), 0
    outliers = np.abs(pred.values - baseline.values) > policy.disparity_threshold
    threshold = policy.resolve_entropy_threshold(dv.shape[0])
    outliers |= entropy_map(probabilities) > threshold
    count = int(outliers.sum())
    if count == 0:
        return dv, outliers, 0
    draws = rng.standard_normal((dv.shape[0], count))
    lo = draws.min(axis=0)
    span = draws.max(axis=0) - lo
    span = np.where(span > 0.0, span, 1.0)
    renewed = dv.copy()
    renewed[:, outliers] = rescale_signed((draws - lo) / span)
    return renewed, outliers, count


def dense_integration(
    predictions: list[DisparityMap],
    baseline: DisparityMap,
    weights: tuple[float, ...],
) -> DisparityMap:
    """Pixel-wise convex combination of step predictions and the baseline.

    The last weight belongs to the baseline.

    Raises:
        ValueError: on weight-count mismatch, negative weights, or weights
            not summing to 1.
    """
    if len(weights) != len(predictions) + 1:
        raise ValueError(f"{len(weights)} weights for {len(predictions)} predictions")
    if any(w < 0 for w in weights):
        raise ValueError("integration weights must be non-negative")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("integration weights must sum to 1")
    values = weights[-1] * baseline.values.copy()
    mask = baseline.mask.copy()
    for w, pred in zip(weights, predictions):
        values += w * pred.values
        mask &= pred.mask
    return DisparityMap(values, mask)


def run_reverse(
    base_volume: np.ndarray,
    matcher,
    baseline: DisparityMap,
    config: SamplerConfig,
    schedule: NoiseSchedule | None = None,
    keep_snapshots: bool = False,
) -> SamplerOutput:
    """Run the full reverse filtering loop over a base cost volume.

    Args:
        base_volume: (C, D, H, W) cost volume of the unfiltered matcher.
        matcher: callable mapping a cost volume to
            (probability volume, disparity map).
        baseline: prediction of the unfiltered matcher on ``base_volume``;
            anchors both volume renewal and dense integration.
        config: sampler parameters.
        schedule: noise schedule; defaults to the cosine schedule over
            ``config.total_timesteps``.
        keep_snapshots: retain the signed filter volume at every grid
            timestep (pre-renewal) for entropy probing.
    """
    base_volume = np.asarray(base_volume, dtype=np.float64)
    if base_volume.ndim != 4:
        raise ValueError("base volume must be (channels, levels, H, W)")
    levels, height, width = base_volume.shape[1:]
    if baseline.values.shape != (height, width):
        raise ValueError("baseline prediction does not match the volume geometry")
    if schedule is None:
        schedule = cosine_schedule(config.total_timesteps)
    elif schedule.timesteps != config.total_timesteps:
        raise ValueError("schedule length does not match config.total_timesteps")

    rng = np.random.Generator(np.random.Philox(config.seed))
    grid = config.timestep_grid()
    weights = config.integration_weights()

    dv = rng.standard_normal((levels, height, width))
    predictions: list[DisparityMap] = []
    outlier_counts: list[int] = []
    entropy_trace: list[float] = [float(signed_volume_entropy(dv).mean())]
    snapshots: list[np.ndarray] | None = [dv.copy()] if keep_snapshots else None

    for i, t in enumerate(grid):
        embedding = time_embedding(t, levels, config.time_embedding_mode)
        filtered = filter_volume(base_volume, rescale_unit(dv), embedding)
        probabilities, pred = matcher(filtered)
        predictions.append(pred)

        dv0 = rescale_signed(discretize_two_hot(pred, levels))
        eps = recover_noise(schedule, dv, dv0, t)
        t_prev = grid[i + 1] if i + 1 < len(grid) else 0
        dv_next = ddim_step(schedule, dv, dv0, eps, t, t_prev, config.eta, rng)

        if i + 1 < len(grid):
            entropy_trace.append(float(signed_volume_entropy(dv_next).mean()))
            if keep_snapshots:
                snapshots.append(dv_next.copy())

        dv_next, _, count = volume_renewal(
            dv_next, pred, baseline, probabilities, config.renewal, rng
        )
        outlier_counts.append(count)
        dv = dv_next

    integrated = dense_integration(predictions, baseline, weights)
    return SamplerOutput(
        predictions=predictions,
        integrated=integrated,
        outlier_counts=outlier_counts,
        entropy_trace=entropy_trace,
        snapshots=snapshots,
    )
