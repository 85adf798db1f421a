"""Classical volume-based stereo matcher.

Patch features take the place of a learned extractor, group-wise
correlation builds the base cost volume, and aggregation is a spatial box
filter followed by a temperature softmax. Everything works on the
similarity convention: larger scores mean better matches, so a matcher
producing dissimilarities must negate before aggregation.

The plug-in contract used by the reverse sampler is a callable taking a
(C, D, H, W) cost volume and returning ``(probability_volume, prediction)``;
:func:`make_matcher` wraps :func:`base_predict` into that shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import uniform_filter

from .volume import DisparityMap, soft_argmin

__all__ = [
    "ImagePair",
    "MatcherConfig",
    "VolumeMatcher",
    "extract_features",
    "build_concat_volume",
    "build_group_corr_volume",
    "fuse_volumes",
    "aggregate",
    "base_predict",
    "make_matcher",
    "compute_base_volume",
]

# (C, D, H, W) cost volume -> (probability volume, disparity prediction)
VolumeMatcher = Callable[[np.ndarray], tuple[np.ndarray, DisparityMap]]


@dataclass
class ImagePair:
    """Rectified grayscale stereo pair with intensities in [0, 1]."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if self.left.ndim != 2 or self.left.shape != self.right.shape:
            raise ValueError("left and right must be 2-D arrays of identical shape")
        for name, img in (("left", self.left), ("right", self.right)):
            if img.min() < -1e-9 or img.max() > 1.0 + 1e-9:
                raise ValueError(f"{name} image intensities must lie in [0, 1]")


@dataclass(frozen=True)
class MatcherConfig:
    """Knobs of the classical matcher.

    ``max_disparity`` is the search range in full-resolution pixels; the
    volume has max_disparity / downsample levels. ``census_radius`` sets the
    patch feature window, giving (2r + 1)^2 channels, and ``groups`` must
    divide that channel count. ``temperature`` sharpens the aggregation
    softmax, acting on standardized scores; an isolated peak sits about
    sqrt(levels) spreads above the rest, so the default saturates the
    softmax at unambiguous pixels while leaving split peaks soft.
    """

    max_disparity: int = 64
    downsample: int = 1
    census_radius: int = 3
    groups: int = 7
    agg_radius: int = 2
    temperature: float = 0.5

    def __post_init__(self) -> None:
        if self.downsample not in (1, 4):
            raise ValueError("downsample factor must be 1 or 4")
        if self.max_disparity < 2 or self.max_disparity % self.downsample:
            raise ValueError("max_disparity must be >= 2 and divisible by downsample")
        if self.census_radius < 0:
            raise ValueError("census radius must be non-negative")
        if self.groups < 1 or self.n_channels % self.groups:
            raise ValueError(
                f"groups ({self.groups}) must divide the channel count ({self.n_channels})"
            )
        if self.agg_radius < 0:
            raise ValueError("aggregation radius must be non-negative")
        if self.temperature <= 0:
            raise ValueError("softmax temperature must be positive")

    @property
    def n_channels(self) -> int:
        return (2 * self.census_radius + 1) ** 2

    @property
    def levels(self) -> int:
        return self.max_disparity // self.downsample


def extract_features(image: np.ndarray, config: MatcherConfig) -> np.ndarray:
    """Per-pixel patch descriptors: the local window minus its mean.

    The image is first sampled at the downsample stride, then each pixel is
    described by its (2r + 1)^2 neighbourhood intensities with the window
    mean subtracted. Borders are handled by edge replication.

    Args:
        image: (H, W) grayscale grid in [0, 1].

    Returns:
        (channels, H', W') feature map at the reduced resolution.

    Raises:
        ValueError: if the window does not fit inside the strided image.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    if image.min() < -1e-9 or image.max() > 1.0 + 1e-9:
        raise ValueError("image intensities must lie in [0, 1]")
    if config.downsample > 1:
        image = image[:: config.downsample, :: config.downsample]
    h, w = image.shape
    r = config.census_radius
    if 2 * r + 1 > min(h, w):
        raise ValueError("feature window larger than image")
    padded = np.pad(image, r, mode="edge")
    channels = np.empty((config.n_channels, h, w), dtype=np.float64)
    k = 0
    for dy in range(2 * r + 1):
        for dx in range(2 * r + 1):
            channels[k] = padded[dy : dy + h, dx : dx + w]
            k += 1
    channels -= channels.mean(axis=0)
    return channels


def _shifted_right(features: np.ndarray, d: int) -> np.ndarray:
    """Right features aligned to the reference at level d, zero outside."""
    out = np.zeros_like(features)
    if d == 0:
        out[:] = features
    else:
        out[:, :, d:] = features[:, :, : features.shape[2] - d]
    return out


def build_concat_volume(left: np.ndarray, right: np.ndarray, levels: int) -> np.ndarray:
    """Concatenation cost volume: left and shifted right channel blocks.

    At level d and column x the right block holds the right features from
    column x - d; columns with x < d are zero-filled.

    Raises:
        ValueError: on shape mismatch or levels exceeding the image width.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 3:
        raise ValueError("feature maps must be (channels, H, W) with equal shapes")
    c, h, w = left.shape
    if levels > w:
        raise ValueError(f"levels ({levels}) exceed image width ({w})")
    volume = np.zeros((2 * c, levels, h, w), dtype=np.float64)
    for d in range(levels):
        volume[:c, d] = left
        volume[c:, d] = _shifted_right(right, d)
    return volume


def build_group_corr_volume(
    left: np.ndarray, right: np.ndarray, levels: int, groups: int
) -> np.ndarray:
    """Group-wise correlation volume.

    Channels are split into ``groups`` blocks and each block contributes the
    mean inner product of its left and shifted-right features, i.e.
    (groups / channels) * <left_g, right_g>. Out-of-range columns are zero.

    Raises:
        ValueError: if groups does not divide the channel count.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 3:
        raise ValueError("feature maps must be (channels, H, W) with equal shapes")
    c, h, w = left.shape
    if groups < 1 or c % groups:
        raise ValueError(f"groups ({groups}) must divide channel count ({c})")
    if levels > w:
        raise ValueError(f"levels ({levels}) exceed image width ({w})")
    per_group = c // groups
    volume = np.zeros((groups, levels, h, w), dtype=np.float64)
    for d in range(levels):
        prod = left[:, :, d:] * right[:, :, : w - d]
        grouped = prod.reshape(groups, per_group, h, w - d).sum(axis=1) / per_group
        volume[:, d, :, d:] = grouped
    return volume


def fuse_volumes(a: np.ndarray, b: np.ndarray, weight_a: float = 0.5, weight_b: float = 0.5) -> np.ndarray:
    """Stack two cost volumes channel-wise with scalar weights.

    The channel mean seen by aggregation then equals a channel-count
    weighted sum of the two volumes' means. Level and spatial dimensions
    must agree; channel counts may differ.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"volume geometry differs: {a.shape[1:]} vs {b.shape[1:]}")
    return np.concatenate([weight_a * a, weight_b * b], axis=0)


def aggregate(volume: np.ndarray, config: MatcherConfig) -> np.ndarray:
    """Collapse a cost volume to a probability volume.

    Scores are the channel mean, box-filtered per level over a
    (2 * agg_radius + 1)^2 spatial window, standardized per pixel column
    (zero mean, unit spread over levels) and softmaxed with the configured
    temperature. The standardization makes the decision invariant to the
    local score scale, so multiplying the volume by a filter can only
    reshape a column, never wash it out; a column with no spread at all
    stays uniform.

    Returns:
        (D, H, W) probability volume; every column sums to 1.
    """
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 4:
        raise ValueError("cost volume must be (channels, levels, H, W)")
    scores = volume.mean(axis=0)
    k = 2 * config.agg_radius + 1
    if k > 1:
        scores = uniform_filter(scores, size=(1, k, k), mode="nearest")
    spread = scores.std(axis=0)
    normalized = (scores - scores.mean(axis=0)) / np.where(spread > 0.0, spread, 1.0)
    logits = normalized / config.temperature
    logits -= logits.max(axis=0)
    weights = np.exp(logits)
    return weights / weights.sum(axis=0)


def base_predict(volume: np.ndarray, config: MatcherConfig) -> tuple[np.ndarray, DisparityMap]:
    """Aggregate a (possibly filtered) cost volume and regress disparities.

    Returns:
        (probability volume, disparity map); the probability volume doubles
        as the per-pixel uncertainty source for the reverse sampler.
    """
    probabilities = aggregate(volume, config)
    return probabilities, soft_argmin(probabilities)


def make_matcher(config: MatcherConfig) -> VolumeMatcher:
    """Bind a config into the sampler-facing matcher callable."""

    def matcher(volume: np.ndarray) -> tuple[np.ndarray, DisparityMap]:
        return base_predict(volume, config)

    return matcher


def compute_base_volume(pair: ImagePair, config: MatcherConfig) -> np.ndarray:
    """Features plus group correlation for a stereo pair.

    This is the default base volume of the pipeline; the concatenation
    volume is available separately via :func:`build_concat_volume` and can
    be mixed in with :func:`fuse_volumes`.
    """
    left = extract_features(pair.left, config)
    right = extract_features(pair.right, config)
    return build_group_corr_volume(left, right, config.levels, config.groups)
