"""Disparity maps, probability volumes and the conversions between them.

Arrays use a (level, row, column) layout for volumes and (row, column) for
maps. A probability volume carries one weight vector per pixel over the
disparity levels. The diffusion code additionally passes volumes around in
a "signed" state produced by :func:`rescale_signed`; signed values are
centred on zero and are never clamped, so intermediates may leave the
nominal [-1, 1] range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DisparityMap",
    "discretize_two_hot",
    "soft_argmin",
    "rescale_signed",
    "rescale_unit",
    "entropy_map",
    "signed_volume_entropy",
    "filter_volume",
    "downsample_disparity",
]


@dataclass
class DisparityMap:
    """Dense disparity field in pixels plus a per-pixel validity mask.

    ``mask`` is True where the value is trusted (ground truth present, or a
    prediction within the matching range). Values at masked-out pixels are
    ignored by every consumer and may be arbitrary, including NaN.
    """

    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ValueError("disparity values must be a non-empty 2-D array")
        if self.mask is None:
            self.mask = np.ones(self.values.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise ValueError(
                    f"mask shape {self.mask.shape} does not match "
                    f"values shape {self.values.shape}"
                )

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def discretize_two_hot(disp: DisparityMap, levels: int) -> np.ndarray:
    """Spread each disparity over the two adjacent integer levels.

    A disparity d with fractional part f gets weight 1 - f at floor(d) and
    f at ceil(d), so the weighted level sum reproduces d exactly. Integer
    disparities put all weight on their own level. Pixels that are masked
    out receive a uniform column, claiming no information.

    Args:
        disp: Disparity field; valid values must lie in [0, levels - 1].
        levels: Number of disparity levels D.

    Returns:
        (D, H, W) probability volume whose columns each sum to 1.

    Raises:
        ValueError: if a valid pixel lies outside [0, levels - 1].
    """
    if levels < 2:
        raise ValueError("need at least two disparity levels")
    values, mask = disp.values, disp.mask
    bad = mask & (~(values >= 0.0) | (values > levels - 1))
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise ValueError(
            f"disparity {values[y, x]!r} at pixel (x={x}, y={y}) "
            f"outside [0, {levels - 1}]"
        )

    safe = np.where(mask, values, 0.0)
    lo = np.floor(safe).astype(np.int64)
    lo = np.minimum(lo, levels - 1)
    hi = np.minimum(lo + 1, levels - 1)
    w_hi = safe - lo
    w_lo = 1.0 - w_hi

    volume = np.zeros((levels,) + values.shape, dtype=np.float64)
    rows, cols = np.indices(values.shape)
    volume[lo, rows, cols] = w_lo
    volume[hi, rows, cols] += w_hi
    volume[:, ~mask] = 1.0 / levels
    return volume


def soft_argmin(volume: np.ndarray, tol: float = 1e-4) -> DisparityMap:
    """Regress a disparity map as the probability-weighted sum of levels.

    Args:
        volume: (D, H, W) probability volume; every column must sum to 1
            within ``tol``.

    Raises:
        ValueError: if some column is not normalized.
    """
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3:
        raise ValueError("probability volume must be (levels, H, W)")
    sums = volume.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > tol:
        raise ValueError("probability columns must sum to 1")
    levels = np.arange(volume.shape[0], dtype=np.float64)
    values = np.einsum("d,dhw->hw", levels, volume)
    return DisparityMap(values)


def rescale_signed(volume: np.ndarray) -> np.ndarray:
    """Affine map x -> 2x - 1 taking unit-range values to the signed state."""
    return 2.0 * np.asarray(volume, dtype=np.float64) - 1.0


def rescale_unit(volume: np.ndarray) -> np.ndarray:
    """Affine map x -> (x + 1) / 2, the exact inverse of rescale_signed."""
    return (np.asarray(volume, dtype=np.float64) + 1.0) / 2.0


def entropy_map(volume: np.ndarray) -> np.ndarray:
    """Per-pixel Shannon entropy of the level distribution, in nats.

    Zero probabilities contribute nothing (0 log 0 := 0).

    Raises:
        ValueError: if any probability is negative.
    """
    volume = np.asarray(volume, dtype=np.float64)
    if np.any(volume < 0.0):
        raise ValueError("probabilities must be non-negative")
    plogp = np.where(volume > 0.0, volume * np.log(np.where(volume > 0.0, volume, 1.0)), 0.0)
    return -plogp.sum(axis=0)


def signed_volume_entropy(volume: np.ndarray) -> np.ndarray:
    """Entropy map of a signed-state volume.

    The volume is mapped back to the unit range, negative entries are
    floored at zero and each column is renormalized before the entropy is
    taken. Columns with no positive mass at all count as uniform.
    """
    unit = np.clip(rescale_unit(volume), 0.0, None)
    sums = unit.sum(axis=0)
    levels = unit.shape[0]
    flat = sums <= 0.0
    probs = np.where(flat, 1.0 / levels, unit / np.where(flat, 1.0, sums))
    return entropy_map(probs)


def filter_volume(base: np.ndarray, weights: np.ndarray, embedding: np.ndarray) -> np.ndarray:
    """Gate a cost volume by a weight volume plus a per-level embedding.

    Every channel of ``base`` is multiplied element-wise by
    ``weights + embedding`` (the embedding broadcasts over pixels, the sum
    broadcasts over channels).

    Args:
        base: (C, D, H, W) cost volume.
        weights: (D, H, W) filter volume.
        embedding: length-D vector added to the filter before gating.

    Raises:
        ValueError: on any shape mismatch.
    """
    base = np.asarray(base, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    embedding = np.asarray(embedding, dtype=np.float64)
    if base.ndim != 4:
        raise ValueError("cost volume must be (channels, levels, H, W)")
    if weights.shape != base.shape[1:]:
        raise ValueError(
            f"filter shape {weights.shape} does not match volume {base.shape[1:]}"
        )
    if embedding.shape != (base.shape[1],):
        raise ValueError(
            f"embedding length {embedding.shape} does not match level count {base.shape[1]}"
        )
    return base * (weights + embedding[:, None, None])


def downsample_disparity(disp: DisparityMap, factor: int) -> DisparityMap:
    """Reduce resolution by nearest sampling at stride ``factor``.

    Values are divided by the factor so that one disparity unit still spans
    one pixel at the reduced resolution. If the factor does not divide the
    dimensions the map is edge-padded up to the next multiple first.

    Raises:
        ValueError: if factor <= 0.
    """
    if factor <= 0:
        raise ValueError("downsample factor must be positive")
    if factor == 1:
        return DisparityMap(disp.values.copy(), disp.mask.copy())
    values, mask = disp.values, disp.mask
    pad_h = (-values.shape[0]) % factor
    pad_w = (-values.shape[1]) % factor
    if pad_h or pad_w:
        values = np.pad(values, ((0, pad_h), (0, pad_w)), mode="edge")
        mask = np.pad(mask, ((0, pad_h), (0, pad_w)), mode="edge")
    return DisparityMap(values[::factor, ::factor] / factor, mask[::factor, ::factor])
