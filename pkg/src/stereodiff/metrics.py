"""Stereo evaluation metrics.

All metrics average over the pixels selected by a boolean mask. Error
thresholds are strict: a pixel counts as bad only when its error is larger
than the threshold, matching the usual benchmark wording.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "MetricReport",
    "epe",
    "bad_p",
    "d1",
    "weighted_l1_loss",
    "evaluate",
    "trim_mask",
]

# Standard weighting of staged predictions, final stage counting full.
DEFAULT_LOSS_WEIGHTS = (0.5, 0.7, 1.0)


def _masked_error(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or pred.shape != mask.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.shape}, gt {gt.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise ValueError("mask selects no pixels")
    return np.abs(pred[mask] - gt[mask])


def epe(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute disparity error in pixels over the masked region."""
    return float(_masked_error(pred, gt, mask).mean())


def bad_p(pred: np.ndarray, gt: np.ndarray, p: float, mask: np.ndarray) -> float:
    """Percentage of masked pixels with error strictly greater than p."""
    if p <= 0:
        raise ValueError("threshold must be positive")
    err = _masked_error(pred, gt, mask)
    return float(100.0 * np.count_nonzero(err > p) / err.size)


def d1(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Disparity outlier percentage: error > 3 px and > 5% of ground truth."""
    err = _masked_error(pred, gt, mask)
    gt_vals = np.abs(np.asarray(gt, dtype=np.float64)[np.asarray(mask, dtype=bool)])
    outlier = (err > 3.0) & (err > 0.05 * gt_vals)
    return float(100.0 * np.count_nonzero(outlier) / err.size)


def weighted_l1_loss(
    preds: list[np.ndarray],
    gt: np.ndarray,
    weights: tuple[float, ...] | None = None,
    mask: np.ndarray | None = None,
) -> float:
    """Weighted sum of the mean L1 errors of staged predictions.

    With ``weights`` omitted the standard three-stage coefficients
    (0.5, 0.7, 1.0) are used. The mask defaults to all pixels.

    Raises:
        ValueError: if the weight count does not match the predictions.
    """
    if weights is None:
        weights = DEFAULT_LOSS_WEIGHTS
    if len(weights) != len(preds):
        raise ValueError(f"{len(weights)} weights for {len(preds)} predictions")
    gt = np.asarray(gt, dtype=np.float64)
    if mask is None:
        mask = np.ones(gt.shape, dtype=bool)
    return float(sum(w * epe(p, gt, mask) for w, p in zip(weights, preds)))


@dataclass(frozen=True)
class MetricReport:
    """Flat bundle of the standard stereo metrics."""

    epe: float
    bad_1: float
    bad_2: float
    bad_3: float
    d1_all: float
    pixels: int

    def to_text(self) -> str:
        """key=value block, one metric per line."""
        lines = [f"{key}={value:.6f}" for key, value in asdict(self).items() if key != "pixels"]
        lines.append(f"pixels={self.pixels}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def evaluate(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> MetricReport:
    """Compute the full metric report for one prediction."""
    mask = np.asarray(mask, dtype=bool)
    return MetricReport(
        epe=epe(pred, gt, mask),
        bad_1=bad_p(pred, gt, 1.0, mask),
        bad_2=bad_p(pred, gt, 2.0, mask),
        bad_3=bad_p(pred, gt, 3.0, mask),
        d1_all=d1(pred, gt, mask),
        pixels=int(mask.sum()),
    )


def trim_mask(mask: np.ndarray, margin: int) -> np.ndarray:
    """Drop a border of ``margin`` pixels from a validity mask.

    Used to evaluate on interior pixels only, away from feature-window and
    warp boundary effects.
    """
    mask = np.asarray(mask, dtype=bool)
    if margin <= 0:
        return mask.copy()
    out = np.zeros_like(mask)
    if mask.shape[0] > 2 * margin and mask.shape[1] > 2 * margin:
        out[margin:-margin, margin:-margin] = mask[margin:-margin, margin:-margin]
    return out
