"""Teacher-output post-processing: argmax pseudo-labels and confidence
filtering of predicted instances.

The confidence ratio ``k`` follows the DACS convention: the fraction of
pixels whose winning softmax probability reaches ``conf_threshold``
(default 0.968). ``k`` weights target-origin pixels in the mixed
cross-entropy; the per-pixel maxima are kept alongside for callers that
prefer a spatial weighting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.types import (
    PREDICTED,
    InstanceSet,
    ValidationError,
    check_prob_volume,
    freeze_array,
)

DEFAULT_CONF_THRESHOLD = 0.968


@dataclass(frozen=True)
class PseudoSemantic:
    """Argmax labels with an image-level confidence ratio.

    labels  : uint16 (H, W), one class id per pixel (no IGNORE entries)
    k       : fraction of pixels whose max probability >= the threshold
    max_prob: float64 (H, W), the winning probability per pixel
    """
    labels: np.ndarray
    k: float
    max_prob: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", freeze_array(self.labels))
        object.__setattr__(self, "max_prob", freeze_array(self.max_prob))


@dataclass(frozen=True)
class FilterConfig:
    """Confidence threshold for instance filtering; records survive iff
    score is strictly greater than tau."""
    tau: float

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ValidationError(f"tau {self.tau} outside [0, 1]")


def semantic_argmax(probs: np.ndarray,
                    conf_threshold: float = DEFAULT_CONF_THRESHOLD) -> PseudoSemantic:
    """Per-pixel argmax pseudo-labels; ties go to the lowest class id."""
    check_prob_volume(probs)
    labels = probs.argmax(axis=2).astype(np.uint16)
    max_prob = np.take_along_axis(probs, labels[..., None].astype(np.intp),
                                  axis=2)[..., 0].astype(np.float64)
    k = float(np.count_nonzero(max_prob >= conf_threshold) / max_prob.size)
    return PseudoSemantic(labels=labels, k=k, max_prob=max_prob)


def filter_instances(pred: InstanceSet, cfg: FilterConfig) -> tuple[InstanceSet, np.ndarray]:
    """Keep records with score > tau; also return the union of kept masks.

    tau = 0 keeps everything with positive score; tau = 1 keeps nothing,
    which disables instance mixing entirely.
    """
    if pred.provenance != PREDICTED:
        raise ValidationError("filtering applies to predicted instances only")
    kept = tuple(r for r in pred if r.score > cfg.tau)
    if kept:
        h, w = kept[0].mask.shape
        union = np.zeros((h, w), dtype=bool)
        for r in kept:
            union |= r.mask
    elif pred.records:
        union = np.zeros(pred.records[0].mask.shape, dtype=bool)
    else:
        union = np.zeros((0, 0), dtype=bool)
    return InstanceSet(kept, PREDICTED), union
