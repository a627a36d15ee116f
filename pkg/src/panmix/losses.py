"""Training losses as pure functions of arrays.

Every loss returns a ``LossOutput`` holding the scalar value and the
analytic gradient with respect to the differentiated input, so the whole
family can be verified against central finite differences without any
network in the loop (see :mod:`panmix.gradcheck`).

Gradients are reported in logit space: for inputs given as probabilities
(softmax or sigmoid outputs), the gradient is taken with respect to the
pre-activation values, which is both numerically stable and what an
optimizer actually consumes. For the similarity loss the input already is
a logit volume and the gradient is with respect to it directly.

Probabilities are clamped at 1e-12 before any log. Pixels labeled IGNORE
contribute zero value and zero gradient everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .core.types import IGNORE, ValidationError, check_prob_volume
from .mixing import MixedSample

CLAMP = 1e-12

Gradient = Union[np.ndarray, Mapping[str, np.ndarray]]


@dataclass(frozen=True)
class LossOutput:
    """A finite non-negative scalar plus the gradient of the differentiated
    input (a single array, or a dict of arrays for multi-head losses)."""
    value: float
    grad: Gradient

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValidationError(f"loss value {self.value} is not finite")
        if self.value < 0:
            raise ValidationError(f"loss value {self.value} is negative")
        grads = self.grad.values() if isinstance(self.grad, Mapping) else [self.grad]
        for g in grads:
            if not np.isfinite(g).all():
                raise ValidationError("gradient contains non-finite values")


def _log(p: np.ndarray) -> np.ndarray:
    return np.log(np.clip(p, CLAMP, None))


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis`."""
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_softmax = softmax


def _log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def _onehot_rows(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros(labels.shape + (num_classes,), dtype=np.float64)
    np.put_along_axis(out, labels[..., None].astype(np.intp), 1.0, axis=-1)
    return out


def semantic_ce(probs: np.ndarray, labels: np.ndarray) -> LossOutput:
    """Pixelwise cross-entropy between a probability volume and hard labels,
    averaged over labeled pixels. Gradient: softmax minus one-hot."""
    check_prob_volume(probs)
    counted = labels != IGNORE
    n = int(counted.sum())
    if n == 0:
        raise ValidationError("cross-entropy over a fully unlabeled map")
    y = labels[counted].astype(np.intp)
    p = probs[counted].astype(np.float64)
    value = float(-_log(p[np.arange(n), y]).sum() / n)
    grad = np.zeros(probs.shape, dtype=np.float64)
    grad[counted] = (p - _onehot_rows(y, probs.shape[2])) / n
    return LossOutput(value=value, grad=grad)


def mixed_semantic_ce(probs: np.ndarray, mixed: MixedSample) -> LossOutput:
    """Cross-entropy on a composed sample: source-origin pixels count fully,
    target-origin pixels are scaled by the pseudo-label confidence.

    The normalizer is the labeled-pixel count, independent of the weights,
    so an all-source sample reduces exactly to :func:`semantic_ce`.
    """
    check_prob_volume(probs)
    labels = mixed.semantic
    conf = mixed.pixel_confidence
    counted = labels != IGNORE
    n = int(counted.sum())
    if n == 0:
        raise ValidationError("cross-entropy over a fully unlabeled map")
    y = labels[counted].astype(np.intp)
    p = probs[counted].astype(np.float64)
    w = conf[counted].astype(np.float64)
    value = float(-(w * _log(p[np.arange(n), y])).sum() / n)
    grad = np.zeros(probs.shape, dtype=np.float64)
    grad[counted] = w[:, None] * (p - _onehot_rows(y, probs.shape[2])) / n
    return LossOutput(value=value, grad=grad)


def cda_loss(sim: np.ndarray, labels: np.ndarray) -> LossOutput:
    """Alignment loss on a pixel-text similarity volume.

    The similarity logits are softmaxed over classes per pixel and scored
    against the semantic labels; the sum is normalized by (labeled pixels
    x classes). A fully unlabeled map yields value 0 and zero gradient.
    """
    if sim.ndim != 3:
        raise ValidationError(f"similarity volume must be (H, W, C), got {sim.shape}")
    if labels.shape != sim.shape[:2]:
        raise ValidationError("labels and similarity volume disagree on H, W")
    c = sim.shape[2]
    counted = labels != IGNORE
    n = int(counted.sum())
    grad = np.zeros(sim.shape, dtype=np.float64)
    if n == 0:
        return LossOutput(value=0.0, grad=grad)
    y = labels[counted].astype(np.intp)
    rows = sim[counted].astype(np.float64)
    logp = _log_softmax(rows, axis=1)
    value = float(-logp[np.arange(n), y].sum() / (n * c))
    grad[counted] = (np.exp(logp) - _onehot_rows(y, c)) / (n * c)
    return LossOutput(value=value, grad=grad)


def _check_unit_interval(p: np.ndarray, what: str) -> None:
    if ((p <= 0.0) | (p >= 1.0)).any():
        raise ValidationError(f"{what} must lie strictly inside (0, 1)")


def rpn_loss(objectness_pred: np.ndarray, objectness_gt: np.ndarray,
             box_pred: np.ndarray, box_gt: np.ndarray,
             positives: np.ndarray, lam: float = 1.0) -> LossOutput:
    """Proposal loss: binary cross-entropy on objectness over all anchors,
    plus an L1 penalty on the four box offsets of positive anchors.

    Gradient heads: "objectness" (with respect to the pre-sigmoid scores)
    and "box".
    """
    a = objectness_pred.shape[0]
    if objectness_gt.shape != (a,) or positives.shape != (a,):
        raise ValidationError("anchor lists must have equal length")
    if box_pred.shape != (a, 4) or box_gt.shape != (a, 4):
        raise ValidationError("box arrays must be (A, 4)")
    _check_unit_interval(objectness_pred, "objectness scores")
    if not np.isin(objectness_gt, (0.0, 1.0)).all():
        raise ValidationError("objectness targets must be 0 or 1")

    lhat = objectness_pred.astype(np.float64)
    l = objectness_gt.astype(np.float64)
    bce = float(-(l * _log(lhat) + (1 - l) * _log(1 - lhat)).mean())
    grad_obj = (lhat - l) / a

    grad_box = np.zeros((a, 4), dtype=np.float64)
    npos = int(positives.sum())
    box_term = 0.0
    if npos:
        diff = (box_pred - box_gt)[positives].astype(np.float64)
        box_term = lam * float(np.abs(diff).sum(axis=1).mean())
        grad_box[positives] = lam * np.sign(diff) / npos

    return LossOutput(value=bce + box_term,
                      grad={"objectness": grad_obj, "box": grad_box})


def refinement_loss(class_probs: np.ndarray, class_gt: np.ndarray,
                    box_pred_per_class: np.ndarray, box_gt: np.ndarray,
                    lam: float = 1.0) -> LossOutput:
    """Second-stage loss over a batch of regions: categorical cross-entropy
    over thing classes plus background, and an L1 box penalty that reads
    only the predicted column of the region's true class.

    The background class is the last column; background regions contribute
    no box term. Gradient heads: "class" (pre-softmax) and "box".
    """
    r, k1 = class_probs.shape
    k = k1 - 1
    if class_gt.shape != (r,):
        raise ValidationError("one class label per region required")
    if box_pred_per_class.shape != (r, k, 4) or box_gt.shape != (r, 4):
        raise ValidationError(f"box arrays must be ({r}, {k}, 4) and ({r}, 4)")
    u = class_gt.astype(np.intp)
    if (u < 0).any() or (u > k).any():
        raise ValidationError("class label outside [0, num_things]")
    rows = class_probs.astype(np.float64)
    if np.abs(rows.sum(axis=1) - 1).max() > 1e-6:
        raise ValidationError("class probabilities must sum to 1 per region")

    ce = float(-_log(rows[np.arange(r), u]).mean())
    grad_class = (rows - _onehot_rows(u, k1)) / r

    grad_box = np.zeros((r, k, 4), dtype=np.float64)
    fg = u < k
    nfg = int(fg.sum())
    box_term = 0.0
    if nfg:
        idx = np.flatnonzero(fg)
        diff = (box_pred_per_class[idx, u[idx]] - box_gt[idx]).astype(np.float64)
        box_term = lam * float(np.abs(diff).sum(axis=1).mean())
        grad_box[idx, u[idx]] = lam * np.sign(diff) / nfg

    return LossOutput(value=ce + box_term,
                      grad={"class": grad_class, "box": grad_box})


def mask_bce(mask_pred: np.ndarray, mask_gt: np.ndarray,
             class_gt: int) -> LossOutput:
    """Per-pixel binary cross-entropy on the predicted mask channel of the
    region's true class; other channels carry no loss and zero gradient.
    Gradient is with respect to the pre-sigmoid mask logits."""
    if mask_pred.ndim != 3:
        raise ValidationError("mask predictions must be (num_things, h, w)")
    k, h, w = mask_pred.shape
    if mask_gt.shape != (h, w) or mask_gt.dtype != bool:
        raise ValidationError("mask target must be a boolean (h, w) array")
    if not (0 <= class_gt < k):
        raise ValidationError(f"class {class_gt} outside [0, {k})")
    _check_unit_interval(mask_pred, "mask probabilities")
    mu = mask_pred[class_gt].astype(np.float64)
    m = mask_gt.astype(np.float64)
    value = float(-(m * _log(mu) + (1 - m) * _log(1 - mu)).mean())
    grad = np.zeros((k, h, w), dtype=np.float64)
    grad[class_gt] = (mu - m) / (h * w)
    return LossOutput(value=value, grad=grad)


def feature_distance(enc_a: np.ndarray, enc_b: np.ndarray,
                     thing_mask: np.ndarray) -> LossOutput:
    """Mean Euclidean distance between two feature maps over masked pixels.

    Gradient with respect to ``enc_a``. An empty mask yields value 0. Off
    by default in training configs.
    """
    if enc_a.shape != enc_b.shape or enc_a.ndim != 3:
        raise ValidationError("feature maps must share an (H, W, D) shape")
    if thing_mask.shape != enc_a.shape[:2] or thing_mask.dtype != bool:
        raise ValidationError("mask must be boolean (H, W)")
    grad = np.zeros(enc_a.shape, dtype=np.float64)
    m = int(thing_mask.sum())
    if m == 0:
        return LossOutput(value=0.0, grad=grad)
    diff = (enc_a - enc_b).astype(np.float64)[thing_mask]
    norms = np.sqrt((diff * diff).sum(axis=1))
    value = float(norms.mean())
    safe = norms > 0
    scaled = np.zeros_like(diff)
    scaled[safe] = diff[safe] / (norms[safe, None] * m)
    grad[thing_mask] = scaled
    return LossOutput(value=value, grad=grad)


def total_panoptic_loss(parts: Sequence[LossOutput],
                        weights: Sequence[float] | None = None) -> LossOutput:
    """Weighted sum of loss outputs. Gradients are summed elementwise and
    therefore require every part to differentiate the same input."""
    if weights is None:
        weights = [1.0] * len(parts)
    if len(weights) != len(parts):
        raise ValidationError("one weight per part required")
    if not parts:
        return LossOutput(value=0.0, grad=np.zeros(0, dtype=np.float64))
    value = float(sum(w * p.value for w, p in zip(weights, parts)))

    first = parts[0].grad
    if isinstance(first, Mapping):
        keys = set(first.keys())
        for p in parts[1:]:
            if not isinstance(p.grad, Mapping) or set(p.grad.keys()) != keys:
                raise ValidationError("gradient structures differ; sum values only")
        grad = {key: sum(w * np.asarray(p.grad[key])
                         for w, p in zip(weights, parts))
                for key in sorted(keys)}
    else:
        shape = np.asarray(first).shape
        for p in parts[1:]:
            if isinstance(p.grad, Mapping) or np.asarray(p.grad).shape != shape:
                raise ValidationError("gradient structures differ; sum values only")
        grad = sum(w * np.asarray(p.grad) for w, p in zip(weights, parts))
    return LossOutput(value=value, grad=grad)
