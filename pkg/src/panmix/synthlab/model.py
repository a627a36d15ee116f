"""The toy per-pixel classifier and its instance head.

The model is a linear softmax over nine per-pixel features: RGB, the 3x3
local mean of each channel, normalized x and y, and a bias. That is weak
enough to feel a photometric domain gap and strong enough to learn either
domain well, which is exactly the regime the self-training loop needs.

The instance head is not learned: connected components over the pixels
whose argmax lands on a thing class, one pass per thing class, scored by
the mean predicted probability of that class over the component. Both
heads therefore share the single weight matrix, and instance-level
supervision reaches it through ``toy_instance_loss``.

``toy_instance_loss`` is the lab's stand-in for a detector objective: a
positive term pulls every supervision record's pixels toward its class
(weighted by the record score), and a background term pushes pixels
covered by no record toward the stuff classes collectively — the
per-pixel analog of negative anchor sampling. The background term is what
makes label exhaustiveness matter: compose mixed samples in a direction
that leaves real objects unlabeled, and those objects are actively
unlearned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.types import (
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PREDICTED,
    ValidationError,
    check_image,
    freeze_array,
)
from ..labeling import component_masks
from ..losses import LossOutput, softmax

NUM_FEATURES = 9


def featurize(image: np.ndarray) -> np.ndarray:
    """Per-pixel feature vectors, all components in [0, 1]:
    r, g, b, their 3x3 local means, x/W, y/H, and a constant 1."""
    check_image(image)
    h, w = image.shape[:2]
    rgb = image.astype(np.float64) / 255.0
    padded = np.pad(rgb, ((1, 1), (1, 1), (0, 0)), mode="edge")
    local = np.zeros_like(rgb)
    for dy in range(3):
        for dx in range(3):
            local += padded[dy:dy + h, dx:dx + w]
    local /= 9.0
    feat = np.empty((h, w, NUM_FEATURES), dtype=np.float64)
    feat[..., 0:3] = rgb
    feat[..., 3:6] = local
    feat[..., 6] = np.arange(w, dtype=np.float64)[None, :] / max(w - 1, 1)
    feat[..., 7] = np.arange(h, dtype=np.float64)[:, None] / max(h - 1, 1)
    feat[..., 8] = 1.0
    return feat


@dataclass(frozen=True)
class ToyModel:
    """Linear softmax classifier; weights have shape (C, NUM_FEATURES)."""
    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if w.ndim != 2 or w.shape[1] != NUM_FEATURES:
            raise ValidationError(f"weights must be (C, {NUM_FEATURES}), got {w.shape}")
        if not np.isfinite(w).all():
            raise ValidationError("weights contain non-finite values")
        object.__setattr__(self, "weights", freeze_array(w.astype(np.float64)))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def logits(self, feat: np.ndarray) -> np.ndarray:
        return feat @ self.weights.T

    def probs(self, feat: np.ndarray) -> np.ndarray:
        return softmax(self.logits(feat), axis=2)

    def predict_semantic(self, probs: np.ndarray) -> np.ndarray:
        return probs.argmax(axis=2).astype(np.uint16)

    def predict_instances(self, probs: np.ndarray, catalog: ClassCatalog,
                          min_area: int = 3) -> InstanceSet:
        """Connected components of each thing class's argmax region,
        scored by the component's mean class probability."""
        sem = self.predict_semantic(probs)
        records = []
        for c in catalog.thing_ids:
            for mask in component_masks(sem == c, min_area=min_area):
                score = float(probs[..., c][mask].mean())
                records.append(InstanceRecord(id=len(records) + 1, class_id=c,
                                              score=min(score, 1.0), mask=mask))
        return InstanceSet(tuple(records), PREDICTED)


def init_model(num_classes: int) -> ToyModel:
    return ToyModel(weights=np.zeros((num_classes, NUM_FEATURES)))


def weight_gradient(grad_logits: np.ndarray, feat: np.ndarray) -> np.ndarray:
    """Chain a loss gradient on the logit volume back to the weights."""
    return np.einsum("hwc,hwf->cf", grad_logits, feat)


def toy_instance_loss(probs: np.ndarray, supervision: InstanceSet,
                      stuff_ids: tuple[int, ...]) -> LossOutput:
    """Instance supervision through the shared per-pixel classifier.

    Positive term: mean over supervision-record pixels of the record-score
    weighted cross-entropy toward the record class. Background term: mean
    over uncovered pixels of -log(total stuff probability). Gradient with
    respect to the logits.
    """
    h, w, c = probs.shape
    covered = np.zeros((h, w), dtype=bool)
    grad = np.zeros((h, w, c), dtype=np.float64)

    n_pos = sum(int(r.mask.sum()) for r in supervision)
    value = 0.0
    if n_pos:
        for r in supervision:
            if (covered & r.mask).any():
                raise ValidationError("supervision records must be disjoint")
            covered |= r.mask
            p = probs[r.mask]
            value += r.score * float(-np.log(np.clip(p[:, r.class_id], 1e-12, None)).sum()) / n_pos
            onehot = np.zeros(c)
            onehot[r.class_id] = 1.0
            grad[r.mask] += r.score * (p - onehot) / n_pos

    uncovered = ~covered
    n_neg = int(uncovered.sum())
    if n_neg:
        stuff = list(stuff_ids)
        p_u = probs[uncovered]
        s = np.clip(p_u[:, stuff].sum(axis=1), 1e-12, None)
        value += float(-np.log(s).sum()) / n_neg
        g = p_u.copy()
        g[:, stuff] -= p_u[:, stuff] / s[:, None]
        grad[uncovered] += g / n_neg

    return LossOutput(value=value, grad=grad)
