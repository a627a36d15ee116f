"""Pixel-text alignment plumbing.

A prompt embedding bank holds P text-prompt vectors per class (shape
(C, P, D), stored as "CEB1" files). Pooling the prompts per class gives a
(C, D) anchor matrix; the inner product of per-pixel decoder features with
the anchors yields a similarity logit volume, which the alignment loss in
:mod:`panmix.losses` scores against semantic labels.

The default configuration L2-normalizes both anchors and features, making
the logits cosine similarities; the raw inner product stays available
through the two normalize flags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.rng import SeededRng
from .core.types import ValidationError, freeze_array

NORM_TOL = 1e-6
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ClassEmbeddingMatrix:
    """One pooled anchor vector per class; rows are unit length when the
    normalized flag is set."""
    matrix: np.ndarray
    normalized: bool

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2:
            raise ValidationError(f"anchor matrix must be (C, D), got {m.shape}")
        if not np.isfinite(m).all():
            raise ValidationError("anchor matrix contains non-finite values")
        if self.normalized:
            norms = np.linalg.norm(m, axis=1)
            if np.abs(norms - 1.0).max() > NORM_TOL:
                raise ValidationError("normalized anchors must have unit rows")
        object.__setattr__(self, "matrix", freeze_array(m))

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def check_bank(bank: np.ndarray, expect_classes: int | None = None) -> np.ndarray:
    if bank.ndim != 3:
        raise ValidationError(f"bank must be (C, P, D), got {bank.shape}")
    c, p, d = bank.shape
    if p < 1 or d < 1:
        raise ValidationError("bank needs at least one prompt and one dimension")
    if not np.isfinite(bank).all():
        raise ValidationError("bank contains non-finite values")
    if expect_classes is not None and c != expect_classes:
        raise ValidationError(f"bank has {c} classes, catalog expects {expect_classes}")
    return bank


def class_mean_embeddings(bank: np.ndarray, normalize: bool = True) -> ClassEmbeddingMatrix:
    """Pool each class's prompt vectors by arithmetic mean, optionally
    rescaling every pooled row to unit length."""
    check_bank(bank)
    pooled = bank.astype(np.float64).mean(axis=1)
    if normalize:
        norms = np.linalg.norm(pooled, axis=1)
        if (norms < _NORM_FLOOR).any():
            raise ValidationError("cannot normalize a zero-norm pooled embedding")
        pooled = pooled / norms[:, None]
    return ClassEmbeddingMatrix(matrix=pooled, normalized=normalize)


def similarity_map(features: np.ndarray, anchors: ClassEmbeddingMatrix,
                   normalize_features: bool = True) -> np.ndarray:
    """Per-pixel inner product with every anchor row: sigma[y, x, c] =
    <f(y, x), anchor_c>.

    With normalize_features, each feature vector is scaled to unit length
    first; all-zero feature vectors are passed through as zeros rather
    than dividing by zero, so a zero feature map always yields zero
    similarity.
    """
    if features.ndim != 3:
        raise ValidationError(f"feature map must be (H, W, D), got {features.shape}")
    if features.shape[2] != anchors.dim:
        raise ValidationError(
            f"feature dim {features.shape[2]} != anchor dim {anchors.dim}")
    f = features.astype(np.float64)
    if normalize_features:
        norms = np.linalg.norm(f, axis=2, keepdims=True)
        f = f / np.maximum(norms, _NORM_FLOOR)
    return f @ anchors.matrix.T


def synthetic_prompt_bank(num_classes: int, prompts: int = 4, dim: int = 24,
                          seed: int = 7, jitter: float = 0.05) -> np.ndarray:
    """A deterministic stand-in for text-encoder output.

    Each class gets an orthonormal base direction (Gram-Schmidt over seeded
    Gaussian draws, so dim must be >= num_classes) and P prompts formed by
    jittering that direction. Pooling recovers directions close to the
    orthonormal base, which keeps the classes well separated.
    """
    if dim < num_classes:
        raise ValidationError("bank dimension must be at least the class count")
    rng = SeededRng(seed)

    def draw(n: int) -> np.ndarray:
        return np.array([rng.normal() for _ in range(n)], dtype=np.float64)

    base = np.zeros((num_classes, dim))
    for c in range(num_classes):
        v = draw(dim)
        for prev in base[:c]:
            v = v - (v @ prev) * prev
        norm = np.linalg.norm(v)
        while norm < 1e-6:  # essentially impossible, but stay total
            v = draw(dim)
            for prev in base[:c]:
                v = v - (v @ prev) * prev
            norm = np.linalg.norm(v)
        base[c] = v / norm

    bank = np.empty((num_classes, prompts, dim), dtype=np.float64)
    for c in range(num_classes):
        for p in range(prompts):
            bank[c, p] = base[c] + jitter * draw(dim)
    return bank
