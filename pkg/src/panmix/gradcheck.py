"""Finite-difference verification of every analytic loss gradient.

Each loss gets a case builder that draws a randomized problem, flattens the
differentiated input into one parameter vector (logit space where the loss
consumes probabilities), and returns the scalar loss as a function of that
vector together with the analytic gradient. ``run_suite`` compares the
analytic gradient against central differences over many independent draws
and reports the worst relative error per loss.

Two losses contain absolute values or Euclidean norms, which are not
differentiable at zero; their case builders keep every such term at least
1e-3 away from the kink so the finite-difference step of 1e-5 never
crosses it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core.rng import SeededRng
from .core.types import IGNORE, PREDICTED, empty_instances
from .losses import (
    cda_loss,
    feature_distance,
    mask_bce,
    mixed_semantic_ce,
    refinement_loss,
    rpn_loss,
    semantic_ce,
    sigmoid,
    softmax,
)
from .mixing import MixedSample

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4

# (value function of the flat parameter vector, the vector, analytic gradient)
Case = tuple[Callable[[np.ndarray], float], np.ndarray, np.ndarray]


def finite_difference_grad(fn: Callable[[np.ndarray], float],
                           z: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    grad = np.empty_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += step
        zm[i] -= step
        grad[i] = (fn(zp) - fn(zm)) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(analytic)),
                float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def _normals(rng: SeededRng, *shape: int) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    return np.array([rng.normal() for _ in range(n)], dtype=np.float64).reshape(shape)


def _labels(rng: SeededRng, h: int, w: int, c: int,
            ignore_rate: float = 0.2) -> np.ndarray:
    out = np.empty((h, w), dtype=np.uint16)
    for y in range(h):
        for x in range(w):
            if rng.random() < ignore_rate:
                out[y, x] = IGNORE
            else:
                out[y, x] = rng.below(c)
    if (out == IGNORE).all():
        out[0, 0] = 0
    return out


def _bounded_offsets(rng: SeededRng, *shape: int, floor: float = 2e-3) -> np.ndarray:
    """Offsets with |value| >= floor, so L1 terms stay off their kink."""
    mags = np.array([floor + rng.random() for _ in range(int(np.prod(shape)))])
    signs = np.array([1.0 if rng.random() < 0.5 else -1.0 for _ in range(mags.size)])
    return (mags * signs).reshape(shape)


def _case_semantic_ce(rng: SeededRng) -> Case:
    h, w, c = 4, 4, 3
    labels = _labels(rng, h, w, c)
    z0 = _normals(rng, h * w * c)

    def fn(z):
        return semantic_ce(softmax(z.reshape(h, w, c)), labels).value

    out = semantic_ce(softmax(z0.reshape(h, w, c)), labels)
    return fn, z0, np.asarray(out.grad).ravel()


def _case_mixed_semantic_ce(rng: SeededRng) -> Case:
    h, w, c = 4, 4, 3
    labels = _labels(rng, h, w, c)
    origin = np.array([[rng.random() < 0.5 for _ in range(w)] for _ in range(h)])
    k_t = rng.random()
    mixed = MixedSample(
        image=np.zeros((h, w, 3), dtype=np.uint8),
        semantic=labels,
        origin_source=origin,
        instance_supervision=empty_instances(PREDICTED),
        pixel_confidence=np.where(origin, 1.0, k_t),
    )
    z0 = _normals(rng, h * w * c)

    def fn(z):
        return mixed_semantic_ce(softmax(z.reshape(h, w, c)), mixed).value

    out = mixed_semantic_ce(softmax(z0.reshape(h, w, c)), mixed)
    return fn, z0, np.asarray(out.grad).ravel()


def _case_cda_loss(rng: SeededRng) -> Case:
    h, w, c = 3, 3, 4
    labels = _labels(rng, h, w, c)
    z0 = _normals(rng, h * w * c)

    def fn(z):
        return cda_loss(z.reshape(h, w, c), labels).value

    out = cda_loss(z0.reshape(h, w, c), labels)
    return fn, z0, np.asarray(out.grad).ravel()


def _case_rpn_loss(rng: SeededRng) -> Case:
    a = 6
    gt = np.array([1.0 if rng.random() < 0.5 else 0.0 for _ in range(a)])
    positives = np.array([rng.random() < 0.5 for _ in range(a)])
    box_gt = _normals(rng, a, 4)
    box_pred0 = box_gt + _bounded_offsets(rng, a, 4)
    z0 = np.concatenate([_normals(rng, a), box_pred0.ravel()])

    def fn(z):
        return rpn_loss(sigmoid(z[:a]), gt, z[a:].reshape(a, 4),
                        box_gt, positives).value

    out = rpn_loss(sigmoid(z0[:a]), gt, box_pred0, box_gt, positives)
    analytic = np.concatenate([out.grad["objectness"], out.grad["box"].ravel()])
    return fn, z0, analytic


def _case_refinement_loss(rng: SeededRng) -> Case:
    r, k = 5, 3
    u = np.array([rng.below(k + 1) for _ in range(r)], dtype=np.int64)
    box_gt = _normals(rng, r, 4)
    box_pred0 = np.repeat(box_gt[:, None, :], k, axis=1) + _bounded_offsets(rng, r, k, 4)
    z0 = np.concatenate([_normals(rng, r * (k + 1)), box_pred0.ravel()])
    n_cls = r * (k + 1)

    def fn(z):
        probs = softmax(z[:n_cls].reshape(r, k + 1))
        return refinement_loss(probs, u, z[n_cls:].reshape(r, k, 4), box_gt).value

    out = refinement_loss(softmax(z0[:n_cls].reshape(r, k + 1)), u, box_pred0, box_gt)
    analytic = np.concatenate([out.grad["class"].ravel(), out.grad["box"].ravel()])
    return fn, z0, analytic


def _case_mask_bce(rng: SeededRng) -> Case:
    k, h, w = 3, 5, 5
    target = np.array([[rng.random() < 0.5 for _ in range(w)] for _ in range(h)])
    u = rng.below(k)
    z0 = _normals(rng, k * h * w)

    def fn(z):
        return mask_bce(sigmoid(z.reshape(k, h, w)), target, u).value

    out = mask_bce(sigmoid(z0.reshape(k, h, w)), target, u)
    return fn, z0, np.asarray(out.grad).ravel()


def _case_feature_distance(rng: SeededRng) -> Case:
    h, w, d = 4, 4, 5
    enc_a0 = _normals(rng, h, w, d)
    delta = _normals(rng, h, w, d)
    norms = np.sqrt((delta * delta).sum(axis=2, keepdims=True))
    delta = delta * np.maximum(1.0, 0.05 / np.maximum(norms, 1e-9))
    enc_b = enc_a0 - delta
    mask = np.array([[rng.random() < 0.6 for _ in range(w)] for _ in range(h)])
    if not mask.any():
        mask[0, 0] = True
    z0 = enc_a0.ravel().copy()

    def fn(z):
        return feature_distance(z.reshape(h, w, d), enc_b, mask).value

    out = feature_distance(enc_a0, enc_b, mask)
    return fn, z0, np.asarray(out.grad).ravel()


LOSS_CASES: dict[str, Callable[[SeededRng], Case]] = {
    "semantic_ce": _case_semantic_ce,
    "mixed_semantic_ce": _case_mixed_semantic_ce,
    "cda_loss": _case_cda_loss,
    "rpn_loss": _case_rpn_loss,
    "refinement_loss": _case_refinement_loss,
    "mask_bce": _case_mask_bce,
    "feature_distance": _case_feature_distance,
}


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    trials: int
    max_rel_err: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def check_loss(name: str, seed: int, trials: int,
               tolerance: float = DEFAULT_TOLERANCE,
               step: float = DEFAULT_STEP) -> GradCheckResult:
    builder = LOSS_CASES[name]
    rng = SeededRng(seed)
    worst = 0.0
    started = time.perf_counter()
    for _ in range(trials):
        fn, z0, analytic = builder(rng)
        numeric = finite_difference_grad(fn, z0, step)
        worst = max(worst, relative_error(analytic, numeric))
    return GradCheckResult(name=name, trials=trials, max_rel_err=worst,
                           tolerance=tolerance,
                           seconds=time.perf_counter() - started)


def run_suite(seed: int = 1, trials: int = 100,
              tolerance: float = DEFAULT_TOLERANCE,
              step: float = DEFAULT_STEP) -> list[GradCheckResult]:
    return [check_loss(name, seed=seed, trials=trials,
                       tolerance=tolerance, step=step)
            for name in LOSS_CASES]
