"""Cross-domain mixed sampling.

Two composition paths produce training samples that blend a labeled source
image with an unlabeled target image:

* semantic mixing — half of the source classes, chosen at random, are
  pasted onto the target image together with their labels
  (``classmix_select`` + ``dacs_compose``);
* instance mixing — confidence-filtered instances predicted on the target
  image are cut out and pasted onto the source image, keeping the source
  ground truth exhaustive (``imix_compose`` with the default
  target_to_source direction). The reverse direction pastes source
  ground-truth objects onto the target image instead; it exists for
  ablation studies and deliberately loses exhaustiveness.

Both compositions are pixelwise selections: every output pixel equals the
corresponding pixel of exactly one operand. Overlaps among pasted masks are
resolved by painting in ascending score order (ties by ascending id), so
the most confident record ends up on top and owns the contested pixels.
Records reduced below ``occlusion_eps`` of their original area are dropped
and their residual pixels excluded from supervision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core.rng import SeededRng
from .core.types import (
    GROUND_TRUTH,
    IGNORE,
    PREDICTED,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    ValidationError,
    check_image,
    empty_instances,
    freeze_array,
    same_shape,
)

SEMANTIC = "semantic"
INSTANCE = "instance"

TARGET_TO_SOURCE = "target_to_source"
SOURCE_TO_TARGET = "source_to_target"

DEFAULT_OCCLUSION_EPS = 0.01


@dataclass(frozen=True)
class MixMask:
    """A binary selection map plus the path it belongs to."""
    mask: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in (SEMANTIC, INSTANCE):
            raise ValidationError(f"unknown mix-mask kind {self.kind!r}")
        if self.mask.ndim != 2 or self.mask.dtype != bool:
            raise ValidationError("mix mask must be a boolean (H, W) array")
        object.__setattr__(self, "mask", freeze_array(self.mask))


@dataclass(frozen=True)
class MixedSample:
    """A composed training sample.

    origin_source marks pixels copied from the source image; the rest came
    from the target image. pixel_confidence is 1 on source-origin pixels
    and the target confidence ratio elsewhere.
    """
    image: np.ndarray
    semantic: np.ndarray
    origin_source: np.ndarray
    instance_supervision: InstanceSet
    pixel_confidence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "image", freeze_array(self.image))
        object.__setattr__(self, "semantic", freeze_array(self.semantic))
        object.__setattr__(self, "origin_source", freeze_array(self.origin_source))
        object.__setattr__(self, "pixel_confidence", freeze_array(self.pixel_confidence))


def classmix_select(y_sem_source: np.ndarray, rng: SeededRng) -> MixMask:
    """Pick half the classes present (rounded up) and mark their pixels.

    Raises if the label map is entirely unlabeled.
    """
    present = [int(c) for c in np.unique(y_sem_source) if c != IGNORE]
    if not present:
        raise ValidationError("cannot select classes from an all-unlabeled map")
    n_sel = math.ceil(len(present) / 2)
    selected = rng.sample(present, n_sel)
    mask = np.isin(y_sem_source, np.array(selected, dtype=y_sem_source.dtype))
    return MixMask(mask=mask, kind=SEMANTIC)


def _confidence(origin_source: np.ndarray, k_t) -> np.ndarray:
    k_arr = np.asarray(k_t, dtype=np.float64)
    if k_arr.ndim not in (0, 2):
        raise ValidationError("target confidence must be a scalar or an (H, W) map")
    if (k_arr < 0).any() or (k_arr > 1).any():
        raise ValidationError("target confidence outside [0, 1]")
    return np.where(origin_source, 1.0, k_arr)


def dacs_compose(x_s: np.ndarray, y_s: np.ndarray,
                 x_t: np.ndarray, y_t_pseudo: np.ndarray,
                 k_t, m: MixMask) -> MixedSample:
    """Pixelwise selection of (image, label): mask bit 1 takes the source
    operand, 0 the target operand."""
    if m.kind != SEMANTIC:
        raise ValidationError(f"dacs_compose needs a semantic mask, got {m.kind!r}")
    check_image(x_s)
    check_image(x_t)
    same_shape(x_s, y_s, x_t, y_t_pseudo, m.mask)
    sel = m.mask
    image = np.where(sel[..., None], x_s, x_t)
    semantic = np.where(sel, y_s, y_t_pseudo)
    return MixedSample(
        image=image,
        semantic=semantic,
        origin_source=sel,
        instance_supervision=empty_instances(PREDICTED),
        pixel_confidence=_confidence(sel, k_t),
    )


def assemble_instance_supervision(source_gt: InstanceSet,
                                  pasted: InstanceSet) -> InstanceSet:
    """Union of the two record lists under fresh sequential ids.

    Source records come first and must be pairwise disjoint (they act as
    ground truth for the mixed image). The result is ground-truth
    provenance when every score is exactly 1, predicted otherwise.
    """
    occupancy = None
    for r in source_gt:
        if occupancy is None:
            occupancy = r.mask.astype(np.int32)
        else:
            occupancy = occupancy + r.mask
    if occupancy is not None and (occupancy > 1).any():
        raise ValidationError("ground-truth records overlap after occlusion pruning")
    merged = list(source_gt) + list(pasted)
    provenance = GROUND_TRUTH if all(r.score == 1.0 for r in merged) else PREDICTED
    fresh = tuple(
        InstanceRecord(id=i + 1, class_id=r.class_id, score=r.score,
                       mask=r.mask, box=r.box)
        for i, r in enumerate(merged)
    )
    return InstanceSet(fresh, provenance)


def _paint_order(records) -> list[InstanceRecord]:
    return sorted(records, key=lambda r: (r.score, r.id))


def _prune(records: list[InstanceRecord], owner: np.ndarray,
           blocked: np.ndarray | None, eps: float,
           semantic: np.ndarray, paint_class: bool) -> list[InstanceRecord]:
    """Reduce each record to the pixels it owns; keep it if the visible
    fraction reaches eps, otherwise drop it and unlabel its remnants."""
    kept = []
    for idx, r in enumerate(records):
        visible = owner == idx
        if blocked is not None:
            visible &= ~blocked
        frac = visible.sum() / r.mask.sum()
        if visible.any() and frac >= eps:
            if paint_class:
                semantic[visible] = r.class_id
            kept.append(r.with_mask(visible))
        else:
            semantic[visible] = IGNORE
    return kept


def imix_compose(x_t: np.ndarray, filtered: InstanceSet,
                 x_s: np.ndarray, y_s: PanopticLabel,
                 direction: str = TARGET_TO_SOURCE,
                 occlusion_eps: float = DEFAULT_OCCLUSION_EPS,
                 k_t=1.0) -> MixedSample:
    """Cut instances from one domain and paste them onto the other.

    target_to_source (the production direction): the filtered predictions
    on the target image are pasted onto the source image; supervision is
    the pruned source ground truth plus the pasted records, so every
    object in the mixed image keeps a label.

    source_to_target (ablation only): source ground-truth objects are
    pasted onto the target image; supervision is the pasted records plus
    the filtered target predictions — objects the teacher missed stay
    unlabeled.
    """
    check_image(x_t)
    check_image(x_s)
    if x_t.shape[0] == 0 or x_t.shape[1] == 0:
        raise ValidationError("cannot mix empty images")
    same_shape(x_t, x_s, y_s.semantic)
    for r in filtered:
        same_shape(r.mask, x_t)
    if filtered.provenance != PREDICTED:
        raise ValidationError(
            "filtered instances must be predictions, not ground truth")
    if not (0.0 <= occlusion_eps <= 1.0):
        raise ValidationError(f"occlusion_eps {occlusion_eps} outside [0, 1]")

    if direction == TARGET_TO_SOURCE:
        canvas_img, paste_img = x_s, x_t
        base_records = list(y_s.instances)
        base_sem = np.array(y_s.semantic, dtype=np.uint16)
        pasted_records = list(filtered)
    elif direction == SOURCE_TO_TARGET:
        canvas_img, paste_img = x_t, x_s
        base_records = list(filtered)
        base_sem = np.full(x_t.shape[:2], IGNORE, dtype=np.uint16)
        pasted_records = list(y_s.instances)
    else:
        raise ValidationError(f"unknown direction {direction!r}")

    h, w = canvas_img.shape[:2]
    base_records = _paint_order(base_records)
    pasted_records = _paint_order(pasted_records)

    owner_base = np.full((h, w), -1, dtype=np.int64)
    for idx, r in enumerate(base_records):
        owner_base[r.mask] = idx

    image = np.array(canvas_img, dtype=np.uint8)
    owner_paste = np.full((h, w), -1, dtype=np.int64)
    for idx, r in enumerate(pasted_records):
        image[r.mask] = paste_img[r.mask]
        owner_paste[r.mask] = idx
    m_paste = owner_paste >= 0

    semantic = base_sem
    base_kept = _prune(base_records, owner_base, m_paste, occlusion_eps,
                       semantic, paint_class=direction == SOURCE_TO_TARGET)
    pasted_kept = _prune(pasted_records, owner_paste, None, occlusion_eps,
                         semantic, paint_class=True)

    if direction == TARGET_TO_SOURCE:
        supervision = assemble_instance_supervision(
            InstanceSet(tuple(base_kept), GROUND_TRUTH), InstanceSet(tuple(pasted_kept), PREDICTED))
        origin_source = ~m_paste
    else:
        supervision = assemble_instance_supervision(
            InstanceSet(tuple(pasted_kept), GROUND_TRUTH), InstanceSet(tuple(base_kept), PREDICTED))
        origin_source = m_paste

    return MixedSample(
        image=image,
        semantic=semantic,
        origin_source=origin_source,
        instance_supervision=supervision,
        pixel_confidence=_confidence(origin_source, k_t),
    )
