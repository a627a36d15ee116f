"""Merge a semantic prediction with scored instances into one panoptic label.

Instances clearing the score floor are rasterized in descending score
order; the first writer of a pixel keeps it, so the most confident
instance wins contested pixels. Pixels no instance claims fall back to the
semantic prediction, and thing-class pixels left over that way become
IGNORE rather than orphan thing regions, preserving the panoptic
invariants. Surviving records keep their ids, get masks pruned to the
pixels they won, and are emitted with score 1 because the fused label acts
as ground truth downstream; keep the scored JSONL if detection metrics
still need the original confidences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.types import (
    GROUND_TRUTH,
    IGNORE,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    ValidationError,
    check_label_map,
    check_panoptic,
    check_prob_volume,
)


@dataclass(frozen=True)
class FusionConfig:
    """score_floor: minimum score for an instance to participate."""
    score_floor: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.score_floor <= 1.0):
            raise ValidationError(f"score_floor {self.score_floor} outside [0, 1]")


def merge(sem: np.ndarray, inst: InstanceSet, catalog: ClassCatalog,
          cfg: FusionConfig = FusionConfig()) -> PanopticLabel:
    """Fuse a semantic map (or probability volume) with instance records.

    Accepts either a uint16 label map or an (H, W, C) probability volume,
    which is reduced by per-pixel argmax first (ties to the lowest class).
    Ground-truth semantic and instances reproduce the ground-truth
    panoptic label exactly, ids included.
    """
    if sem.ndim == 3:
        check_prob_volume(sem)
        sem_labels = sem.argmax(axis=2).astype(np.uint16)
    else:
        sem_labels = check_label_map(sem, catalog.count)
    catalog.require_both_kinds()

    h, w = sem_labels.shape
    candidates = sorted((r for r in inst if r.score >= cfg.score_floor),
                        key=lambda r: (-r.score, r.id))
    owner = np.full((h, w), -1, dtype=np.int64)
    for idx, rec in enumerate(candidates):
        if rec.mask.shape != (h, w):
            raise ValidationError(f"instance {rec.id} mask shape mismatch")
        if not catalog.is_thing[rec.class_id]:
            raise ValidationError(f"instance {rec.id} has stuff class {rec.class_id}")
        free = rec.mask & (owner < 0)
        owner[free] = idx

    semantic = np.array(sem_labels, dtype=np.uint16)
    records = []
    for idx, rec in enumerate(candidates):
        won = owner == idx
        if not won.any():
            continue
        semantic[won] = rec.class_id
        records.append(InstanceRecord(id=rec.id, class_id=rec.class_id,
                                      score=1.0, mask=won))

    thing_lut = np.zeros(catalog.count + 1, dtype=bool)
    thing_lut[list(catalog.thing_ids)] = True
    sem_idx = np.minimum(semantic, catalog.count).astype(np.intp)
    orphan = thing_lut[sem_idx] & (owner < 0)
    semantic[orphan] = IGNORE

    label = PanopticLabel(semantic=semantic,
                          instances=InstanceSet(tuple(records), GROUND_TRUTH))
    return check_panoptic(label, catalog)
