"""Shared oracles and random-fixture builders for the test suite.

The oracles here are deliberately naive re-implementations, structured
differently from the library code (nested loops, exhaustive enumeration),
so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import itertools

import numpy as np

from panmix.core.rng import SeededRng
from panmix.core.types import (
    GROUND_TRUTH,
    IGNORE,
    PREDICTED,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
)


def toyish_catalog() -> ClassCatalog:
    return ClassCatalog(names=("bg", "floor", "box", "blob"),
                        is_thing=(False, False, True, True))


def random_panoptic(rng: SeededRng, catalog: ClassCatalog,
                    h: int = 12, w: int = 12,
                    max_things: int = 4,
                    ignore_patch: bool = True) -> PanopticLabel:
    """A label made of a stuff backdrop, random thing rectangles and an
    optional unlabeled patch. Thing count is capped so brute-force segment
    matching stays cheap."""
    stuff = [c for c in range(catalog.count) if not catalog.is_thing[c]]
    things = [c for c in range(catalog.count) if catalog.is_thing[c]]
    sem = np.full((h, w), stuff[rng.below(len(stuff))], dtype=np.uint16)
    if len(stuff) > 1 and rng.random() < 0.7:
        band = 1 + rng.below(h - 1)
        sem[band:, :] = stuff[rng.below(len(stuff))]
    records = []
    next_id = 1
    for _ in range(rng.below(max_things + 1)):
        rh = 1 + rng.below(max(1, h // 2))
        rw = 1 + rng.below(max(1, w // 2))
        y = rng.below(h - rh + 1)
        x = rng.below(w - rw + 1)
        mask = np.zeros((h, w), dtype=bool)
        mask[y:y + rh, x:x + rw] = True
        for rec in records:
            mask &= ~rec.mask
        if not mask.any():
            continue
        c = things[rng.below(len(things))]
        sem[mask] = c
        records.append(InstanceRecord(id=next_id, class_id=c, score=1.0, mask=mask))
        next_id += 1
    if ignore_patch and rng.random() < 0.5:
        iy, ix = rng.below(h), rng.below(w)
        ih = 1 + rng.below(3)
        iw = 1 + rng.below(3)
        patch = np.zeros((h, w), dtype=bool)
        patch[iy:iy + ih, ix:ix + iw] = True
        for rec in records:
            patch &= ~rec.mask
        sem[patch] = IGNORE
    kept = [r for r in records]
    return PanopticLabel(semantic=sem,
                         instances=InstanceSet(tuple(kept), GROUND_TRUTH))


def random_predicted_instances(rng: SeededRng, catalog: ClassCatalog,
                               h: int, w: int, max_count: int = 4,
                               disjoint: bool = True) -> InstanceSet:
    """Random thing rectangles with random scores, pairwise disjoint by
    default to mirror what a connected-component instancer emits."""
    things = [c for c in range(catalog.count) if catalog.is_thing[c]]
    records = []
    occupied = np.zeros((h, w), dtype=bool)
    next_id = 1
    for _ in range(rng.below(max_count + 1)):
        rh = 1 + rng.below(max(1, h // 2))
        rw = 1 + rng.below(max(1, w // 2))
        y = rng.below(h - rh + 1)
        x = rng.below(w - rw + 1)
        mask = np.zeros((h, w), dtype=bool)
        mask[y:y + rh, x:x + rw] = True
        if disjoint:
            mask &= ~occupied
        if not mask.any():
            continue
        occupied |= mask
        records.append(InstanceRecord(
            id=next_id, class_id=things[rng.below(len(things))],
            score=0.05 + 0.9 * rng.random(), mask=mask))
        next_id += 1
    return InstanceSet(tuple(records), PREDICTED)


def _segments(label: PanopticLabel, catalog: ClassCatalog):
    """(class_id, mask) list: one per stuff class present plus one per thing
    record, restricted to nothing (caller applies validity)."""
    out = []
    sem = label.semantic
    for c in range(catalog.count):
        if catalog.is_thing[c]:
            continue
        mask = sem == c
        if mask.any():
            out.append((c, mask))
    for rec in label.instances:
        out.append((rec.class_id, rec.mask))
    return out


def brute_force_pq(gt: PanopticLabel, pred: PanopticLabel,
                   catalog: ClassCatalog):
    """Exhaustive maximal-IoU matching oracle.

    Enumerates every one-to-one assignment between ground-truth and
    predicted segments whose same-class IoU exceeds 0.5 (IoU computed over
    pixels the ground truth labels), picks the assignment with the largest
    total IoU, and tallies per-class TP / FP / FN / IoU sums.
    """
    valid = gt.semantic != IGNORE
    gts = _segments(gt, catalog)
    prs = []
    for c, mask in _segments(pred, catalog):
        clipped = mask & valid
        if clipped.any():
            prs.append((c, mask))

    iou = np.zeros((len(gts), len(prs)))
    for i, (gc, gm) in enumerate(gts):
        gmv = gm & valid
        for j, (pc, pm) in enumerate(prs):
            if gc != pc:
                continue
            pmv = pm & valid
            inter = np.logical_and(gmv, pmv).sum()
            union = np.logical_or(gmv, pmv).sum()
            if union:
                iou[i, j] = inter / union

    edges = [(i, j) for i in range(len(gts)) for j in range(len(prs))
             if iou[i, j] > 0.5]
    best, best_total = [], -1.0
    gt_ids = sorted({i for i, _ in edges})
    for r in range(len(gt_ids) + 1):
        for chosen_gts in itertools.combinations(gt_ids, r):
            pred_choices = [[j for i2, j in edges if i2 == i] for i in chosen_gts]
            for combo in itertools.product(*pred_choices):
                if len(set(combo)) != len(combo):
                    continue
                total = sum(iou[i, j] for i, j in zip(chosen_gts, combo))
                if total > best_total:
                    best_total = total
                    best = list(zip(chosen_gts, combo))

    per_class: dict[int, dict] = {}

    def stat(c):
        return per_class.setdefault(c, {"iou_sum": 0.0, "tp": 0, "fp": 0, "fn": 0})

    matched_gt = {i for i, _ in best}
    matched_pr = {j for _, j in best}
    for i, j in best:
        s = stat(gts[i][0])
        s["tp"] += 1
        s["iou_sum"] += float(iou[i, j])
    for i, (c, _) in enumerate(gts):
        if i not in matched_gt:
            stat(c)["fn"] += 1
    for j, (c, _) in enumerate(prs):
        if j not in matched_pr:
            stat(c)["fp"] += 1
    return per_class
