#!/usr/bin/env python3
"""How the evaluation metrics respond to controlled damage.

Starts from a perfect prediction of one generated scene and degrades it
step by step: shrink a mask, delete an object, invent an object, then
reshuffle detection confidences. After each step the script reports
panoptic quality (PQ, with its segmentation and recognition factors SQ
and RQ), mean IoU, and average precision, so you can see which metric
notices which mistake. Ends with the fusion step that turns raw class
probabilities plus detections into a single panoptic label.

Run:  python3 demos/metrics_tour.py
"""

import numpy as np

from panmix.core.rng import SeededRng
from panmix.core.types import (
    GROUND_TRUTH,
    PREDICTED,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
)
from panmix.fusion import FusionConfig, merge
from panmix.metrics import IouTally, average_precision, iou_summary, panoptic_quality
from panmix.synthlab.scenes import default_source_spec, generate_scene, toy_catalog


def evaluate(name, gt, pred, catalog, pred_instances=None):
    """One table row. PQ and mIoU always read the panoptic label; AP reads
    the separate scored detections when given (labels carry no scores)."""
    pq = panoptic_quality(gt, pred, catalog).summary(catalog)
    tally = IouTally(catalog.count)
    tally.add(gt.semantic, pred.semantic)
    miou = iou_summary(*tally.result(), catalog)["miou"]
    detections = pred_instances if pred_instances is not None else pred.instances
    _, mean_ap = average_precision(gt.instances, detections, catalog)
    print(f"  {name:<26} PQ {pq['mpq']:.3f}  SQ {pq['msq']:.3f}  "
          f"RQ {pq['mrq']:.3f}  mIoU {miou:.3f}  mAP {mean_ap:.3f}")


def copy_label(label):
    return PanopticLabel(semantic=label.semantic.copy(),
                         instances=InstanceSet(label.instances.records,
                                               GROUND_TRUTH))


def main():
    catalog = toy_catalog()
    _, gt = generate_scene(default_source_spec(), catalog, SeededRng(7), 48, 48)
    things = list(gt.instances)
    background = int(gt.semantic[0, 0])
    print(f"Scene: 48x48 pixels, {len(things)} objects "
          f"({', '.join(catalog.names[r.class_id] for r in things)})")
    print()

    print("Degradation ladder (each row changes one thing):")
    evaluate("perfect copy", gt, copy_label(gt), catalog)

    # 1. Erode one mask: the overlap drops, so SQ and mIoU fall, but as
    #    long as IoU stays above one half the match survives and RQ holds.
    victim = things[0]
    shrunk = victim.mask.copy()
    rows = np.flatnonzero(shrunk.any(axis=1))
    shrunk[rows[: max(1, len(rows) // 3)], :] = False
    sem = gt.semantic.copy()
    sem[victim.mask & ~shrunk] = background
    eroded = PanopticLabel(
        semantic=sem,
        instances=InstanceSet(
            (InstanceRecord(id=victim.id, class_id=victim.class_id,
                            score=1.0, mask=shrunk),)
            + gt.instances.records[1:], GROUND_TRUTH))
    evaluate("shrink one mask", gt, eroded, catalog)

    # 2. Delete an object: a clean false negative, RQ takes the hit.
    lost = things[-1]
    sem = gt.semantic.copy()
    sem[lost.mask] = background
    dropped = PanopticLabel(
        semantic=sem,
        instances=InstanceSet(
            tuple(r for r in gt.instances if r.id != lost.id), GROUND_TRUTH))
    evaluate("delete one object", gt, dropped, catalog)

    # 3. Invent an object in an empty sky corner: a false positive.
    ghost_mask = np.zeros_like(gt.semantic, dtype=bool)
    ghost_mask[0:4, 0:4] = True
    ghost_class = catalog.thing_ids[0]
    sem = gt.semantic.copy()
    sem[ghost_mask] = ghost_class
    ghost = PanopticLabel(
        semantic=sem,
        instances=InstanceSet(
            gt.instances.records
            + (InstanceRecord(id=99, class_id=ghost_class, score=1.0,
                              mask=ghost_mask),), GROUND_TRUTH))
    evaluate("invent one object", gt, ghost, catalog)

    # 4. Same masks as row 3, but now with scores: ranking the ghost last
    #    or first changes AP alone, because the other metrics never look
    #    at confidences.
    def scored(ghost_score, real_score):
        return InstanceSet(
            tuple(InstanceRecord(id=r.id, class_id=r.class_id,
                                 score=real_score, mask=r.mask)
                  for r in things)
            + (InstanceRecord(id=99, class_id=ghost_class, score=ghost_score,
                              mask=ghost_mask),), PREDICTED)

    evaluate("ghost ranked last", gt, ghost, catalog,
             pred_instances=scored(ghost_score=0.1, real_score=0.9))
    evaluate("ghost ranked first", gt, ghost, catalog,
             pred_instances=scored(ghost_score=0.95, real_score=0.5))
    print()
    print("PQ, SQ, RQ and mIoU ignore scores entirely, so the last three rows")
    print("agree everywhere except AP, which punishes the false positive only")
    print("once it outranks real detections.")

    print()
    print("Fusion: probabilities + detections -> one panoptic label")
    peak = 0.88
    off = (1.0 - peak) / (catalog.count - 1)
    probs = np.full(gt.semantic.shape + (catalog.count,), off)
    r, c = np.indices(gt.semantic.shape)
    probs[r, c, gt.semantic.astype(int)] = peak
    detections = InstanceSet(
        tuple(InstanceRecord(id=rec.id, class_id=rec.class_id,
                             score=0.95 - 0.1 * i, mask=rec.mask)
              for i, rec in enumerate(things)), PREDICTED)
    fused = merge(probs, detections, catalog, FusionConfig(score_floor=0.5))
    evaluate("fused output", gt, fused, catalog)
    print(f"The merge kept {len(fused.instances)} of {len(detections)} "
          "detections (score floor 0.5), painted them over the argmax")
    print("semantics in confidence order, and hardened the result into a")
    print("label that any of the metrics above accept.")


if __name__ == "__main__":
    main()
