"""Evaluation metrics: panoptic quality, semantic IoU, and instance AP.

Panoptic quality treats each stuff class as one segment per image and each
instance as its own segment. Ground-truth IGNORE pixels are excluded from
every area and intersection count, on both sides; a segment left with zero
counted area does not exist for matching purposes. A predicted and a
ground-truth segment match when they share a class and their IoU exceeds
0.5 — a bound that makes the matching provably one-to-one, so a single
pass over the intersection table suffices.

Per-image tallies add together, so datasets can be evaluated with a
parallel map and a final sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core.types import (
    IGNORE,
    ClassCatalog,
    InstanceSet,
    PanopticLabel,
    ValidationError,
)

_VOID = 0
_OFFSET = np.int64(1) << 32

DEFAULT_AP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass
class PqClassStat:
    """Running tallies for one class."""
    iou_sum: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "PqClassStat") -> "PqClassStat":
        self.iou_sum += other.iou_sum
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self

    @property
    def sq(self) -> float:
        return self.iou_sum / self.tp if self.tp else 0.0

    @property
    def rq(self) -> float:
        denom = self.tp + 0.5 * self.fp + 0.5 * self.fn
        return self.tp / denom if denom else 0.0

    @property
    def pq(self) -> float:
        return self.sq * self.rq

    @property
    def seen(self) -> bool:
        return bool(self.tp or self.fp or self.fn)


@dataclass
class PqStats:
    """Per-class tallies plus unweighted means over classes that occurred."""
    per_class: dict[int, PqClassStat] = field(default_factory=dict)

    def stat(self, class_id: int) -> PqClassStat:
        return self.per_class.setdefault(class_id, PqClassStat())

    def __add__(self, other: "PqStats") -> "PqStats":
        out = PqStats()
        for src in (self, other):
            for cid, st in src.per_class.items():
                out.stat(cid).__iadd__(st)
        return out

    def means(self) -> tuple[float, float, float]:
        """(mSQ, mRQ, mPQ) over classes with at least one tally."""
        seen = [st for st in self.per_class.values() if st.seen]
        if not seen:
            return 0.0, 0.0, 0.0
        n = len(seen)
        return (sum(s.sq for s in seen) / n,
                sum(s.rq for s in seen) / n,
                sum(s.pq for s in seen) / n)

    def summary(self, catalog: ClassCatalog) -> dict:
        msq, mrq, mpq = self.means()
        per = {}
        for cid in sorted(self.per_class):
            st = self.per_class[cid]
            if not st.seen:
                continue
            per[catalog.names[cid]] = {
                "sq": round(st.sq, 4), "rq": round(st.rq, 4),
                "pq": round(st.pq, 4), "tp": st.tp, "fp": st.fp, "fn": st.fn,
            }
        return {"per_class": per,
                "msq": round(msq, 4), "mrq": round(mrq, 4), "mpq": round(mpq, 4)}


def _segment_map(label: PanopticLabel,
                 catalog: ClassCatalog) -> tuple[np.ndarray, dict[int, int]]:
    """Collapse a panoptic label to (segment-id map, {segment id: class id}).

    Stuff class c becomes the single segment c+1; instances get fresh ids
    after the stuff range in ascending record-id order; IGNORE becomes 0.
    The ids are internal to the matcher and carry no format meaning.
    """
    sem = label.semantic
    ids = np.zeros(sem.shape, dtype=np.int64)
    classes: dict[int, int] = {}
    for c in np.unique(sem):
        if c == IGNORE:
            continue
        c = int(c)
        if not catalog.is_thing[c]:
            sid = c + 1
            ids[sem == c] = sid
            classes[sid] = c
    next_id = catalog.count + 1
    for rec in sorted(label.instances, key=lambda r: r.id):
        ids[rec.mask] = next_id
        classes[next_id] = rec.class_id
        next_id += 1
    return ids, classes


def panoptic_quality(gt: PanopticLabel, pred: PanopticLabel,
                     catalog: ClassCatalog) -> PqStats:
    """Match segments at IoU > 0.5 and tally TP/FP/FN per class."""
    if gt.shape != pred.shape:
        raise ValidationError("ground truth and prediction differ in size")
    gt_ids, gt_classes = _segment_map(gt, catalog)
    pr_ids, pr_classes = _segment_map(pred, catalog)
    valid = gt.semantic != IGNORE

    gseg, gcounts = np.unique(gt_ids[valid], return_counts=True)
    pseg, pcounts = np.unique(pr_ids[valid], return_counts=True)
    gt_area = {int(s): int(n) for s, n in zip(gseg, gcounts) if s != _VOID}
    pr_area = {int(s): int(n) for s, n in zip(pseg, pcounts) if s != _VOID}

    combined = gt_ids[valid] * _OFFSET + pr_ids[valid]
    pairs, icounts = np.unique(combined, return_counts=True)

    stats = PqStats()
    matched_gt: set[int] = set()
    matched_pr: set[int] = set()
    for pair, inter in zip(pairs, icounts):
        gid = int(pair // _OFFSET)
        pid = int(pair % _OFFSET)
        if gid == _VOID or pid == _VOID:
            continue
        if gt_classes[gid] != pr_classes[pid]:
            continue
        union = gt_area[gid] + pr_area[pid] - int(inter)
        iou = int(inter) / union
        if iou > 0.5:
            st = stats.stat(gt_classes[gid])
            st.tp += 1
            st.iou_sum += iou
            matched_gt.add(gid)
            matched_pr.add(pid)

    for gid in gt_area:
        if gid not in matched_gt:
            stats.stat(gt_classes[gid]).fn += 1
    for pid in pr_area:
        if pid not in matched_pr:
            stats.stat(pr_classes[pid]).fp += 1
    return stats


def mean_iou(gt: np.ndarray, pred: np.ndarray,
             catalog: ClassCatalog) -> tuple[dict[int, float], float]:
    """Per-class IoU and its unweighted mean over classes present in
    either map; ground-truth IGNORE pixels are excluded throughout."""
    if gt.shape != pred.shape:
        raise ValidationError("ground truth and prediction differ in size")
    valid = gt != IGNORE
    per_class: dict[int, float] = {}
    for c in range(catalog.count):
        g = (gt == c) & valid
        p = (pred == c) & valid
        union = int((g | p).sum())
        if union == 0:
            continue
        per_class[c] = int((g & p).sum()) / union
    miou = sum(per_class.values()) / len(per_class) if per_class else 0.0
    return per_class, miou


def iou_summary(per_class: dict[int, float], miou: float,
                catalog: ClassCatalog) -> dict:
    return {
        "per_class": {catalog.names[c]: round(v, 4)
                      for c, v in sorted(per_class.items())},
        "miou": round(miou, 4),
    }


@dataclass(frozen=True)
class ApConfig:
    """IoU thresholds for instance AP (defaults to 0.50:0.05:0.95)."""
    iou_thresholds: tuple[float, ...] = DEFAULT_AP_THRESHOLDS

    def __post_init__(self):
        t = self.iou_thresholds
        if not t:
            raise ValidationError("at least one IoU threshold required")
        if any(not (0.0 < x <= 1.0) for x in t):
            raise ValidationError("thresholds must lie in (0, 1]")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValidationError("thresholds must be strictly increasing")


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int((a & b).sum())
    union = int((a | b).sum())
    return inter / union if union else 0.0


def _ap_from_flags(tp_flags: list[bool], num_gt: int) -> float:
    """Area under the interpolated precision-recall curve, sampled at the
    101 recalls 0.00, 0.01, ..., 1.00."""
    if num_gt == 0:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for i, flag in enumerate(tp_flags, start=1):
        tp += int(flag)
        precisions.append(tp / i)
        recalls.append(tp / num_gt)
    total = 0.0
    for i in range(101):
        r = i / 100.0
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        total += best
    return total / 101.0


def _greedy_match_flags(prs, gts, iou: np.ndarray, threshold: float) -> list[bool]:
    """True/False per prediction (already sorted by descending score):
    matched to the unmatched ground truth with the highest IoU >= threshold."""
    taken = [False] * len(gts)
    flags = []
    for i in range(len(prs)):
        best_j = -1
        best_iou = 0.0
        for j in range(len(gts)):
            if not taken[j] and iou[i, j] > best_iou:
                best_iou = iou[i, j]
                best_j = j
        if best_j >= 0 and best_iou >= threshold:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def _class_records(instances: InstanceSet, c: int, by_score: bool):
    if by_score:
        return sorted((r for r in instances if r.class_id == c),
                      key=lambda r: (-r.score, r.id))
    return sorted((r for r in instances if r.class_id == c), key=lambda r: r.id)


def average_precision(gt: InstanceSet, preds: InstanceSet,
                      catalog: ClassCatalog,
                      cfg: ApConfig = ApConfig()) -> tuple[dict[int, float], float]:
    """COCO-style AP per thing class, averaged over the IoU thresholds.

    Predictions are matched greedily in descending score order to the
    unmatched ground-truth record of the same class with the highest IoU,
    provided that IoU reaches the threshold. Classes with no ground truth
    are skipped; the mean runs over the remaining thing classes.
    """
    return dataset_average_precision([(gt, preds)], catalog, cfg)


def dataset_average_precision(pairs: list[tuple[InstanceSet, InstanceSet]],
                              catalog: ClassCatalog,
                              cfg: ApConfig = ApConfig()) -> tuple[dict[int, float], float]:
    """AP over a set of (ground truth, predictions) image pairs.

    Matching happens within each image; the matched/unmatched flags are
    then pooled across images in global descending-score order before the
    precision-recall curve is integrated, the way detection benchmarks
    aggregate a dataset.
    """
    for gt, preds in pairs:
        for r in list(gt) + list(preds):
            if not catalog.is_thing[r.class_id]:
                raise ValidationError(f"record {r.id} has stuff class {r.class_id}")

    per_class: dict[int, float] = {}
    for c in catalog.thing_ids:
        num_gt = sum(len(_class_records(gt, c, by_score=False)) for gt, _ in pairs)
        if num_gt == 0:
            continue
        ious = []
        for gt, preds in pairs:
            gts = _class_records(gt, c, by_score=False)
            prs = _class_records(preds, c, by_score=True)
            ious.append((gts, prs, np.array(
                [[mask_iou(p.mask, g.mask) for g in gts] for p in prs])))

        ap_per_threshold = []
        for t in cfg.iou_thresholds:
            entries = []  # (-score, image index, record id, matched)
            for img, (gts, prs, iou) in enumerate(ious):
                flags = _greedy_match_flags(prs, gts, iou, t)
                entries.extend((-p.score, img, p.id, f) for p, f in zip(prs, flags))
            entries.sort(key=lambda e: e[:3])
            ap_per_threshold.append(
                _ap_from_flags([e[3] for e in entries], num_gt))
        per_class[c] = sum(ap_per_threshold) / len(ap_per_threshold)

    mean_ap = sum(per_class.values()) / len(per_class) if per_class else 0.0
    return per_class, mean_ap


class IouTally:
    """Dataset-level semantic IoU: intersections and unions pooled over
    images, one ratio per class at the end. Tallies add together."""

    def __init__(self, num_classes: int):
        self.inter = np.zeros(num_classes, dtype=np.int64)
        self.union = np.zeros(num_classes, dtype=np.int64)

    def add(self, gt: np.ndarray, pred: np.ndarray) -> None:
        if gt.shape != pred.shape:
            raise ValidationError("ground truth and prediction differ in size")
        valid = gt != IGNORE
        for c in range(self.inter.size):
            g = (gt == c) & valid
            p = (pred == c) & valid
            self.inter[c] += int((g & p).sum())
            self.union[c] += int((g | p).sum())

    def __add__(self, other: "IouTally") -> "IouTally":
        out = IouTally(self.inter.size)
        out.inter = self.inter + other.inter
        out.union = self.union + other.union
        return out

    def result(self) -> tuple[dict[int, float], float]:
        per_class = {c: float(self.inter[c] / self.union[c])
                     for c in range(self.union.size) if self.union[c]}
        miou = sum(per_class.values()) / len(per_class) if per_class else 0.0
        return per_class, miou


def ap_summary(per_class: dict[int, float], mean_ap: float,
               catalog: ClassCatalog) -> dict:
    return {
        "per_class": {catalog.names[c]: round(v, 4)
                      for c, v in sorted(per_class.items())},
        "map": round(mean_ap, 4),
    }
