"""Canonical data model: class catalogs, label maps, instances, panoptic labels.

Conventions used throughout the library:

* images are ``uint8`` arrays of shape ``(H, W, 3)``, row-major;
* semantic label maps are ``uint16`` arrays of shape ``(H, W)`` whose valid
  entries are class ids ``< C``; the value ``IGNORE`` (the maximum
  representable id, 65535) marks pixels excluded from every loss and metric;
* probability / logit volumes are ``float64`` arrays of shape ``(H, W, C)``,
  channel-minor;
* instance masks are boolean arrays of shape ``(H, W)``.

All containers are frozen dataclasses and the arrays they hold are marked
read-only on construction, so every value in the library is immutable and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

IGNORE = np.uint16(0xFFFF)
"""Sentinel class id for unlabeled pixels (max representable uint16)."""

GROUND_TRUTH = "ground-truth"
PREDICTED = "predicted"

PROB_TOL = 1e-6
"""Per-pixel tolerance on probability normalization."""


class ValidationError(ValueError):
    """Raised when a value violates one of the data-model invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    """Return a read-only contiguous array with `a`'s contents.

    Already-frozen arrays are shared as-is, so passing a mask from one
    record to another does not copy.
    """
    if a.flags.c_contiguous and not a.flags.writeable:
        return a
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.setflags(write=False)
    return out


freeze_array = _frozen


@dataclass(frozen=True)
class ClassCatalog:
    """Names and thing/stuff split for the C semantic classes."""

    names: tuple[str, ...]
    is_thing: tuple[bool, ...]

    def __post_init__(self):
        if len(self.names) != len(self.is_thing):
            raise ValidationError("names and is_thing must have equal length")
        if len(self.names) < 2:
            raise ValidationError("a catalog needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("class names must be unique")

    @property
    def count(self) -> int:
        return len(self.names)

    @property
    def thing_ids(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.is_thing) if t)

    @property
    def stuff_ids(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.is_thing) if not t)

    def require_both_kinds(self) -> None:
        """Fusion and scene generation need at least one thing and one stuff class."""
        if not self.thing_ids or not self.stuff_ids:
            raise ValidationError("catalog needs at least one thing and one stuff class")


def default_catalog() -> ClassCatalog:
    """The 16-class street-scene catalog (10 stuff + 6 thing classes)."""
    stuff = ["road", "sidewalk", "building", "wall", "fence",
             "pole", "light", "sign", "vegetation", "sky"]
    things = ["person", "rider", "car", "bus", "motorbike", "bike"]
    return ClassCatalog(
        names=tuple(stuff + things),
        is_thing=tuple([False] * len(stuff) + [True] * len(things)),
    )


def check_image(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValidationError(f"image must be uint8 (H, W, 3), got {img.dtype} {img.shape}")
    return img


def check_label_map(labels: np.ndarray, num_classes: int) -> np.ndarray:
    if labels.ndim != 2 or labels.dtype != np.uint16:
        raise ValidationError(f"label map must be uint16 (H, W), got {labels.dtype} {labels.shape}")
    bad = (labels != IGNORE) & (labels >= num_classes)
    if bad.any():
        raise ValidationError(f"label map contains ids >= C={num_classes}")
    return labels


def check_prob_volume(probs: np.ndarray) -> np.ndarray:
    if probs.ndim != 3:
        raise ValidationError(f"probability volume must be (H, W, C), got {probs.shape}")
    if not np.isfinite(probs).all():
        raise ValidationError("probability volume contains non-finite values")
    if (probs < 0).any():
        raise ValidationError("probability volume contains negative values")
    sums = probs.sum(axis=2)
    if np.abs(sums - 1.0).max() > PROB_TOL:
        raise ValidationError("per-pixel probabilities do not sum to 1")
    return probs


def check_logit_volume(logits: np.ndarray) -> np.ndarray:
    if logits.ndim != 3:
        raise ValidationError(f"logit volume must be (H, W, C), got {logits.shape}")
    if not np.isfinite(logits).all():
        raise ValidationError("logit volume contains non-finite values")
    return logits


def tight_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounds of a non-empty boolean mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ValidationError("cannot take the bounding box of an empty mask")
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass(frozen=True)
class InstanceRecord:
    """One object: binary mask, thing class, confidence score, tight box."""

    id: int
    class_id: int
    score: float
    mask: np.ndarray
    box: tuple[int, int, int, int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.id <= 0:
            raise ValidationError("instance id must be a positive integer")
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"score {self.score} outside [0, 1]")
        mask = self.mask
        if mask.ndim != 2 or mask.dtype != bool:
            raise ValidationError("mask must be a boolean (H, W) array")
        if not mask.any():
            raise ValidationError(f"instance {self.id} has an empty mask")
        object.__setattr__(self, "mask", _frozen(mask))
        tight = tight_box(mask)
        if self.box is None:
            box = tight
        else:
            box = tuple(int(v) for v in self.box)
            if box != tight:
                raise ValidationError(f"box {box} is not the tight bounds of the mask")
        object.__setattr__(self, "box", box)

    def with_mask(self, mask: np.ndarray, box=None) -> "InstanceRecord":
        return InstanceRecord(self.id, self.class_id, self.score, mask, box)

    def same_content(self, other: "InstanceRecord") -> bool:
        return (self.id == other.id and self.class_id == other.class_id
                and self.score == other.score and self.box == other.box
                and np.array_equal(self.mask, other.mask))


@dataclass(frozen=True)
class InstanceSet:
    """A collection of instance records plus their provenance.

    Ground-truth sets must have pairwise-disjoint masks and unit scores;
    predicted sets may overlap and carry fractional confidence scores.
    """

    records: tuple[InstanceRecord, ...]
    provenance: str

    def __post_init__(self):
        if self.provenance not in (GROUND_TRUTH, PREDICTED):
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        ids = [r.id for r in records]
        if len(set(ids)) != len(ids):
            raise ValidationError("instance ids must be unique within a set")
        if self.provenance == GROUND_TRUTH:
            for r in records:
                if r.score != 1.0:
                    raise ValidationError(f"ground-truth record {r.id} has score {r.score} != 1")
            occupancy = None
            for r in records:
                if occupancy is None:
                    occupancy = r.mask.astype(np.int32)
                else:
                    occupancy = occupancy + r.mask
            if occupancy is not None and (occupancy > 1).any():
                raise ValidationError("ground-truth instance masks overlap")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[int, InstanceRecord]:
        return {r.id: r for r in self.records}

    def same_content(self, other: "InstanceSet") -> bool:
        if self.provenance != other.provenance or len(self) != len(other):
            return False
        a = sorted(self.records, key=lambda r: r.id)
        b = sorted(other.records, key=lambda r: r.id)
        return all(x.same_content(y) for x, y in zip(a, b))


def empty_instances(provenance: str = PREDICTED) -> InstanceSet:
    return InstanceSet(records=(), provenance=provenance)


@dataclass(frozen=True)
class PanopticLabel:
    """A semantic map plus a mutually consistent ground-truth instance set."""

    semantic: np.ndarray
    instances: InstanceSet

    def __post_init__(self):
        object.__setattr__(self, "semantic", _frozen(self.semantic))

    @property
    def shape(self) -> tuple[int, int]:
        return self.semantic.shape  # type: ignore[return-value]

    def same_content(self, other: "PanopticLabel") -> bool:
        return (np.array_equal(self.semantic, other.semantic)
                and self.instances.same_content(other.instances))


def check_panoptic(label: PanopticLabel, catalog: ClassCatalog) -> PanopticLabel:
    """Consistency checker for panoptic labels.

    Verifies that every instance lives on a thing class, that masks are
    pairwise disjoint and agree with the semantic map, and that every pixel
    of a thing class is covered by exactly one instance. Raises
    ValidationError on the first violation.
    """
    sem = check_label_map(label.semantic, catalog.count)
    if label.instances.provenance != GROUND_TRUTH:
        raise ValidationError("panoptic labels carry ground-truth instances")
    covered = np.zeros(sem.shape, dtype=bool)
    for r in label.instances:
        if r.mask.shape != sem.shape:
            raise ValidationError(f"instance {r.id} mask shape {r.mask.shape} != {sem.shape}")
        if not catalog.is_thing[r.class_id]:
            raise ValidationError(f"instance {r.id} has stuff class {r.class_id}")
        if (covered & r.mask).any():
            raise ValidationError(f"instance {r.id} overlaps another instance")
        if (sem[r.mask] != r.class_id).any():
            raise ValidationError(f"semantic map disagrees with instance {r.id} (class {r.class_id})")
        covered |= r.mask
    thing_lut = np.zeros(catalog.count + 1, dtype=bool)
    thing_lut[list(catalog.thing_ids)] = True
    sem_idx = np.minimum(sem, catalog.count).astype(np.intp)  # IGNORE -> last slot (stuff)
    orphans = thing_lut[sem_idx] & ~covered
    if orphans.any():
        y, x = np.argwhere(orphans)[0]
        raise ValidationError(f"thing pixel ({y}, {x}) belongs to no instance")
    return label


def panoptic_from_semantic(sem: np.ndarray) -> PanopticLabel:
    """Wrap a pure-stuff semantic map as a panoptic label with no instances."""
    return PanopticLabel(semantic=sem, instances=empty_instances(GROUND_TRUTH))


def relabel_instances(records: Iterable[InstanceRecord],
                      provenance: str,
                      start: int = 1) -> InstanceSet:
    """Reassign fresh sequential ids (start, start+1, ...) preserving order."""
    fresh = tuple(
        InstanceRecord(id=start + i, class_id=r.class_id, score=r.score,
                       mask=r.mask, box=r.box)
        for i, r in enumerate(records)
    )
    return InstanceSet(records=fresh, provenance=provenance)


def check_param_vector(v: np.ndarray) -> np.ndarray:
    if v.ndim != 1 or not np.issubdtype(v.dtype, np.floating):
        raise ValidationError("parameter vector must be a 1-D float array")
    if not np.isfinite(v).all():
        raise ValidationError("parameter vector contains non-finite values")
    return v


def same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) > 1:
        raise ValidationError(f"spatial shapes disagree: {sorted(shapes)}")
