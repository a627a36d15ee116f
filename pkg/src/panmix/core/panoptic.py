"""Panoptic PNG interchange: RGB id image plus a JSON sidecar.

Each pixel of the PNG encodes a segment id as ``R + 256*G + 65536*B``.
Segment ids are derived from the label:

* stuff class ``c``   -> id ``c * 1000``
* thing instance      -> id ``c * 1000 + k`` where ``k`` in 1..999 is the
  ordinal of the instance among records of class ``c`` (ascending record id)
* unlabeled pixels    -> id 0

Id 0 is reserved for unlabeled pixels, so a stuff segment of class 0 cannot
use ``0 * 1000``; it takes id 1 instead, a slot the formula leaves free
whenever class 0 is stuff. Decoding resolves ids through the sidecar, which
lists every segment with its class id, score and (for things) the original
record id, so the exception costs nothing. A class with more than 999
instances cannot be represented and raises a capacity error.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .fileio import atomic_write_bytes, atomic_write_json, read_json
from .types import (
    GROUND_TRUTH,
    IGNORE,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    ValidationError,
    check_panoptic,
)

FORMAT_NAME = "panmix-panoptic-v1"
MAX_PER_CLASS = 999
MAX_SEGMENT_ID = 256 ** 3 - 1


def ids_to_rgb(id_map: np.ndarray) -> np.ndarray:
    if id_map.max(initial=0) > MAX_SEGMENT_ID:
        raise ValidationError("segment id exceeds 24-bit capacity")
    rgb = np.empty(id_map.shape + (3,), dtype=np.uint8)
    rgb[..., 0] = id_map % 256
    rgb[..., 1] = (id_map // 256) % 256
    rgb[..., 2] = id_map // 65536
    return rgb


def rgb_to_ids(rgb: np.ndarray) -> np.ndarray:
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValidationError("panoptic image must be uint8 (H, W, 3)")
    r = rgb[..., 0].astype(np.uint32)
    g = rgb[..., 1].astype(np.uint32)
    b = rgb[..., 2].astype(np.uint32)
    return r + 256 * g + 65536 * b


def encode_panoptic(label: PanopticLabel, catalog: ClassCatalog) -> tuple[np.ndarray, dict]:
    """Encode a checked panoptic label as (rgb image, sidecar dict)."""
    check_panoptic(label, catalog)
    sem = label.semantic
    h, w = sem.shape
    id_map = np.zeros((h, w), dtype=np.uint32)
    segments: list[dict] = []

    present = np.unique(sem)
    for c in present:
        if c == IGNORE or catalog.is_thing[int(c)]:
            continue
        c = int(c)
        seg_id = c * 1000 if c > 0 else 1
        if seg_id > MAX_SEGMENT_ID:
            raise ValidationError(f"stuff class {c} does not fit the id scheme")
        id_map[sem == c] = seg_id
        segments.append({"id": seg_id, "class_id": c, "score": 1.0, "is_thing": False})

    per_class: dict[int, int] = {}
    for rec in sorted(label.instances, key=lambda r: r.id):
        ordinal = per_class.get(rec.class_id, 0) + 1
        if ordinal > MAX_PER_CLASS:
            raise ValidationError(
                f"class {rec.class_id} has more than {MAX_PER_CLASS} instances")
        per_class[rec.class_id] = ordinal
        seg_id = rec.class_id * 1000 + ordinal
        if seg_id > MAX_SEGMENT_ID:
            raise ValidationError(f"thing class {rec.class_id} does not fit the id scheme")
        id_map[rec.mask] = seg_id
        segments.append({"id": seg_id, "class_id": rec.class_id,
                         "score": float(rec.score), "is_thing": True,
                         "instance_id": rec.id})

    segments.sort(key=lambda s: s["id"])
    sidecar = {"format": FORMAT_NAME, "height": h, "width": w, "segments": segments}
    return ids_to_rgb(id_map), sidecar


def decode_panoptic(rgb: np.ndarray, sidecar: dict, catalog: ClassCatalog) -> PanopticLabel:
    """Exact inverse of :func:`encode_panoptic`."""
    if sidecar.get("format") != FORMAT_NAME:
        raise ValidationError(f"unknown sidecar format {sidecar.get('format')!r}")
    id_map = rgb_to_ids(rgb)
    h, w = id_map.shape
    if (h, w) != (sidecar["height"], sidecar["width"]):
        raise ValidationError("sidecar dimensions disagree with the image")

    by_id: dict[int, dict] = {}
    for seg in sidecar["segments"]:
        if int(seg["id"]) < 1:
            raise ValidationError("segment id 0 is reserved for unlabeled pixels")
        if seg["id"] in by_id:
            raise ValidationError(f"duplicate sidecar segment id {seg['id']}")
        by_id[int(seg["id"])] = seg

    present = set(int(v) for v in np.unique(id_map))
    for seg_id in present:
        if seg_id != 0 and seg_id not in by_id:
            raise ValidationError(f"image contains id {seg_id} missing from the sidecar")
    for seg_id in by_id:
        if seg_id not in present:
            raise ValidationError(f"sidecar segment {seg_id} covers no pixel")

    sem = np.full((h, w), IGNORE, dtype=np.uint16)
    records = []
    for seg_id, seg in by_id.items():
        c = int(seg["class_id"])
        if c >= catalog.count:
            raise ValidationError(f"sidecar class id {c} outside the catalog")
        region = id_map == seg_id
        sem[region] = c
        if seg["is_thing"]:
            if not catalog.is_thing[c]:
                raise ValidationError(f"segment {seg_id} marked thing but class {c} is stuff")
            if "instance_id" not in seg:
                raise ValidationError(f"thing segment {seg_id} lacks an instance id")
            records.append(InstanceRecord(id=int(seg["instance_id"]), class_id=c,
                                          score=float(seg["score"]), mask=region))
        elif catalog.is_thing[c]:
            raise ValidationError(f"segment {seg_id} marked stuff but class {c} is a thing")

    records.sort(key=lambda r: r.id)
    label = PanopticLabel(semantic=sem,
                          instances=InstanceSet(tuple(records), GROUND_TRUTH))
    return check_panoptic(label, catalog)


def sidecar_path(png_path: str | Path) -> Path:
    return Path(png_path).with_suffix(".json")


def write_panoptic(png_path: str | Path, label: PanopticLabel, catalog: ClassCatalog) -> None:
    rgb, sidecar = encode_panoptic(label, catalog)
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(png_path, buf.getvalue())
    atomic_write_json(sidecar_path(png_path), sidecar)


def read_panoptic(png_path: str | Path, catalog: ClassCatalog) -> PanopticLabel:
    with Image.open(png_path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    sidecar = read_json(sidecar_path(png_path))
    return decode_panoptic(rgb, sidecar, catalog)


def write_semantic_png(path: str | Path, labels: np.ndarray) -> None:
    """Store a bare class-id map as a 16-bit grayscale PNG.

    This carries no instance information; it is the interchange form for
    semantic-only results such as pseudo-label maps.
    """
    if labels.ndim != 2 or labels.dtype != np.uint16:
        raise ValidationError("semantic map must be uint16 (H, W)")
    buf = io.BytesIO()
    Image.fromarray(labels).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_semantic_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I", "L", "P"):
            raise ValidationError(f"{path}: not a grayscale class-id image")
        arr = np.asarray(im)
    if arr.dtype != np.uint16:
        if arr.min() < 0 or arr.max() > int(IGNORE):
            raise ValidationError(f"{path}: values do not fit class-id range")
        arr = arr.astype(np.uint16)
    return arr
