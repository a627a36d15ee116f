"""Dataset manifests: JSON files listing, per image, the artifact paths the
pipeline stages consume.

Layout:

    {
      "domain": "source",
      "records": [
        {"image": "img/0.png",
         "panoptic": "pan/0.png",     // or null
         "probs": "probs/0.prb",      // or null
         "instances": "inst/0.jsonl"} // or null
      ]
    }

Relative paths resolve against the manifest's directory. Loading verifies
that every referenced file exists (missing files surface as I/O errors with
the offending path) and that all artifacts of a record agree on image
dimensions, using header reads only.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .core.formats import FormatError
from .core.types import ValidationError

DOMAINS = ("source", "target")
_RECORD_KEYS = {"image", "panoptic", "probs", "instances"}


@dataclass(frozen=True)
class ManifestRecord:
    image: Path
    panoptic: Path | None = None
    probs: Path | None = None
    instances: Path | None = None


@dataclass(frozen=True)
class Manifest:
    domain: str
    records: tuple[ManifestRecord, ...]

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValidationError(
                f"manifest domain must be one of {DOMAINS}, got {self.domain!r}")

    def __len__(self) -> int:
        return len(self.records)


def _png_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as img:
        w, h = img.size
    return h, w


def _prb_size(path: Path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        header = fh.read(16)
    if len(header) < 16:
        raise FormatError(f"{path}: truncated volume header")
    magic, h, w, _ = struct.unpack("<4sIII", header)
    if magic != b"PRB1":
        raise FormatError(f"{path}: bad volume magic {magic!r}")
    return h, w


def _jsonl_size(path: Path) -> tuple[int, int] | None:
    for line in path.read_text().splitlines():
        if line.strip():
            try:
                obj = json.loads(line)
                return int(obj["H"]), int(obj["W"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad instance line: {exc}") from exc
    return None


def _require(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"manifest references missing file: {path}")
    return path


def _record_from_json(obj: dict, root: Path, index: int) -> ManifestRecord:
    if not isinstance(obj, dict):
        raise ValidationError(f"record {index}: expected an object")
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise ValidationError(f"record {index}: unknown keys {sorted(unknown)}")
    if not obj.get("image"):
        raise ValidationError(f"record {index}: image path required")

    def resolve(key: str) -> Path | None:
        value = obj.get(key)
        return _require(root / value) if value else None

    record = ManifestRecord(
        image=resolve("image"),
        panoptic=resolve("panoptic"),
        probs=resolve("probs"),
        instances=resolve("instances"),
    )
    if record.panoptic is not None:
        _require(record.panoptic.with_suffix(".json"))

    dims = {"image": _png_size(record.image)}
    if record.panoptic is not None:
        dims["panoptic"] = _png_size(record.panoptic)
    if record.probs is not None:
        dims["probs"] = _prb_size(record.probs)
    if record.instances is not None:
        size = _jsonl_size(record.instances)
        if size is not None:
            dims["instances"] = size
    if len(set(dims.values())) > 1:
        raise ValidationError(f"record {index}: artifact sizes disagree: {dims}")
    return record


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "records" not in data:
        raise ValidationError(f"{path}: expected an object with a records list")
    records = tuple(
        _record_from_json(obj, path.parent, i)
        for i, obj in enumerate(data["records"])
    )
    return Manifest(domain=data.get("domain", "source"), records=records)
