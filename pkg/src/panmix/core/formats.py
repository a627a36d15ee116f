"""Binary and JSONL interchange formats.

Embedding bank ("CEB1")
    magic ``b"CEB1"``, three little-endian u32 fields C, P, D, then
    ``C * P * D`` 32-bit floats ordered class-major, then prompt-major,
    then dimension. Shape on load: ``(C, P, D)`` float32.

Probability / feature volume ("PRB1")
    magic ``b"PRB1"``, three little-endian u32 fields H, W, C, then
    ``H * W * C`` 32-bit floats row-major channel-minor. Shape on load:
    ``(H, W, C)`` float32. The same container carries probability volumes
    and generic per-pixel feature volumes; probability semantics are
    enforced by the caller, not the codec.

Instance predictions (JSON lines)
    one object per line: ``{id, class_id, score, rle, H, W}`` where ``rle``
    is the run list of :mod:`panmix.core.rle`.

All decoders validate magic, payload length and float finiteness and raise
``FormatError`` on any mismatch.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes, atomic_write_text
from .rle import decode_mask, encode_mask
from .types import InstanceRecord, InstanceSet, ValidationError

BANK_MAGIC = b"CEB1"
VOLUME_MAGIC = b"PRB1"


class FormatError(ValueError):
    """Raised when a file does not conform to its declared format."""


def _pack(magic: bytes, dims: tuple[int, int, int], data: np.ndarray) -> bytes:
    if not np.isfinite(data).all():
        raise FormatError("refusing to write non-finite floats")
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    return magic + struct.pack("<III", *dims) + payload


def _unpack(blob: bytes, magic: bytes, what: str) -> tuple[tuple[int, int, int], np.ndarray]:
    if len(blob) < 16:
        raise FormatError(f"{what}: truncated header")
    if blob[:4] != magic:
        raise FormatError(f"{what}: bad magic {blob[:4]!r}, expected {magic!r}")
    dims = struct.unpack("<III", blob[4:16])
    count = dims[0] * dims[1] * dims[2]
    expected = 16 + 4 * count
    if len(blob) != expected:
        raise FormatError(f"{what}: payload is {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=16, count=count)
    if not np.isfinite(data).all():
        raise FormatError(f"{what}: payload contains non-finite floats")
    return dims, data


def encode_bank(bank: np.ndarray) -> bytes:
    """Serialize a (C, P, D) embedding bank."""
    if bank.ndim != 3:
        raise FormatError(f"bank must be (C, P, D), got shape {bank.shape}")
    c, p, d = bank.shape
    return _pack(BANK_MAGIC, (c, p, d), bank)


def decode_bank(blob: bytes) -> np.ndarray:
    (c, p, d), data = _unpack(blob, BANK_MAGIC, "embedding bank")
    out = data.reshape(c, p, d).copy()
    out.setflags(write=False)
    return out


def encode_volume(volume: np.ndarray) -> bytes:
    """Serialize an (H, W, C) float volume."""
    if volume.ndim != 3:
        raise FormatError(f"volume must be (H, W, C), got shape {volume.shape}")
    h, w, c = volume.shape
    return _pack(VOLUME_MAGIC, (h, w, c), volume)


def decode_volume(blob: bytes) -> np.ndarray:
    (h, w, c), data = _unpack(blob, VOLUME_MAGIC, "float volume")
    out = data.reshape(h, w, c).copy()
    out.setflags(write=False)
    return out


def write_bank(path: str | Path, bank: np.ndarray) -> None:
    atomic_write_bytes(path, encode_bank(bank))


def read_bank(path: str | Path) -> np.ndarray:
    return decode_bank(Path(path).read_bytes())


def write_volume(path: str | Path, volume: np.ndarray) -> None:
    atomic_write_bytes(path, encode_volume(volume))


def read_volume(path: str | Path) -> np.ndarray:
    return decode_volume(Path(path).read_bytes())


def instances_to_jsonl(instances: InstanceSet) -> str:
    lines = []
    for r in instances:
        h, w = r.mask.shape
        lines.append(json.dumps({
            "id": r.id,
            "class_id": r.class_id,
            "score": r.score,
            "rle": encode_mask(r.mask),
            "H": h,
            "W": w,
        }))
    return "\n".join(lines) + ("\n" if lines else "")


def instances_from_jsonl(text: str, provenance: str) -> InstanceSet:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"line {lineno}: not valid JSON ({e.msg})") from e
        missing = {"id", "class_id", "score", "rle", "H", "W"} - obj.keys()
        if missing:
            raise FormatError(f"line {lineno}: missing fields {sorted(missing)}")
        try:
            mask = decode_mask(obj["rle"], obj["H"], obj["W"])
            records.append(InstanceRecord(id=int(obj["id"]),
                                          class_id=int(obj["class_id"]),
                                          score=float(obj["score"]),
                                          mask=mask))
        except ValidationError as e:
            raise FormatError(f"line {lineno}: {e}") from e
    return InstanceSet(tuple(records), provenance)


def write_instances(path: str | Path, instances: InstanceSet) -> None:
    atomic_write_text(path, instances_to_jsonl(instances))


def read_instances(path: str | Path, provenance: str) -> InstanceSet:
    return instances_from_jsonl(Path(path).read_text(encoding="utf-8"), provenance)
