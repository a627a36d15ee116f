"""Run-length codec for binary masks.

A mask of shape (H, W) is flattened row-major and stored as alternating run
lengths, starting with the number of leading zeros (possibly 0). Runs are
strictly positive after the first entry and must sum to H*W.

    all-zero 2x2  ->  [4]
    all-one  2x2  ->  [0, 4]
"""

from __future__ import annotations

import numpy as np

from .types import ValidationError


def encode_mask(mask: np.ndarray) -> list[int]:
    if mask.ndim != 2 or mask.dtype != bool:
        raise ValidationError("rle encoding expects a boolean (H, W) mask")
    flat = mask.reshape(-1)
    n = flat.size
    if n == 0:
        return [0]
    # boundaries where the value changes, plus the two ends
    change = np.nonzero(flat[1:] != flat[:-1])[0] + 1
    edges = np.concatenate(([0], change, [n]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def decode_mask(runs: list[int], height: int, width: int) -> np.ndarray:
    n = height * width
    if not runs:
        raise ValidationError("empty run list")
    if any(r < 0 for r in runs) or any(r == 0 for r in runs[1:]):
        raise ValidationError(f"invalid run lengths {runs}")
    if sum(runs) != n:
        raise ValidationError(f"runs sum to {sum(runs)}, expected {n}")
    flat = np.zeros(n, dtype=bool)
    pos = 0
    value = False
    for r in runs:
        if value:
            flat[pos:pos + r] = True
        pos += r
        value = not value
    return flat.reshape(height, width)
