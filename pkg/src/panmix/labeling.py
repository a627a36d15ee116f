"""Connected-component labeling of binary masks.

Row-run scan with union-find, 4-connectivity: each row is decomposed into
maximal runs of foreground pixels, runs are merged with column-overlapping
runs of the previous row, and components are numbered 1..count in row-major
order of their first pixel. Output is deterministic for a given mask.
"""

from __future__ import annotations

import numpy as np


def _find(parent: list[int], i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        parent[i], i = root, parent[i]
    return root


def _row_runs(row: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, stop) runs of True values in a 1-D boolean row."""
    padded = np.empty(row.size + 2, dtype=bool)
    padded[0] = padded[-1] = False
    padded[1:-1] = row
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(edges[i]), int(edges[i + 1])) for i in range(0, edges.size, 2)]


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 4-connected components of a boolean mask.

    Returns (labels, count) where labels is int32 with values 0..count and
    components are numbered 1..count in row-major order of first touch.
    """
    if mask.ndim != 2 or mask.dtype != bool:
        raise ValueError("label_components expects a boolean (H, W) mask")
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list[int] = []
    runs: list[tuple[int, int, int, int]] = []  # (y, x0, x1, run_id)
    prev: list[tuple[int, int, int]] = []       # (x0, x1, run_id) of row above

    for y in range(h):
        row = mask[y]
        if not row.any():
            prev = []
            continue
        cur: list[tuple[int, int, int]] = []
        for x0, x1 in _row_runs(row):
            rid = len(parent)
            parent.append(rid)
            # merge with every overlapping run of the previous row
            for px0, px1, pid in prev:
                if px0 >= x1:
                    break
                if px1 > x0:
                    ra, rb = _find(parent, rid), _find(parent, pid)
                    if ra != rb:
                        lo, hi = (ra, rb) if ra < rb else (rb, ra)
                        parent[hi] = lo
            cur.append((x0, x1, rid))
            runs.append((y, x0, x1, rid))
        prev = cur

    if not runs:
        return labels, 0

    # compact roots to 1..count in run discovery order, which is row-major
    # order of each component's first pixel
    remap: dict[int, int] = {}
    count = 0
    for _, _, _, rid in runs:
        root = _find(parent, rid)
        if root not in remap:
            count += 1
            remap[root] = count
    for y, x0, x1, rid in runs:
        labels[y, x0:x1] = remap[_find(parent, rid)]
    return labels, count


def component_masks(mask: np.ndarray, min_area: int = 1) -> list[np.ndarray]:
    """The boolean mask of each component with area >= min_area, in label order."""
    labels, count = label_components(mask)
    out = []
    for i in range(1, count + 1):
        m = labels == i
        if int(m.sum()) >= min_area:
            out.append(m)
    return out
