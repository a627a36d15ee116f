"""Overlay rendering: class colors alpha-blended onto the image, with
instance outlines drawn on top.

Colors come from a deterministic palette derived only from the class count,
so the same catalog always renders the same way. Unlabeled pixels are left
untouched, which makes an all-unlabeled overlay equal the input image.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .core.types import (
    IGNORE,
    ClassCatalog,
    PanopticLabel,
    ValidationError,
    check_image,
    freeze_array,
)

BLEND_ALPHA = 0.5


@dataclass(frozen=True)
class VizPalette:
    """Per-class RGB colors plus the color used for instance outlines."""
    colors: np.ndarray
    boundary: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.uint8)
        if colors.ndim != 2 or colors.shape[1] != 3 or colors.shape[0] == 0:
            raise ValidationError("palette colors must be a (C, 3) array")
        if len({tuple(int(v) for v in row) for row in colors}) != colors.shape[0]:
            raise ValidationError("palette colors must be pairwise distinct")
        object.__setattr__(self, "colors", freeze_array(colors))

    @property
    def num_classes(self) -> int:
        return int(self.colors.shape[0])


def default_palette(catalog: ClassCatalog) -> VizPalette:
    """Golden-angle hue walk: well-spread, distinct, and reproducible."""
    taken = set()
    rows = []
    for c in range(catalog.count):
        hue = (c * 0.6180339887498949) % 1.0
        value = 0.95 if catalog.is_thing[c] else 0.75
        rgb = tuple(int(round(255 * v))
                    for v in colorsys.hsv_to_rgb(hue, 0.65, value))
        while rgb in taken:
            rgb = (rgb[0], rgb[1], (rgb[2] + 1) % 256)
        taken.add(rgb)
        rows.append(rgb)
    return VizPalette(colors=np.array(rows, dtype=np.uint8))


def _interior(mask: np.ndarray) -> np.ndarray:
    inner = mask.copy()
    inner[0, :] = False
    inner[-1, :] = False
    inner[:, 0] = False
    inner[:, -1] = False
    out = inner.copy()
    out[1:, :] &= mask[:-1, :]
    out[:-1, :] &= mask[1:, :]
    out[:, 1:] &= mask[:, :-1]
    out[:, :-1] &= mask[:, 1:]
    return out


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Pixels of the mask with a 4-neighbor outside it (or on the image edge)."""
    return mask & ~_interior(mask)


def visualize(label: PanopticLabel, image: np.ndarray,
              palette: VizPalette) -> np.ndarray:
    check_image(image)
    if image.shape[:2] != label.shape:
        raise ValidationError(
            f"image {image.shape[:2]} and label {label.shape} sizes differ")
    if palette.num_classes <= int(label.semantic[label.semantic != IGNORE].max(initial=0)):
        raise ValidationError("palette has fewer colors than label classes")

    out = image.astype(np.float64).copy()
    labeled = label.semantic != IGNORE
    if labeled.any():
        classes = label.semantic[labeled].astype(np.int64)
        tint = palette.colors[classes].astype(np.float64)
        out[labeled] = (1.0 - BLEND_ALPHA) * out[labeled] + BLEND_ALPHA * tint
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    for record in label.instances:
        out[boundary_pixels(record.mask)] = palette.boundary
    return out
