"""Synthetic two-domain scene generator.

Scenes are horizon-split landscapes: sky above, ground below, a grass
patch somewhere on the ground, and a handful of non-overlapping crates
(squares) and balls (discs). The target domain differs from the source
photometrically — hue rotation, a fog-like blend toward gray, and heavier
pixel noise — which is enough of a gap that a per-pixel color classifier
trained on one domain degrades visibly on the other.

Generation is fully driven by the caller's rng, so a (spec, seed) pair
always reproduces the same scene byte for byte. Bank generation derives an
independent seed per image index, which keeps images independent of the
bank size and order of generation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.rng import SeededRng, derive_seed
from ..core.types import (
    GROUND_TRUTH,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    ValidationError,
)

SKY, GROUND, GRASS, CRATE, BALL = range(5)


def toy_catalog() -> ClassCatalog:
    return ClassCatalog(
        names=("sky", "ground", "grass", "crate", "ball"),
        is_thing=(False, False, False, True, True),
    )


class PackingError(RuntimeError):
    """Raised when a shape cannot be placed without overlap after the
    bounded number of attempts."""


@dataclass(frozen=True)
class DomainSpec:
    """Scene recipe plus the photometric character of the domain."""
    name: str
    palette: tuple[tuple[int, int, int], ...]
    shape_count: tuple[int, int] = (2, 5)
    hue_rotation_deg: float = 0.0
    fog_alpha: float = 0.0
    noise_sigma: float = 3.0

    def __post_init__(self):
        if len(self.palette) != 5:
            raise ValidationError("palette needs one color per toy class")
        lo, hi = self.shape_count
        if lo < 0 or hi < lo:
            raise ValidationError(f"bad shape count range {self.shape_count}")
        if not (0.0 <= self.fog_alpha <= 1.0):
            raise ValidationError("fog alpha outside [0, 1]")
        if self.noise_sigma < 0:
            raise ValidationError("noise sigma must be non-negative")


_PALETTE = (
    (135, 170, 220),  # sky
    (110, 80, 60),    # ground
    (60, 140, 70),    # grass
    (205, 165, 60),   # crate
    (190, 60, 75),    # ball
)


def default_source_spec() -> DomainSpec:
    return DomainSpec(name="source", palette=_PALETTE)


def default_target_spec() -> DomainSpec:
    return DomainSpec(name="target", palette=_PALETTE,
                      hue_rotation_deg=40.0, fog_alpha=0.30, noise_sigma=8.0)


def hard_target_spec() -> DomainSpec:
    """A shift strong enough that a freshly trained source model starts out
    nearly blind on the target domain. The mixing-direction comparison uses
    this preset: with so few trustworthy teacher detections, pasting source
    truth onto target images starves the detector of real target instances,
    while the reverse direction keeps an exhaustively labeled canvas."""
    return DomainSpec(name="target-hard", palette=_PALETTE,
                      hue_rotation_deg=60.0, fog_alpha=0.40, noise_sigma=10.0)


def _hue_matrix(degrees: float) -> np.ndarray:
    """Rotation of RGB space about the gray diagonal."""
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    third = 1.0 / 3.0
    rt = 1.0 / np.sqrt(3.0)
    eye = np.eye(3)
    ones = np.full((3, 3), third)
    skew = rt * np.array([[0.0, -1.0, 1.0],
                          [1.0, 0.0, -1.0],
                          [-1.0, 1.0, 0.0]])
    return c * eye + (1 - c) * ones + s * skew


def _noise(rng: SeededRng, shape: tuple[int, ...], sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros(shape)
    n = int(np.prod(shape))
    return np.array([rng.normal(0.0, sigma) for _ in range(n)]).reshape(shape)


def _disc(h: int, w: int, cy: int, cx: int, radius: int) -> np.ndarray:
    yy, xx = np.ogrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2


def generate_scene(spec: DomainSpec, catalog: ClassCatalog, rng: SeededRng,
                   height: int = 40, width: int = 40,
                   max_attempts: int = 40) -> tuple[np.ndarray, PanopticLabel]:
    """One (image, panoptic label) pair; every random choice comes from rng."""
    if height < 12 or width < 12:
        raise ValidationError("scenes need at least 12x12 pixels")
    if catalog.count != 5 or catalog.thing_ids != (CRATE, BALL):
        raise ValidationError("scene generation is defined for the toy catalog")
    h, w = height, width
    sem = np.empty((h, w), dtype=np.uint16)

    horizon = int(h * rng.uniform(0.35, 0.6))
    sem[:horizon] = SKY
    sem[horizon:] = GROUND

    # one grass patch on the ground half
    gh = rng.randint(3, max(3, (h - horizon) // 2))
    gw = rng.randint(4, max(4, w // 2))
    gy = rng.randint(horizon, h - gh)
    gx = rng.randint(0, w - gw)
    sem[gy:gy + gh, gx:gx + gw] = GRASS

    occupancy = np.zeros((h, w), dtype=bool)
    records = []
    n_shapes = rng.randint(*spec.shape_count)
    smax = max(4, min(h, w) // 5)
    for i in range(n_shapes):
        cls = rng.choice([CRATE, BALL])
        placed = False
        for _ in range(max_attempts):
            size = rng.randint(3, smax)
            if cls == CRATE:
                y0 = rng.randint(0, h - size)
                x0 = rng.randint(0, w - size)
                mask = np.zeros((h, w), dtype=bool)
                mask[y0:y0 + size, x0:x0 + size] = True
            else:
                r = max(2, size // 2)
                cy = rng.randint(r, h - 1 - r)
                cx = rng.randint(r, w - 1 - r)
                mask = _disc(h, w, cy, cx, r)
            if (occupancy & mask).any():
                continue
            occupancy |= mask
            sem[mask] = cls
            records.append(InstanceRecord(id=len(records) + 1, class_id=cls,
                                          score=1.0, mask=mask))
            placed = True
            break
        if not placed:
            raise PackingError(
                f"could not place shape {i + 1}/{n_shapes} after {max_attempts} attempts")

    # paint: per-scene color jitter per class, textured with gradients
    jitter = {c: np.array([rng.uniform(-10, 10) for _ in range(3)])
              for c in range(5)}
    img = np.empty((h, w, 3), dtype=np.float64)
    for c in range(5):
        region = sem == c
        img[region] = np.array(spec.palette[c], dtype=np.float64) + jitter[c]
    rows = np.linspace(-12.0, 12.0, h)[:, None, None]
    img = img + rows  # brightness falls from bottom to top

    # domain character: hue rotation, fog, then sensor noise
    if spec.hue_rotation_deg:
        img = img @ _hue_matrix(spec.hue_rotation_deg).T
    if spec.fog_alpha:
        fog = np.array([200.0, 200.0, 210.0])
        img = (1 - spec.fog_alpha) * img + spec.fog_alpha * fog
    img = img + _noise(rng, (h, w, 3), spec.noise_sigma)
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    label = PanopticLabel(semantic=sem,
                          instances=InstanceSet(tuple(records), GROUND_TRUTH))
    return image, label


def generate_bank(spec: DomainSpec, catalog: ClassCatalog, count: int,
                  seed: int, height: int = 40,
                  width: int = 40) -> list[tuple[np.ndarray, PanopticLabel]]:
    """count scenes with per-image seeds derived from (seed, index)."""
    return [
        generate_scene(spec, catalog, SeededRng(derive_seed(seed, index)),
                       height=height, width=width)
        for index in range(count)
    ]
