#!/usr/bin/env python3
"""A guided tour of the two cross-domain mixing strategies.

Generates one labeled source scene and one unlabeled-looking target scene,
then shows, step by step, how a training sample is composed from both:

  1. class-selection mixing: half the source classes, chosen at random,
     are stamped onto the target image together with their labels, while
     target pixels keep pseudo-labels weighted by teacher confidence;
  2. instance paste: confident target instances are cut out and pasted
     onto the source image, with occlusion bookkeeping on the source
     ground truth.

Every artifact is written to ``demo_output/mixing/`` as a PNG you can open.

Run:  python3 demos/mixing_walkthrough.py
"""

from pathlib import Path

import numpy as np
from PIL import Image

from panmix.core.rng import SeededRng
from panmix.core.types import IGNORE, PREDICTED, InstanceRecord, InstanceSet
from panmix.mixing import classmix_select, dacs_compose, imix_compose
from panmix.pseudo import FilterConfig, filter_instances, semantic_argmax
from panmix.synthlab.scenes import (
    default_source_spec,
    default_target_spec,
    generate_scene,
    toy_catalog,
)
from panmix.viz import default_palette, visualize

OUT = Path("demo_output/mixing")
SIZE = 48


def save(name, image):
    OUT.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="RGB").save(OUT / name)
    print(f"  wrote {OUT / name}")


def save_label(name, semantic, image, catalog):
    """Render a semantic map as an overlay so it is viewable as a PNG."""
    records = ()
    from panmix.core.types import GROUND_TRUTH, PanopticLabel
    label = PanopticLabel(semantic=semantic,
                          instances=InstanceSet(records, GROUND_TRUTH))
    save(name, visualize(label, image, default_palette(catalog)))


def main():
    catalog = toy_catalog()
    palette = default_palette(catalog)

    print("== Scene setup ==")
    x_s, y_s = generate_scene(default_source_spec(), catalog, SeededRng(11),
                              SIZE, SIZE)
    x_t, y_t = generate_scene(default_target_spec(), catalog, SeededRng(22),
                              SIZE, SIZE)
    print(f"source scene: {len(y_s.instances)} labeled objects")
    print(f"target scene: {len(y_t.instances)} objects, labels hidden from "
          "training and used here only to fake a teacher")
    save("source.png", x_s)
    save("target.png", x_t)
    save("source_labels.png", visualize(y_s, x_s, palette))

    print()
    print("== Teacher stand-in ==")
    # A real teacher emits class probabilities; here we synthesize a volume
    # peaked on the true class so the walkthrough stays self-contained.
    peak = 0.92
    off = (1.0 - peak) / (catalog.count - 1)
    probs = np.full((SIZE, SIZE, catalog.count), off)
    rows, cols = np.indices((SIZE, SIZE))
    probs[rows, cols, y_t.semantic.astype(int)] = peak
    pseudo = semantic_argmax(probs, conf_threshold=0.9)
    print(f"pseudo-labels cover every pixel; {pseudo.k:.0%} of them clear the "
          "confidence bar and get full loss weight")

    print()
    print("== Strategy 1: class-selection mixing ==")
    rng = SeededRng(33)
    mask = classmix_select(y_s.semantic, rng)
    present = sorted(np.unique(y_s.semantic[y_s.semantic != IGNORE]).tolist())
    chosen = sorted(np.unique(y_s.semantic[mask.mask]).tolist())
    print(f"classes present in the source: {[catalog.names[c] for c in present]}")
    print(f"classes stamped onto the target: {[catalog.names[c] for c in chosen]}")
    mixed = dacs_compose(x_s, y_s.semantic, x_t, pseudo.labels, pseudo.k, mask)
    save("classmix_image.png", mixed.image)
    save_label("classmix_labels.png", mixed.semantic, mixed.image, catalog)
    stamped = float(np.mean(mask.mask))
    print(f"{stamped:.0%} of the pixels now come from the source domain; the "
          "rest keep target pixels under pseudo-label supervision")

    print()
    print("== Strategy 2: instance paste ==")
    # Fake detections on the target: true object masks with made-up scores,
    # one of which is too weak to survive the filter.
    scores = [0.95, 0.85, 0.40, 0.70]
    records = tuple(
        InstanceRecord(id=r.id, class_id=r.class_id,
                       score=scores[(r.id - 1) % len(scores)], mask=r.mask)
        for r in y_t.instances)
    detections = InstanceSet(records, PREDICTED)
    kept, union = filter_instances(detections, FilterConfig(tau=0.75))
    print(f"{len(detections)} detections on the target, {len(kept)} keep a "
          f"score above 0.75, {len(detections) - len(kept)} are discarded; "
          f"the kept masks cover {union.mean():.0%} of the target")
    pasted = imix_compose(x_t, kept, x_s, y_s)
    save("imix_image.png", pasted.image)
    save_label("imix_labels.png", pasted.semantic, pasted.image, catalog)
    n_pasted = sum(1 for r in pasted.instance_supervision if r.score < 1.0)
    n_source = len(pasted.instance_supervision) - n_pasted
    covered = float(np.mean(~pasted.origin_source))
    print(f"{n_pasted} target objects were pasted over {covered:.0%} of the "
          f"source image; {n_source} source objects survive (some trimmed by "
          "occlusion)")

    print()
    print("Open the PNGs under demo_output/mixing/ to compare the results.")


if __name__ == "__main__":
    main()
