"""``panmix``: one executable covering every pipeline stage.

Subcommands
    mix        compose cross-domain training samples from two manifests
    pseudo     threshold teacher outputs into pseudo-labels
    loss-check run the finite-difference audit of every loss gradient
    cda        score features against class anchor embeddings
    eval       PQ / IoU / AP reports over directories of panoptic files
    fuse       combine semantic probabilities and instances into one label
    synth      run or ablate the synthetic two-domain lab
    viz        render a label overlay onto its image
    convert    translate between instance JSONL and panoptic PNG

Exit codes: 0 success, 1 validation or usage error, 2 I/O error. All
randomness flows from ``--seed``; outputs are written atomically and are
byte-stable across reruns with equal inputs.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .cda import class_mean_embeddings, similarity_map
from .core.fileio import atomic_write_bytes, atomic_write_json, atomic_write_text
from .core.formats import read_bank, read_instances, read_volume, write_instances, write_volume
from .core.panoptic import read_panoptic, read_semantic_png, write_panoptic, write_semantic_png
from .core.rng import SeededRng, derive_seed
from .core.types import (
    GROUND_TRUTH,
    IGNORE,
    PREDICTED,
    ClassCatalog,
    InstanceSet,
    PanopticLabel,
    ValidationError,
    check_panoptic,
    default_catalog,
)
from .fusion import FusionConfig, merge
from .gradcheck import run_suite
from .losses import cda_loss
from .manifest import load_manifest
from .metrics import (
    ApConfig,
    IouTally,
    PqStats,
    ap_summary,
    dataset_average_precision,
    iou_summary,
    panoptic_quality,
)
from .mixing import SOURCE_TO_TARGET, TARGET_TO_SOURCE, classmix_select, dacs_compose, imix_compose
from .pseudo import DEFAULT_CONF_THRESHOLD, FilterConfig, filter_instances, semantic_argmax
from .resources import resource_text
from .synthlab import TrainConfig, load_config, run_ablation, render_report, toy_catalog, train
from .synthlab.ablate import default_grid
from .viz import default_palette, visualize

OK = 0
FAIL_VALIDATION = 1
FAIL_IO = 2

_CATALOGS = {"cityscapes16": default_catalog, "toy": toy_catalog}


class _Parser(argparse.ArgumentParser):
    """argparse flavor that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(FAIL_VALIDATION)


def _read_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def _write_image(path: str | Path, image: np.ndarray) -> None:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def _catalog(args) -> ClassCatalog:
    return _CATALOGS[args.catalog]()


def _parallel(jobs: int, fn, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _render_table(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for idx, row in enumerate(rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


# ---------------------------------------------------------------- mix

def _require_path(path, what: str, index: int) -> Path:
    if path is None:
        raise ValidationError(f"record {index} lacks a {what} entry")
    return path


def _cmd_mix(args) -> int:
    source = load_manifest(args.source)
    target = load_manifest(args.target)
    pairs = min(len(source), len(target))
    if pairs == 0:
        raise ValidationError("both manifests must contain at least one record")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    direction = TARGET_TO_SOURCE if args.direction == "t2s" else SOURCE_TO_TARGET

    def one(i: int) -> None:
        s_rec, t_rec = source.records[i], target.records[i]
        x_s = _read_image(s_rec.image)
        x_t = _read_image(t_rec.image)
        stem = out / f"pair_{i:06d}"
        catalog = _catalog(args)
        y_s = read_panoptic(_require_path(s_rec.panoptic, "panoptic", i), catalog)
        if args.mode == "classmix":
            probs = read_volume(_require_path(t_rec.probs, "probs", i))
            pseudo = semantic_argmax(probs, args.conf_threshold)
            rng = SeededRng(derive_seed(args.seed, i))
            m = classmix_select(y_s.semantic, rng)
            mixed = dacs_compose(x_s, y_s.semantic, x_t, pseudo.labels, pseudo.k, m)
            write_semantic_png(f"{stem}_label.png", mixed.semantic)
        else:
            preds = read_instances(_require_path(t_rec.instances, "instances", i),
                                   PREDICTED)
            kept, _ = filter_instances(preds, FilterConfig(args.tau))
            mixed = imix_compose(x_t, kept, x_s, y_s, direction=direction,
                                 occlusion_eps=args.occlusion_eps)
            write_semantic_png(f"{stem}_label.png", mixed.semantic)
            write_instances(f"{stem}_instances.jsonl", mixed.instance_supervision)
        _write_image(f"{stem}_image.png", mixed.image)
        conf = np.broadcast_to(np.asarray(mixed.pixel_confidence, dtype=np.float64),
                               mixed.image.shape[:2])
        write_volume(f"{stem}_conf.prb", conf[..., None])

    _parallel(args.jobs, one, list(range(pairs)))
    print(f"wrote {pairs} mixed samples to {out}")
    return OK


# ---------------------------------------------------------------- pseudo

def _cmd_pseudo(args) -> int:
    probs = read_volume(args.probs)
    pseudo = semantic_argmax(probs, args.conf_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_semantic_png(out / "pseudo_label.png", pseudo.labels)
    summary = {"confident_fraction": round(pseudo.k, 6)}
    if args.instances is not None:
        preds = read_instances(args.instances, PREDICTED)
        kept, _ = filter_instances(preds, FilterConfig(args.tau))
        write_instances(out / "filtered.jsonl", kept)
        summary["instances_in"] = len(preds)
        summary["instances_kept"] = len(kept)
    print(json.dumps(summary, indent=2))
    return OK


# ---------------------------------------------------------------- loss-check

def _cmd_loss_check(args) -> int:
    results = run_suite(seed=args.seed, trials=args.trials)
    rows = [["loss", "trials", "max rel err", "tolerance", "seconds", "status"]]
    for r in results:
        rows.append([r.name, str(r.trials), f"{r.max_rel_err:.3e}",
                     f"{r.tolerance:.0e}", f"{r.seconds:.2f}",
                     "PASS" if r.passed else "FAIL"])
    print(_render_table(rows))
    return OK if all(r.passed for r in results) else FAIL_VALIDATION


# ---------------------------------------------------------------- cda

def _cmd_cda(args) -> int:
    bank = read_bank(args.bank)
    features = read_volume(args.features)
    labels = read_semantic_png(args.labels)
    anchors = class_mean_embeddings(bank, normalize=True)
    sigma = similarity_map(features, anchors,
                           normalize_features=not args.raw_features)
    out = cda_loss(sigma, labels)
    if args.out is not None:
        write_volume(args.out, sigma)
    print(json.dumps({"loss": round(out.value, 6),
                      "classes": anchors.num_classes,
                      "labeled_pixels": int(np.sum(labels != IGNORE))}, indent=2))
    return OK


# ---------------------------------------------------------------- eval

def _cmd_eval(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = set(metrics) - {"pq", "miou", "ap"}
    if unknown:
        raise ValidationError(f"unknown metrics: {sorted(unknown)}")
    gt_dir, pred_dir = Path(args.gt), Path(args.pred)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_dir}")
    if not pred_dir.is_dir():
        raise FileNotFoundError(f"prediction directory not found: {pred_dir}")
    names = sorted(p.name for p in gt_dir.glob("*.png"))
    if not names:
        raise ValidationError(f"no panoptic PNGs in {gt_dir}")
    for name in names:
        if not (pred_dir / name).is_file():
            raise FileNotFoundError(f"missing prediction: {pred_dir / name}")
    catalog = _catalog(args)

    def one(name: str):
        gt = read_panoptic(gt_dir / name, catalog)
        pred = read_panoptic(pred_dir / name, catalog)
        return gt, pred

    loaded = _parallel(args.jobs, one, names)
    report: dict = {"images": len(names)}
    if "pq" in metrics:
        stats = PqStats()
        for gt, pred in loaded:
            stats = stats + panoptic_quality(gt, pred, catalog)
        report["pq"] = stats.summary(catalog)
    if "miou" in metrics:
        tally = IouTally(catalog.count)
        for gt, pred in loaded:
            tally.add(gt.semantic, pred.semantic)
        report["miou"] = iou_summary(*tally.result(), catalog)
    if "ap" in metrics:
        pairs = [(gt.instances, pred.instances) for gt, pred in loaded]
        report["ap"] = ap_summary(*dataset_average_precision(pairs, catalog),
                                  catalog)

    if args.out is not None:
        atomic_write_json(args.out, report)
    rows = [["metric", "value"]]
    for key in ("pq", "miou", "ap"):
        if key in report:
            for mean_key in ("mpq", "msq", "mrq", "miou", "map"):
                if mean_key in report[key]:
                    rows.append([mean_key, f"{report[key][mean_key]:.4f}"])
    print(_render_table(rows))
    return OK


# ---------------------------------------------------------------- fuse

def _cmd_fuse(args) -> int:
    sem = read_volume(args.sem)
    inst = read_instances(args.inst, PREDICTED)
    catalog = _catalog(args)
    label = merge(sem, inst, catalog, FusionConfig(score_floor=args.score_floor))
    write_panoptic(args.out, label, catalog)
    print(f"wrote {args.out}")
    return OK


# ---------------------------------------------------------------- synth

def _cmd_synth_run(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = TrainConfig(**{**asdict(cfg), "seed": args.seed})
    result = train(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_json(out / "trace.json",
                      {"config": asdict(cfg), "trace": list(result.trace)})
    for name, model in (("student", result.model), ("teacher", result.teacher)):
        buf = io.BytesIO()
        np.save(buf, model.weights)
        atomic_write_bytes(out / f"{name}.npy", buf.getvalue())
    rows = [["iteration", "loss", "miou", "msq", "mrq", "mpq", "map"]]
    for entry in result.trace:
        rows.append([str(entry["iteration"]), f"{entry['loss']:.4f}"]
                    + [f"{entry[k]:.4f}" for k in ("miou", "msq", "mrq", "mpq", "map")])
    table = _render_table(rows)
    atomic_write_text(out / "trace.txt", table + "\n")
    print(table)
    return OK


def _cmd_synth_ablate(args) -> int:
    if args.grid is not None:
        spec = json.loads(Path(args.grid).read_text())
        variants = [(v["name"], v.get("overrides", {})) for v in spec]
    else:
        variants = default_grid()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    base = load_config(args.config) if args.config else TrainConfig()
    report = run_ablation(variants, seeds=seeds, base=base)

    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        schema = json.loads(resource_text("ablation_report.schema.json"))
        jsonschema.validate(report, schema)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_json(out / "report.json", report)
    text = render_report(report)
    atomic_write_text(out / "report.txt", text)
    print(text, end="")
    return OK


# ---------------------------------------------------------------- viz

def _cmd_viz(args) -> int:
    catalog = _catalog(args)
    image = _read_image(args.image)
    label = read_panoptic(args.label, catalog)
    overlay = visualize(label, image, default_palette(catalog))
    _write_image(args.out, overlay)
    print(f"wrote {args.out}")
    return OK


# ---------------------------------------------------------------- convert

def _instances_to_panoptic(instances: InstanceSet,
                           catalog: ClassCatalog) -> PanopticLabel:
    if len(instances) == 0:
        raise ValidationError("cannot infer image size from an empty instance file")
    h, w = instances.records[0].mask.shape
    sem = np.full((h, w), IGNORE, dtype=np.uint16)
    for rec in instances:
        sem[rec.mask] = rec.class_id
    label = PanopticLabel(semantic=sem, instances=instances)
    return check_panoptic(label, catalog)


def _cmd_convert(args) -> int:
    src, dst = Path(getattr(args, "in")), Path(args.out)
    catalog = _catalog(args)
    if src.suffix == ".jsonl" and dst.suffix == ".png":
        instances = read_instances(src, args.provenance)
        write_panoptic(dst, _instances_to_panoptic(instances, catalog), catalog)
    elif src.suffix == ".png" and dst.suffix == ".jsonl":
        label = read_panoptic(src, catalog)
        write_instances(dst, label.instances)
    else:
        raise ValidationError(
            "conversion is between a .jsonl and a .png path (either direction)")
    print(f"wrote {dst}")
    return OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="panmix", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"panmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, handler, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--catalog", choices=sorted(_CATALOGS), default="cityscapes16",
                       help="class catalog interpreting label files")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker threads for per-image stages")
        return p

    p = add("mix", _cmd_mix, "compose cross-domain training samples")
    p.add_argument("--mode", choices=("classmix", "imix"), required=True)
    p.add_argument("--direction", choices=("t2s", "s2t"), default="t2s")
    p.add_argument("--source", required=True, help="source-domain manifest JSON")
    p.add_argument("--target", required=True, help="target-domain manifest JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tau", type=float, default=0.75,
                   help="instance confidence filter (imix mode)")
    p.add_argument("--conf-threshold", type=float, default=DEFAULT_CONF_THRESHOLD,
                   help="pixel confidence bar for pseudo-label weight (classmix mode)")
    p.add_argument("--occlusion-eps", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=1)

    p = add("pseudo", _cmd_pseudo, "threshold teacher outputs into pseudo-labels")
    p.add_argument("--probs", required=True, help="PRB1 probability volume")
    p.add_argument("--instances", help="predicted instance JSONL")
    p.add_argument("--tau", type=float, default=0.75)
    p.add_argument("--conf-threshold", type=float, default=DEFAULT_CONF_THRESHOLD)
    p.add_argument("--out", required=True, help="output directory")

    p = add("loss-check", _cmd_loss_check, "finite-difference audit of all losses")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)

    p = add("cda", _cmd_cda, "similarity maps against class anchors")
    p.add_argument("--bank", required=True, help="CEB1 embedding bank")
    p.add_argument("--features", required=True, help="PRB1 feature volume")
    p.add_argument("--labels", required=True, help="16-bit class-id PNG")
    p.add_argument("--out", help="write the similarity volume here (PRB1)")
    p.add_argument("--raw-features", action="store_true",
                   help="skip per-pixel feature normalization")

    p = add("eval", _cmd_eval, "PQ / IoU / AP reports over panoptic directories")
    p.add_argument("--gt", required=True, help="ground-truth directory")
    p.add_argument("--pred", required=True, help="prediction directory")
    p.add_argument("--metrics", default="pq,miou,ap")
    p.add_argument("--out", help="write the JSON report here")

    p = add("fuse", _cmd_fuse, "merge probabilities and instances into one label")
    p.add_argument("--sem", required=True, help="PRB1 probability volume")
    p.add_argument("--inst", required=True, help="instance JSONL")
    p.add_argument("--out", required=True, help="output panoptic PNG path")
    p.add_argument("--score-floor", type=float, default=0.5)

    p = sub.add_parser("synth", help="synthetic two-domain lab")
    synth_sub = p.add_subparsers(dest="synth_command", required=True,
                                 metavar="subcommand")
    pr = synth_sub.add_parser("run", help="one training run")
    pr.set_defaults(handler=_cmd_synth_run)
    pr.add_argument("--config", help="flat key=value config file")
    pr.add_argument("--seed", type=int, help="override the config seed")
    pr.add_argument("--out", required=True, help="output directory")
    pa = synth_sub.add_parser("ablate", help="variant sweep with a report")
    pa.set_defaults(handler=_cmd_synth_ablate)
    pa.add_argument("--grid", help="JSON list of {name, overrides} variants")
    pa.add_argument("--config", help="base config file")
    pa.add_argument("--seeds", default="1,2,3")
    pa.add_argument("--out", required=True, help="output directory")

    p = add("viz", _cmd_viz, "render a label overlay")
    p.add_argument("--image", required=True)
    p.add_argument("--label", required=True, help="panoptic PNG (sidecar alongside)")
    p.add_argument("--out", required=True)

    p = add("convert", _cmd_convert, "instance JSONL <-> panoptic PNG")
    p.add_argument("--in", required=True, help="input path (.jsonl or .png)")
    p.add_argument("--out", required=True, help="output path (.png or .jsonl)")
    p.add_argument("--provenance", choices=(GROUND_TRUTH, PREDICTED),
                   default=GROUND_TRUTH,
                   help="provenance for loaded JSONL records; panoptic output "
                        "requires ground-truth (disjoint masks, scores 1)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else OK
    try:
        return args.handler(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_IO


if __name__ == "__main__":
    sys.exit(main())
