import json
import subprocess

import numpy as np
import pytest
from PIL import Image

from panmix.cda import synthetic_prompt_bank
from panmix.cli import main
from panmix.core.formats import write_bank, write_instances, write_volume
from panmix.core.panoptic import read_panoptic, read_semantic_png, write_panoptic
from panmix.core.rng import SeededRng
from panmix.core.types import PREDICTED, InstanceRecord, InstanceSet
from panmix.synthlab.scenes import (
    default_source_spec,
    default_target_spec,
    generate_scene,
    toy_catalog,
)


def save_image(path, arr):
    Image.fromarray(arr, mode="RGB").save(path)


def scene_pair(seed, target=False, size=24):
    spec = default_target_spec() if target else default_source_spec()
    return generate_scene(spec, toy_catalog(), SeededRng(seed), size, size)


def probs_from_semantic(sem, classes=5, peak=0.9):
    off = (1.0 - peak) / (classes - 1)
    vol = np.full(sem.shape + (classes,), off, dtype=np.float64)
    rows, cols = np.indices(sem.shape)
    vol[rows, cols, sem.astype(int)] = peak
    return vol


def build_eval_dirs(tmp_path, count=3):
    cat = toy_catalog()
    gt, pred = tmp_path / "gt", tmp_path / "pred"
    gt.mkdir(), pred.mkdir()
    for i in range(count):
        _, label = scene_pair(seed=10 + i)
        write_panoptic(gt / f"{i}.png", label, cat)
        write_panoptic(pred / f"{i}.png", label, cat)
    return gt, pred


def write_manifest(path, records, domain="source"):
    path.write_text(json.dumps({"domain": domain, "records": records}))
    return path


def build_mix_inputs(tmp_path, count=2):
    """Source images with panoptic labels, target images with probs and
    predicted instances, plus manifests referencing them all."""
    cat = toy_catalog()
    src, tgt = tmp_path / "src", tmp_path / "tgt"
    src.mkdir(), tgt.mkdir()
    s_records, t_records = [], []
    for i in range(count):
        image, label = scene_pair(seed=30 + i)
        save_image(src / f"{i}.png", image)
        write_panoptic(src / f"{i}_pan.png", label, cat)
        s_records.append({"image": f"src/{i}.png", "panoptic": f"src/{i}_pan.png"})

        t_image, t_label = scene_pair(seed=60 + i, target=True)
        save_image(tgt / f"{i}.png", t_image)
        write_volume(tgt / f"{i}.prb", probs_from_semantic(t_label.semantic))
        records = []
        for rec in t_label.instances:
            score = 0.9 if rec.id % 2 else 0.3
            records.append(InstanceRecord(id=rec.id, class_id=rec.class_id,
                                          score=score, mask=rec.mask))
        write_instances(tgt / f"{i}.jsonl", InstanceSet(tuple(records), PREDICTED))
        t_records.append({"image": f"tgt/{i}.png", "probs": f"tgt/{i}.prb",
                          "instances": f"tgt/{i}.jsonl"})
    source = write_manifest(tmp_path / "source.json", s_records, "source")
    target = write_manifest(tmp_path / "target.json", t_records, "target")
    return source, target


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "panmix" in capsys.readouterr().out


def test_missing_command_is_usage_error(capsys):
    assert main([]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["eval", "--gt", "a", "--pred", "b", "--nope"]) == 1


def test_eval_identical_directories_scores_one(tmp_path, capsys):
    gt, pred = build_eval_dirs(tmp_path)
    report_path = tmp_path / "report.json"
    rc = main(["eval", "--catalog", "toy", "--gt", str(gt), "--pred", str(pred),
               "--out", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["images"] == 3
    assert report["pq"]["mpq"] == pytest.approx(1.0)
    assert report["pq"]["msq"] == pytest.approx(1.0)
    assert report["miou"]["miou"] == pytest.approx(1.0)
    assert report["ap"]["map"] == pytest.approx(1.0)
    out = capsys.readouterr().out
    assert "mpq" in out and "1.0000" in out


def test_eval_missing_directory_is_io_error(tmp_path, capsys):
    gt, _ = build_eval_dirs(tmp_path, count=1)
    rc = main(["eval", "--catalog", "toy", "--gt", str(gt),
               "--pred", str(tmp_path / "absent")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_eval_missing_prediction_file_is_io_error(tmp_path):
    gt, pred = build_eval_dirs(tmp_path, count=2)
    (pred / "1.png").unlink()
    rc = main(["eval", "--catalog", "toy", "--gt", str(gt), "--pred", str(pred)])
    assert rc == 2


def test_eval_unknown_metric_is_validation_error(tmp_path, capsys):
    gt, pred = build_eval_dirs(tmp_path, count=1)
    rc = main(["eval", "--catalog", "toy", "--gt", str(gt), "--pred", str(pred),
               "--metrics", "pq,banana"])
    assert rc == 1
    assert "banana" in capsys.readouterr().err


def test_mix_classmix_writes_deterministic_outputs(tmp_path, capsys):
    source, target = build_mix_inputs(tmp_path)
    names = ["pair_000000_image.png", "pair_000000_label.png",
             "pair_000000_conf.prb", "pair_000001_image.png"]
    outs = []
    for run in ("a", "b"):
        out = tmp_path / f"out_{run}"
        rc = main(["mix", "--mode", "classmix", "--catalog", "toy",
                   "--source", str(source), "--target", str(target),
                   "--out", str(out), "--seed", "3", "--jobs", "1"])
        assert rc == 0
        outs.append(out)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    labels = read_semantic_png(outs[0] / "pair_000000_label.png")
    assert labels.shape == (24, 24)
    assert "wrote 2 mixed samples" in capsys.readouterr().out


def test_mix_imix_writes_instance_supervision(tmp_path):
    source, target = build_mix_inputs(tmp_path, count=1)
    out = tmp_path / "out"
    rc = main(["mix", "--mode", "imix", "--direction", "t2s", "--catalog", "toy",
               "--source", str(source), "--target", str(target),
               "--out", str(out)])
    assert rc == 0
    from panmix.core.formats import read_instances
    sup = read_instances(out / "pair_000000_instances.jsonl", PREDICTED)
    assert len(sup) > 0
    image = np.asarray(Image.open(out / "pair_000000_image.png"))
    assert image.shape == (24, 24, 3)


def test_mix_record_missing_artifact_is_validation_error(tmp_path, capsys):
    source, _ = build_mix_inputs(tmp_path, count=1)
    bare = write_manifest(
        tmp_path / "bare.json", [{"image": "tgt/0.png"}], "target")
    rc = main(["mix", "--mode", "classmix", "--catalog", "toy",
               "--source", str(source), "--target", str(bare),
               "--out", str(tmp_path / "out"), "--jobs", "1"])
    assert rc == 1
    assert "lacks a probs entry" in capsys.readouterr().err


def test_mix_missing_manifest_is_io_error(tmp_path):
    rc = main(["mix", "--mode", "classmix", "--source",
               str(tmp_path / "none.json"), "--target", str(tmp_path / "none.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 2


def test_pseudo_writes_label_and_filters_instances(tmp_path, capsys):
    _, label = scene_pair(seed=44)
    write_volume(tmp_path / "p.prb", probs_from_semantic(label.semantic, peak=0.99))
    records = []
    for rec in label.instances:
        records.append(InstanceRecord(id=rec.id, class_id=rec.class_id,
                                      score=0.9 if rec.id == 1 else 0.2,
                                      mask=rec.mask))
    write_instances(tmp_path / "i.jsonl", InstanceSet(tuple(records), PREDICTED))
    out = tmp_path / "out"
    rc = main(["pseudo", "--probs", str(tmp_path / "p.prb"),
               "--instances", str(tmp_path / "i.jsonl"),
               "--out", str(out), "--tau", "0.5"])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["confident_fraction"] == pytest.approx(1.0)
    assert summary["instances_in"] == len(records)
    assert summary["instances_kept"] == 1
    assert np.array_equal(read_semantic_png(out / "pseudo_label.png"),
                          label.semantic)


def test_fuse_then_convert_roundtrip(tmp_path):
    cat = toy_catalog()
    _, label = scene_pair(seed=77)
    write_volume(tmp_path / "sem.prb", probs_from_semantic(label.semantic))
    records = tuple(
        InstanceRecord(id=rec.id, class_id=rec.class_id, score=0.8, mask=rec.mask)
        for rec in label.instances)
    write_instances(tmp_path / "inst.jsonl", InstanceSet(records, PREDICTED))
    fused = tmp_path / "fused.png"
    rc = main(["fuse", "--catalog", "toy", "--sem", str(tmp_path / "sem.prb"),
               "--inst", str(tmp_path / "inst.jsonl"), "--out", str(fused)])
    assert rc == 0
    merged = read_panoptic(fused, cat)
    assert len(merged.instances) == len(records)
    assert all(rec.score == 1.0 for rec in merged.instances)

    back = tmp_path / "back.jsonl"
    assert main(["convert", "--catalog", "toy", "--in", str(fused),
                 "--out", str(back)]) == 0
    again = tmp_path / "again.png"
    assert main(["convert", "--catalog", "toy", "--in", str(back),
                 "--out", str(again)]) == 0
    assert len(read_panoptic(again, cat).instances) == len(records)


def test_convert_requires_known_suffix_pair(tmp_path, capsys):
    rc = main(["convert", "--in", str(tmp_path / "a.txt"),
               "--out", str(tmp_path / "b.txt")])
    assert rc == 1
    assert "jsonl" in capsys.readouterr().err


def test_viz_writes_overlay(tmp_path):
    cat = toy_catalog()
    image, label = scene_pair(seed=5)
    save_image(tmp_path / "img.png", image)
    write_panoptic(tmp_path / "pan.png", label, cat)
    out = tmp_path / "viz.png"
    rc = main(["viz", "--catalog", "toy", "--image", str(tmp_path / "img.png"),
               "--label", str(tmp_path / "pan.png"), "--out", str(out)])
    assert rc == 0
    overlay = np.asarray(Image.open(out))
    assert overlay.shape == (24, 24, 3)
    assert not np.array_equal(overlay, image)


def test_cda_reports_loss_and_writes_similarity(tmp_path, capsys):
    rng = SeededRng(12)
    bank = synthetic_prompt_bank(4, prompts=3, dim=8, seed=2)
    write_bank(tmp_path / "bank.ceb", bank)
    feats = np.array([rng.random() for _ in range(6 * 7 * 8)]).reshape(6, 7, 8)
    write_volume(tmp_path / "f.prb", feats)
    labels = np.array([rng.below(4) for _ in range(6 * 7)],
                      dtype=np.uint16).reshape(6, 7)
    from panmix.core.panoptic import write_semantic_png
    write_semantic_png(tmp_path / "l.png", labels)
    sigma_path = tmp_path / "sigma.prb"
    rc = main(["cda", "--bank", str(tmp_path / "bank.ceb"),
               "--features", str(tmp_path / "f.prb"),
               "--labels", str(tmp_path / "l.png"), "--out", str(sigma_path)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["classes"] == 4
    assert summary["labeled_pixels"] == 42
    assert summary["loss"] >= 0.0
    from panmix.core.formats import read_volume
    assert read_volume(sigma_path).shape == (6, 7, 4)


def test_loss_check_passes(capsys):
    rc = main(["loss-check", "--trials", "2", "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


TINY_CFG = """\
iterations = 12
epochs = 1
image_size = 16
source_scenes = 2
target_scenes = 2
eval_scenes = 2
lr = 2.0
seed = 9
"""


def test_synth_run_writes_trace_and_weights(tmp_path, capsys):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text(TINY_CFG)
    out = tmp_path / "run"
    rc = main(["synth", "run", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "trace.json").read_text())
    assert payload["config"]["seed"] == 9
    assert payload["config"]["iterations"] == 12
    assert [e["iteration"] for e in payload["trace"]] == [12]
    weights = np.load(out / "student.npy")
    assert np.all(np.isfinite(weights))
    assert np.load(out / "teacher.npy").shape == weights.shape
    table = (out / "trace.txt").read_text()
    assert "miou" in table and table in capsys.readouterr().out + "\n"


def test_synth_run_seed_override(tmp_path):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text(TINY_CFG)
    out = tmp_path / "run"
    rc = main(["synth", "run", "--config", str(cfg), "--seed", "11",
               "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "trace.json").read_text())
    assert payload["config"]["seed"] == 11


def test_synth_ablate_grid(tmp_path, capsys):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text(TINY_CFG)
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps([
        {"name": "baseline"},
        {"name": "alignment", "overrides": {"use_cda": True}},
    ]))
    out = tmp_path / "ablate"
    rc = main(["synth", "ablate", "--config", str(cfg), "--grid", str(grid),
               "--seeds", "1", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert [v["name"] for v in report["variants"]] == ["baseline", "alignment"]
    assert report["seeds"] == [1]
    text = (out / "report.txt").read_text()
    assert "baseline" in text and "alignment" in text
    assert capsys.readouterr().out == text


def test_fuse_bad_score_floor_is_validation_error(tmp_path, capsys):
    _, label = scene_pair(seed=77)
    write_volume(tmp_path / "sem.prb", probs_from_semantic(label.semantic))
    write_instances(tmp_path / "inst.jsonl", InstanceSet((), PREDICTED))
    rc = main(["fuse", "--catalog", "toy", "--sem", str(tmp_path / "sem.prb"),
               "--inst", str(tmp_path / "inst.jsonl"),
               "--out", str(tmp_path / "f.png"), "--score-floor", "1.5"])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run(["panmix", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "panmix" in proc.stdout
