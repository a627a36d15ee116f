import json

import jsonschema
import pytest

from panmix.core.types import ValidationError
from panmix.resources import resource_text
from panmix.synthlab.ablate import (
    DEFAULT_SEEDS,
    METRIC_KEYS,
    default_grid,
    render_report,
    run_ablation,
)
from panmix.synthlab.train import TrainConfig

TINY = TrainConfig(iterations=20, epochs=1, image_size=16,
                   source_scenes=2, target_scenes=2, eval_scenes=2, lr=2.0)


def tiny_report(variants=None, seeds=(1, 2)):
    return run_ablation(variants=variants, seeds=seeds, base=TINY)


def test_report_structure_and_statistics():
    calls = []
    report = run_ablation(
        variants=[("baseline", {}), ("mixless", {"use_classmix": False})],
        seeds=(1, 2, 3), base=TINY,
        progress=lambda name, seed: calls.append((name, seed)))
    assert report["seeds"] == [1, 2, 3]
    assert [v["name"] for v in report["variants"]] == ["baseline", "mixless"]
    assert calls == [("baseline", 1), ("baseline", 2), ("baseline", 3),
                     ("mixless", 1), ("mixless", 2), ("mixless", 3)]
    for var in report["variants"]:
        assert len(var["runs"]) == 3
        for key in METRIC_KEYS:
            values = [r[key] for r in var["runs"]]
            mean = sum(values) / 3
            assert var["mean"][key] == pytest.approx(mean)
            assert var["std"][key] == pytest.approx(
                (sum((v - mean) ** 2 for v in values) / 3) ** 0.5)


def test_report_matches_bundled_schema():
    schema = json.loads(resource_text("ablation_report.schema.json"))
    jsonschema.Draft202012Validator.check_schema(schema)
    report = tiny_report(variants=[("baseline", {})], seeds=(1,))
    jsonschema.validate(json.loads(json.dumps(report)), schema)


def test_tau_one_variant_identical_to_baseline():
    # a filter threshold of 1 keeps zero instances, so the instance path
    # never runs and the metrics match the baseline exactly
    report = tiny_report(
        variants=[("baseline", {}),
                  ("imix_off_by_tau", {"use_imix": True, "tau": 1.0,
                                       "imix_start_fraction": 0.0})],
        seeds=(1,))
    a, b = report["variants"]
    assert a["runs"] == b["runs"]


def test_default_grid_names():
    names = [name for name, _ in default_grid()]
    assert names == ["baseline", "imix_t2s", "imix_s2t", "cda", "full"]
    assert DEFAULT_SEEDS == (1, 2, 3)


def test_duplicate_variant_names_rejected():
    with pytest.raises(ValidationError):
        run_ablation(variants=[("x", {}), ("x", {"use_cda": True})],
                     seeds=(1,), base=TINY)


def test_empty_seed_list_rejected():
    with pytest.raises(ValidationError):
        run_ablation(variants=[("baseline", {})], seeds=(), base=TINY)


def test_unknown_override_key_rejected():
    with pytest.raises(ValidationError):
        run_ablation(variants=[("broken", {"learning": 1})],
                     seeds=(1,), base=TINY)


def test_render_report_layout():
    report = tiny_report(variants=[("baseline", {})], seeds=(1,))
    text = render_report(report)
    lines = text.splitlines()
    assert lines[0].split()[:1] == ["variant"]
    for key in METRIC_KEYS:
        assert key in lines[0]
    assert set(lines[1]) <= {"-", " "}
    assert "baseline" in lines[2]
    assert "+/-" in lines[2]
    assert lines[-1] == "seeds: 1"
