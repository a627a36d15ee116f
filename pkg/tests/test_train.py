import dataclasses
import math

import numpy as np
import pytest

from panmix.core.types import ValidationError
from panmix.resources import resource_path
from panmix.synthlab.model import init_model
from panmix.synthlab.scenes import default_source_spec, toy_catalog
from panmix.synthlab.train import (
    TrainConfig,
    TrainingDiverged,
    config_from_mapping,
    ema_update,
    evaluate,
    load_config,
    train,
)

SMOKE = TrainConfig(iterations=30, epochs=2, image_size=16,
                    source_scenes=3, target_scenes=3, eval_scenes=2,
                    lr=2.0, seed=5)


# --------------------------------------------------------------------- ema


def test_ema_arithmetic_examples():
    t = np.array([1.0, 2.0])
    s = np.array([3.0, 6.0])
    assert np.allclose(ema_update(t, s, 0.5), [2.0, 4.0])
    assert np.allclose(ema_update(t, s, 0.9), [1.2, 2.4])
    assert np.allclose(ema_update(t, s, 0.0), s)
    assert np.allclose(ema_update(t, s, 1.0), t)


def test_ema_geometric_convergence():
    # fixed student: the teacher's gap shrinks by the factor alpha each step
    alpha = 0.99
    teacher = np.array([10.0])
    student = np.array([0.0])
    gap = float(teacher[0])
    for _ in range(50):
        teacher = ema_update(teacher, student, alpha)
        new_gap = float(teacher[0])
        assert abs(new_gap / gap - alpha) < 1e-12
        gap = new_gap


def test_ema_validation():
    with pytest.raises(ValidationError):
        ema_update(np.zeros(2), np.zeros(3), 0.5)
    with pytest.raises(ValidationError):
        ema_update(np.zeros(2), np.zeros(2), 1.5)


# ------------------------------------------------------------------ config


def test_config_defaults_valid():
    cfg = TrainConfig()
    assert cfg.iterations > 0
    assert cfg.imix_direction == "target_to_source"


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(iterations=-1)
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig(tau=1.2)
    with pytest.raises(ValidationError):
        TrainConfig(alpha=-0.1)
    with pytest.raises(ValidationError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(imix_direction="both_ways")
    with pytest.raises(ValidationError):
        TrainConfig(imix_start_fraction=2.0)


def test_config_from_mapping_overrides():
    cfg = config_from_mapping({"iterations": 5, "use_imix": True})
    assert cfg.iterations == 5
    assert cfg.use_imix is True
    assert cfg.lr == TrainConfig().lr


def test_config_from_mapping_unknown_key():
    with pytest.raises(ValidationError, match="unknown config keys"):
        config_from_mapping({"iterationz": 5})


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("""
# a comment line
iterations = 12
use_imix = yes
tau = 0.5   # trailing comment
imix_direction = source_to_target
""")
    cfg = load_config(path)
    assert cfg.iterations == 12
    assert cfg.use_imix is True
    assert cfg.tau == 0.5
    assert cfg.imix_direction == "source_to_target"


def test_load_config_errors_carry_location(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("iterations 12\n")
    with pytest.raises(ValidationError, match=r"bad\.cfg:1"):
        load_config(bad)
    bad.write_text("volume = 11\n")
    with pytest.raises(ValidationError, match="unknown key"):
        load_config(bad)
    bad.write_text("use_imix = maybe\n")
    with pytest.raises(ValidationError, match="boolean"):
        load_config(bad)


def test_bundled_config_matches_defaults():
    cfg = load_config(resource_path("synth_default.cfg"))
    assert cfg == TrainConfig()


# ------------------------------------------------------------------- train


def test_zero_iterations_returns_initial_model():
    cfg = dataclasses.replace(SMOKE, iterations=0, epochs=1)
    result = train(cfg)
    assert (result.model.weights == 0).all()
    assert (result.teacher.weights == 0).all()
    assert result.trace == ()
    assert result.final_metrics == {}


def test_training_improves_over_zero_model():
    result = train(dataclasses.replace(SMOKE, iterations=120, epochs=2))
    cat = toy_catalog()
    # rebuild the eval bank exactly as train() does
    from panmix.core.rng import derive_seed
    from panmix.synthlab.scenes import default_target_spec, generate_bank
    eval_bank = generate_bank(default_target_spec(), cat, SMOKE.eval_scenes,
                              derive_seed(SMOKE.seed, 303), SMOKE.image_size,
                              SMOKE.image_size)
    before = evaluate(init_model(cat.count), eval_bank, cat)
    after = result.final_metrics
    assert after["miou"] > before["miou"]


def test_trace_is_bit_stable():
    a = train(SMOKE)
    b = train(SMOKE)
    assert a.trace == b.trace
    assert np.array_equal(a.model.weights, b.model.weights)
    assert np.array_equal(a.teacher.weights, b.teacher.weights)


def test_trace_lands_on_epoch_boundaries():
    result = train(dataclasses.replace(SMOKE, iterations=30, epochs=3))
    assert [e["iteration"] for e in result.trace] == [10, 20, 30]
    for entry in result.trace:
        assert set(entry) == {"iteration", "loss",
                              "miou", "msq", "mrq", "mpq", "map"}


def test_alpha_zero_teacher_tracks_student():
    result = train(dataclasses.replace(SMOKE, alpha=0.0))
    assert np.array_equal(result.model.weights, result.teacher.weights)


def test_alpha_one_teacher_frozen():
    result = train(dataclasses.replace(SMOKE, alpha=1.0))
    assert (result.teacher.weights == 0).all()
    assert not (result.model.weights == 0).all()


def test_divergence_detected():
    with pytest.raises(TrainingDiverged, match="iteration"):
        train(dataclasses.replace(SMOKE, lr=1e15, iterations=10))


def test_seed_changes_outcome():
    a = train(SMOKE)
    b = train(dataclasses.replace(SMOKE, seed=6))
    assert not np.array_equal(a.model.weights, b.model.weights)


def test_zero_domain_gap_trains_cleanly():
    # target spec equal to the source spec: self-training must not hurt
    spec = default_source_spec()
    cfg = dataclasses.replace(SMOKE, iterations=150, epochs=1)
    plain = train(cfg, source_spec=spec, target_spec=spec)
    mixed = train(dataclasses.replace(cfg, use_imix=True,
                                      imix_start_fraction=0.5),
                  source_spec=spec, target_spec=spec)
    assert plain.final_metrics["miou"] > 0.5
    assert abs(mixed.final_metrics["mpq"] - plain.final_metrics["mpq"]) < 0.2


def test_zero_gap_variants_stay_within_two_points():
    # with no shift between the domains, enabling instance paste or the
    # alignment loss must leave panoptic quality essentially unchanged
    spec = default_source_spec()
    for seed in (1, 2, 3):
        base = train(TrainConfig(seed=seed), source_spec=spec,
                     target_spec=spec).final_metrics["mpq"]
        for extra in (dict(use_imix=True), dict(use_cda=True)):
            variant = train(TrainConfig(seed=seed, **extra), source_spec=spec,
                            target_spec=spec).final_metrics["mpq"]
            assert abs(variant - base) < 0.02, (seed, extra)
