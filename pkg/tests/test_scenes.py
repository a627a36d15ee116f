import numpy as np
import pytest

from panmix.core.rng import SeededRng
from panmix.core.types import ValidationError, check_panoptic
from panmix.synthlab.scenes import (
    DomainSpec,
    PackingError,
    default_source_spec,
    default_target_spec,
    generate_bank,
    generate_scene,
    hard_target_spec,
    toy_catalog,
)


def test_scene_reproducible_byte_for_byte():
    cat = toy_catalog()
    spec = default_source_spec()
    img_a, lab_a = generate_scene(spec, cat, SeededRng(61))
    img_b, lab_b = generate_scene(spec, cat, SeededRng(61))
    assert np.array_equal(img_a, img_b)
    assert lab_a.same_content(lab_b)


def test_different_seeds_differ():
    cat = toy_catalog()
    spec = default_source_spec()
    img_a, _ = generate_scene(spec, cat, SeededRng(1))
    img_b, _ = generate_scene(spec, cat, SeededRng(2))
    assert not np.array_equal(img_a, img_b)


def test_zero_shapes_allowed():
    cat = toy_catalog()
    spec = DomainSpec(name="bare", palette=default_source_spec().palette,
                      shape_count=(0, 0))
    _, label = generate_scene(spec, cat, SeededRng(62))
    assert label.instances.records == ()
    assert set(np.unique(label.semantic)) <= {0, 1, 2}


def test_labels_pass_checker_many_seeds():
    cat = toy_catalog()
    for spec in (default_source_spec(), default_target_spec(), hard_target_spec()):
        for seed in range(35):
            img, label = generate_scene(spec, cat, SeededRng(seed))
            check_panoptic(label, cat)
            assert img.shape == label.semantic.shape + (3,)
            assert img.dtype == np.uint8


def test_target_domain_actually_shifts_pixels():
    cat = toy_catalog()
    img_s, _ = generate_scene(default_source_spec(), cat, SeededRng(63))
    img_t, _ = generate_scene(default_target_spec(), cat, SeededRng(63))
    # same geometry stream, different photometry
    diff = np.abs(img_s.astype(int) - img_t.astype(int)).mean()
    assert diff > 10


def test_hard_target_shifts_more_than_default():
    cat = toy_catalog()
    img_s, _ = generate_scene(default_source_spec(), cat, SeededRng(64))
    img_t, _ = generate_scene(default_target_spec(), cat, SeededRng(64))
    img_h, _ = generate_scene(hard_target_spec(), cat, SeededRng(64))
    d_t = np.abs(img_s.astype(int) - img_t.astype(int)).mean()
    d_h = np.abs(img_s.astype(int) - img_h.astype(int)).mean()
    assert d_h > d_t


def test_packing_failure_raises():
    cat = toy_catalog()
    crowded = DomainSpec(name="crowded",
                         palette=default_source_spec().palette,
                         shape_count=(60, 60))
    with pytest.raises(PackingError):
        generate_scene(crowded, cat, SeededRng(65), height=12, width=12,
                       max_attempts=3)


def test_minimum_scene_size_enforced():
    cat = toy_catalog()
    with pytest.raises(ValidationError):
        generate_scene(default_source_spec(), cat, SeededRng(66),
                       height=8, width=40)


def test_wrong_catalog_rejected():
    from helpers import toyish_catalog
    with pytest.raises(ValidationError):
        generate_scene(default_source_spec(), toyish_catalog(), SeededRng(67))


def test_bank_images_independent_of_bank_size():
    cat = toy_catalog()
    spec = default_source_spec()
    small = generate_bank(spec, cat, 3, seed=99)
    large = generate_bank(spec, cat, 6, seed=99)
    for (img_a, lab_a), (img_b, lab_b) in zip(small, large):
        assert np.array_equal(img_a, img_b)
        assert lab_a.same_content(lab_b)


def test_bank_entries_distinct():
    cat = toy_catalog()
    bank = generate_bank(default_source_spec(), cat, 4, seed=100)
    images = [img.tobytes() for img, _ in bank]
    assert len(set(images)) == 4


def test_spec_validation():
    pal = default_source_spec().palette
    with pytest.raises(ValidationError):
        DomainSpec(name="x", palette=pal[:3])
    with pytest.raises(ValidationError):
        DomainSpec(name="x", palette=pal, shape_count=(3, 1))
    with pytest.raises(ValidationError):
        DomainSpec(name="x", palette=pal, fog_alpha=1.5)
    with pytest.raises(ValidationError):
        DomainSpec(name="x", palette=pal, noise_sigma=-1.0)
