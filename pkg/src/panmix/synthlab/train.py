"""Mean-teacher self-training loop for the synthetic two-domain lab.

Every iteration draws one source and one target scene and accumulates
gradients on the student weights from up to four terms:

* supervised semantic cross-entropy on the source scene;
* supervised instance supervision on the source scene (optional);
* mixed semantic cross-entropy on a half-the-source-classes composition
  against the teacher's pseudo-labels (optional);
* instance supervision on an instance-mixed composition built from the
  teacher's confidence-filtered predictions (optional, enabled only for
  the tail of training).

After each student step the teacher weights follow by exponential moving
average. The loop is deterministic given the config: scenes, class
selections and noise all derive from the config seed, and the instance
path draws no randomness at all — so a run whose filter threshold keeps
zero instances is bit-identical to a run with the instance path disabled.

Divergence raises TrainingDiverged with the iteration number. Because the
features are bounded and the softmax is shift-stable, blowing up never
produces a non-finite loss directly; it shows up as weights escaping any
magnitude the clamped losses can still respond to, so the guard also trips
once a weight passes WEIGHT_LIMIT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..cda import class_mean_embeddings, similarity_map, synthetic_prompt_bank
from ..core.rng import SeededRng, derive_seed
from ..core.types import ClassCatalog, PanopticLabel, ValidationError
from ..fusion import FusionConfig, merge
from ..losses import cda_loss, mixed_semantic_ce, semantic_ce, softmax
from ..metrics import ApConfig, IouTally, PqStats, dataset_average_precision, panoptic_quality
from ..mixing import classmix_select, dacs_compose, imix_compose, TARGET_TO_SOURCE, SOURCE_TO_TARGET
from ..pseudo import FilterConfig, filter_instances, semantic_argmax
from .model import ToyModel, featurize, init_model, toy_instance_loss, weight_gradient
from .scenes import DomainSpec, default_source_spec, default_target_spec, generate_bank, toy_catalog

Scene = tuple[np.ndarray, PanopticLabel]

# Features lie in [0, 1], so logit magnitudes equal weight magnitudes, and
# log-probabilities clamp long before weights reach this scale; anything
# beyond it is runaway, not learning.
WEIGHT_LIMIT = 1e12


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Frozen hyper-parameters of a lab run; see resources/synth_default.cfg
    for the key-by-key documentation."""
    iterations: int = 1600
    epochs: int = 4
    image_size: int = 40
    source_scenes: int = 8
    target_scenes: int = 8
    eval_scenes: int = 6
    lr: float = 4.0
    alpha: float = 0.999
    tau: float = 0.75
    conf_threshold: float = 0.968
    imix_start_fraction: float = 0.8
    use_classmix: bool = True
    use_imix: bool = False
    imix_direction: str = TARGET_TO_SOURCE
    use_cda: bool = False
    cda_weight: float = 1.0
    use_source_instance: bool = True
    occlusion_eps: float = 0.01
    min_component_area: int = 3
    seed: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ValidationError("iterations must be non-negative")
        if self.epochs < 1:
            raise ValidationError("at least one epoch required")
        if not (0.0 <= self.imix_start_fraction <= 1.0):
            raise ValidationError("imix_start_fraction outside [0, 1]")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError("alpha outside [0, 1]")
        if not (0.0 <= self.tau <= 1.0):
            raise ValidationError("tau outside [0, 1]")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if self.imix_direction not in (TARGET_TO_SOURCE, SOURCE_TO_TARGET):
            raise ValidationError(f"unknown direction {self.imix_direction!r}")


@dataclass(frozen=True)
class TrainResult:
    model: ToyModel
    teacher: ToyModel
    trace: tuple[dict, ...]
    config: TrainConfig

    @property
    def final_metrics(self) -> dict:
        return self.trace[-1] if self.trace else {}


def ema_update(teacher: np.ndarray, student: np.ndarray, alpha: float) -> np.ndarray:
    """Smooth the teacher toward the student: alpha*teacher + (1-alpha)*student."""
    if teacher.shape != student.shape:
        raise ValidationError("teacher and student parameter shapes differ")
    if not (0.0 <= alpha <= 1.0):
        raise ValidationError(f"alpha {alpha} outside [0, 1]")
    return alpha * np.asarray(teacher, dtype=np.float64) \
        + (1.0 - alpha) * np.asarray(student, dtype=np.float64)


def evaluate(model: ToyModel, eval_bank: list[Scene], catalog: ClassCatalog,
             min_component_area: int = 3) -> dict:
    """mIoU / PQ means / mAP of a model over held-out scenes."""
    iou = IouTally(catalog.count)
    pq = PqStats()
    ap_pairs = []
    for image, label in eval_bank:
        probs = model.probs(featurize(image))
        sem_pred = model.predict_semantic(probs)
        iou.add(label.semantic, sem_pred)
        instances = model.predict_instances(probs, catalog, min_component_area)
        fused = merge(probs, instances, catalog, FusionConfig())
        pq = pq + panoptic_quality(label, fused, catalog)
        ap_pairs.append((label.instances, instances))
    _, miou = iou.result()
    msq, mrq, mpq = pq.means()
    _, mean_ap = dataset_average_precision(ap_pairs, catalog, ApConfig())
    return {"miou": miou, "msq": msq, "mrq": mrq, "mpq": mpq, "map": mean_ap}


def _epoch_boundaries(iterations: int, epochs: int) -> set[int]:
    return {iterations * (e + 1) // epochs for e in range(epochs)} - {0}


def train(config: TrainConfig,
          source_bank: list[Scene] | None = None,
          target_bank: list[Scene] | None = None,
          eval_bank: list[Scene] | None = None,
          source_spec: DomainSpec | None = None,
          target_spec: DomainSpec | None = None) -> TrainResult:
    """Run the self-training loop and return (student, teacher, trace).

    Scene banks not supplied are generated from the config seed and the
    default domain specs; the target labels are used for evaluation only.
    """
    catalog = toy_catalog()
    source_spec = source_spec or default_source_spec()
    target_spec = target_spec or default_target_spec()
    size = config.image_size
    if source_bank is None:
        source_bank = generate_bank(source_spec, catalog, config.source_scenes,
                                    derive_seed(config.seed, 101), size, size)
    if target_bank is None:
        target_bank = generate_bank(target_spec, catalog, config.target_scenes,
                                    derive_seed(config.seed, 202), size, size)
    if eval_bank is None:
        eval_bank = generate_bank(target_spec, catalog, config.eval_scenes,
                                  derive_seed(config.seed, 303), size, size)

    src_feats = [featurize(img) for img, _ in source_bank]
    tgt_feats = [featurize(img) for img, _ in target_bank]

    student = init_model(catalog.count).weights.copy()
    teacher = student.copy()
    rng = SeededRng(derive_seed(config.seed, 404))
    stuff_ids = catalog.stuff_ids
    anchors = None
    if config.use_cda:
        bank = synthetic_prompt_bank(catalog.count, prompts=4,
                                     dim=catalog.count, seed=7)
        anchors = class_mean_embeddings(bank, normalize=True)

    imix_start = math.ceil(config.imix_start_fraction * config.iterations)
    boundaries = _epoch_boundaries(config.iterations, config.epochs)
    trace: list[dict] = []

    for it in range(config.iterations):
        si = rng.below(len(source_bank))
        ti = rng.below(len(target_bank))
        src_img, src_label = source_bank[si]
        tgt_img, _ = target_bank[ti]
        sfeat = src_feats[si]

        grad_w = np.zeros_like(student)
        total = 0.0

        sprobs = softmax(sfeat @ student.T, axis=2)
        out = semantic_ce(sprobs, src_label.semantic)
        grad_w += weight_gradient(out.grad, sfeat)
        total += out.value

        if config.use_source_instance:
            out = toy_instance_loss(sprobs, src_label.instances, stuff_ids)
            grad_w += weight_gradient(out.grad, sfeat)
            total += out.value

        if config.use_cda:
            sigma = similarity_map(sfeat @ student.T, anchors,
                                   normalize_features=False)
            out = cda_loss(sigma, src_label.semantic)
            grad_w += config.cda_weight * weight_gradient(
                out.grad @ anchors.matrix, sfeat)
            total += config.cda_weight * out.value

        teacher_probs = softmax(tgt_feats[ti] @ teacher.T, axis=2)
        pseudo = semantic_argmax(teacher_probs, config.conf_threshold)

        if config.use_classmix:
            m = classmix_select(src_label.semantic, rng)
            mixed = dacs_compose(src_img, src_label.semantic, tgt_img,
                                 pseudo.labels, pseudo.k, m)
            mfeat = featurize(mixed.image)
            mprobs = softmax(mfeat @ student.T, axis=2)
            out = mixed_semantic_ce(mprobs, mixed)
            grad_w += weight_gradient(out.grad, mfeat)
            total += out.value

        if config.use_imix and it >= imix_start:
            predicted = ToyModel(teacher).predict_instances(
                teacher_probs, catalog, config.min_component_area)
            kept, _ = filter_instances(predicted, FilterConfig(config.tau))
            if len(kept):
                mixed = imix_compose(tgt_img, kept, src_img, src_label,
                                     direction=config.imix_direction,
                                     occlusion_eps=config.occlusion_eps)
                ifeat = featurize(mixed.image)
                iprobs = softmax(ifeat @ student.T, axis=2)
                out = toy_instance_loss(iprobs, mixed.instance_supervision,
                                        stuff_ids)
                grad_w += weight_gradient(out.grad, ifeat)
                total += out.value

        if not np.isfinite(total):
            raise TrainingDiverged(f"iteration {it}: non-finite loss {total}")
        student = student - config.lr * grad_w
        if not np.isfinite(student).all():
            raise TrainingDiverged(f"iteration {it}: non-finite weights")
        if np.abs(student).max() > WEIGHT_LIMIT:
            raise TrainingDiverged(
                f"iteration {it}: weight magnitude passed {WEIGHT_LIMIT:g}")
        teacher = ema_update(teacher, student, config.alpha)

        if (it + 1) in boundaries:
            entry = {"iteration": it + 1, "loss": float(total)}
            entry.update(evaluate(ToyModel(student), eval_bank, catalog,
                                  config.min_component_area))
            trace.append(entry)

    return TrainResult(model=ToyModel(student), teacher=ToyModel(teacher),
                       trace=tuple(trace), config=config)


_CONFIG_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def config_from_mapping(overrides: dict, base: TrainConfig | None = None) -> TrainConfig:
    base = base or TrainConfig()
    unknown = set(overrides) - set(_CONFIG_TYPES)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return replace(base, **overrides)


def _parse_value(name: str, raw: str):
    kind = _CONFIG_TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ValidationError(f"key {name}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config(path: str | Path, base: TrainConfig | None = None) -> TrainConfig:
    """Read a flat key = value file (# starts a comment) into a TrainConfig."""
    overrides = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        overrides[key] = _parse_value(key, raw)
    return config_from_mapping(overrides, base)
