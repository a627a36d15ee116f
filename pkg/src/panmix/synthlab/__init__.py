from .scenes import (
    DomainSpec,
    PackingError,
    default_source_spec,
    default_target_spec,
    generate_bank,
    generate_scene,
    hard_target_spec,
    toy_catalog,
)
from .model import ToyModel, featurize, toy_instance_loss
from .train import (
    TrainConfig,
    TrainResult,
    TrainingDiverged,
    config_from_mapping,
    ema_update,
    evaluate,
    load_config,
    train,
)
from .ablate import default_grid, render_report, run_ablation

__all__ = [
    "DomainSpec",
    "PackingError",
    "ToyModel",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "config_from_mapping",
    "default_grid",
    "default_source_spec",
    "default_target_spec",
    "ema_update",
    "evaluate",
    "featurize",
    "generate_bank",
    "generate_scene",
    "hard_target_spec",
    "load_config",
    "render_report",
    "run_ablation",
    "toy_catalog",
    "toy_instance_loss",
    "train",
]
