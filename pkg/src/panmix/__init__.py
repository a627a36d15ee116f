"""panmix: deterministic cross-domain mixing, pseudo-labeling, panoptic
fusion and evaluation, plus a synthetic two-domain self-training lab."""

__version__ = "0.1.0"

from .core import (
    GROUND_TRUTH,
    IGNORE,
    PREDICTED,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    SeededRng,
    ValidationError,
    default_catalog,
)

__all__ = [
    "GROUND_TRUTH",
    "IGNORE",
    "PREDICTED",
    "ClassCatalog",
    "InstanceRecord",
    "InstanceSet",
    "PanopticLabel",
    "SeededRng",
    "ValidationError",
    "default_catalog",
    "__version__",
]
