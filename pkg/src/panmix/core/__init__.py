from .types import (
    GROUND_TRUTH,
    IGNORE,
    PREDICTED,
    ClassCatalog,
    InstanceRecord,
    InstanceSet,
    PanopticLabel,
    ValidationError,
    check_image,
    check_label_map,
    check_logit_volume,
    check_panoptic,
    check_prob_volume,
    default_catalog,
    empty_instances,
    panoptic_from_semantic,
    relabel_instances,
    tight_box,
)
from .formats import (
    FormatError,
    decode_bank,
    decode_volume,
    encode_bank,
    encode_volume,
    instances_from_jsonl,
    instances_to_jsonl,
    read_bank,
    read_instances,
    read_volume,
    write_bank,
    write_instances,
    write_volume,
)
from .panoptic import (
    decode_panoptic,
    encode_panoptic,
    read_panoptic,
    read_semantic_png,
    sidecar_path,
    write_panoptic,
    write_semantic_png,
)
from .rle import decode_mask, encode_mask
from .rng import SeededRng, derive_seed

read_embedding_bank = decode_bank

__all__ = [
    "GROUND_TRUTH",
    "IGNORE",
    "PREDICTED",
    "ClassCatalog",
    "FormatError",
    "InstanceRecord",
    "InstanceSet",
    "PanopticLabel",
    "SeededRng",
    "ValidationError",
    "check_image",
    "check_label_map",
    "check_logit_volume",
    "check_panoptic",
    "check_prob_volume",
    "decode_bank",
    "decode_mask",
    "decode_panoptic",
    "decode_volume",
    "default_catalog",
    "derive_seed",
    "empty_instances",
    "encode_bank",
    "encode_mask",
    "encode_panoptic",
    "encode_volume",
    "instances_from_jsonl",
    "instances_to_jsonl",
    "panoptic_from_semantic",
    "read_bank",
    "read_embedding_bank",
    "read_instances",
    "read_panoptic",
    "read_semantic_png",
    "read_volume",
    "relabel_instances",
    "sidecar_path",
    "tight_box",
    "write_bank",
    "write_instances",
    "write_panoptic",
    "write_semantic_png",
    "write_volume",
]
