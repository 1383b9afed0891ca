"""adatok: object-level adaptive visual-token compression toolkit."""

from .baselines import cls_merge, grid_pool, retention_error, topk_drop
from .cost_model import (
    CostReport,
    DecoderConfig,
    bandwidth_table,
    compute_cost,
    image_bytes,
    reduction_factor,
    token_bytes,
    verify_benefit_identity,
)
from .mask_pipeline import (
    GridPromptConfig,
    MaskSet,
    ObjectMask,
    dedup_by_iou,
    filter_confidence,
    grid_points,
    run_pipeline,
    select_by_grid,
)
from .object_merge import (
    CompressedTokenSet,
    FeatureGrid,
    compression_ratio,
    merge,
    merge_fast,
    upsample_features,
)
from .tensor_io import TensorFile, read_sidecar, read_tensor, write_sidecar, write_tensor
from .token_wire import TokenServer, pack, send, unpack

__all__ = [
    "CompressedTokenSet",
    "CostReport",
    "DecoderConfig",
    "FeatureGrid",
    "GridPromptConfig",
    "MaskSet",
    "ObjectMask",
    "TensorFile",
    "TokenServer",
    "bandwidth_table",
    "cls_merge",
    "compression_ratio",
    "compute_cost",
    "dedup_by_iou",
    "filter_confidence",
    "grid_points",
    "grid_pool",
    "image_bytes",
    "merge",
    "merge_fast",
    "pack",
    "read_sidecar",
    "read_tensor",
    "reduction_factor",
    "retention_error",
    "run_pipeline",
    "select_by_grid",
    "send",
    "token_bytes",
    "topk_drop",
    "unpack",
    "upsample_features",
    "verify_benefit_identity",
    "write_sidecar",
    "write_tensor",
]
