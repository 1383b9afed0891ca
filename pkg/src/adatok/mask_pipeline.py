"""Candidate-mask filtering: grid-prompt selection, confidence threshold, IoU dedup.

The pipeline is segmenter-agnostic: it consumes a precomputed pool of candidate
masks (from any promptable segmenter) and produces the deterministic MaskSet
that drives token merging. The surviving mask count is what makes the
compression ratio adaptive; nothing in this module expresses a token budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ShapeError
from .tensor_io import TensorFile


@dataclass(frozen=True)
class ObjectMask:
    """One binary object mask with its segmenter confidence."""

    bitmap: np.ndarray  # (H, W) bool
    confidence: float
    source_index: int

    def __post_init__(self):
        object.__setattr__(self, "bitmap", np.asarray(self.bitmap).astype(bool))
        if self.bitmap.ndim != 2:
            raise ShapeError(f"mask bitmap must be 2-D, got shape {self.bitmap.shape}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidArgument(f"confidence {self.confidence} outside [0, 1]")

    @property
    def area(self) -> int:
        return int(self.bitmap.sum())


@dataclass(frozen=True)
class MaskSet:
    """An ordered list of masks over one image."""

    image_height: int
    image_width: int
    masks: tuple[ObjectMask, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        for m in self.masks:
            if m.bitmap.shape != (self.image_height, self.image_width):
                raise ShapeError(
                    f"mask {m.source_index} shape {m.bitmap.shape} does not match "
                    f"image ({self.image_height}, {self.image_width})"
                )

    def __len__(self) -> int:
        return len(self.masks)

    def canonical(self) -> "MaskSet":
        """Deterministic order: descending area, ties by ascending source_index."""
        ordered = sorted(self.masks, key=lambda m: (-m.area, m.source_index))
        return MaskSet(self.image_height, self.image_width, tuple(ordered))


@dataclass(frozen=True)
class GridPromptConfig:
    points_per_side: int = 32
    sigma: float = 0.8
    iou_dedup_threshold: float = 0.9

    def __post_init__(self):
        if self.points_per_side < 1:
            raise InvalidArgument(f"points_per_side must be >= 1, got {self.points_per_side}")
        if not 0.0 <= self.sigma <= 1.0:
            raise InvalidArgument(f"sigma {self.sigma} outside [0, 1]")
        if not 0.0 <= self.iou_dedup_threshold <= 1.0:
            raise InvalidArgument(f"iou threshold {self.iou_dedup_threshold} outside [0, 1]")


def mask_set_from_tensor(mask_tensor: TensorFile, scores: dict[int, float]) -> MaskSet:
    """Build a canonical MaskSet from a (num_masks, H, W) u8 tensor plus sidecar scores."""
    arr = mask_tensor.values
    if arr.ndim != 3:
        raise ShapeError(f"mask tensor must be rank 3 (num_masks, H, W), got rank {arr.ndim}")
    n, h, w = arr.shape
    masks = [
        ObjectMask(bitmap=arr[i] != 0, confidence=scores[i], source_index=i) for i in range(n)
    ]
    return MaskSet(h, w, tuple(masks)).canonical()


def grid_points(p: int, h: int, w: int) -> list[tuple[int, int]]:
    """The p*p prompt grid: (x, y) pixel coordinates, row-major over the grid."""
    if p < 1 or h < 1 or w < 1:
        raise InvalidArgument(f"p, h, w must all be >= 1, got p={p}, h={h}, w={w}")
    points = []
    for i in range(p):
        # floor((i + 0.5) * h / p) in exact integer arithmetic
        y = (2 * i + 1) * h // (2 * p)
        for j in range(p):
            x = (2 * j + 1) * w // (2 * p)
            points.append((x, y))
    return points


def select_by_grid(candidates: MaskSet, cfg: GridPromptConfig) -> MaskSet:
    """Keep a candidate iff at least one grid prompt point falls inside its bitmap."""
    pts = grid_points(cfg.points_per_side, candidates.image_height, candidates.image_width)
    xs = np.array([x for x, _ in pts])
    ys = np.array([y for _, y in pts])
    kept = tuple(m for m in candidates.masks if m.bitmap[ys, xs].any())
    return MaskSet(candidates.image_height, candidates.image_width, kept).canonical()


def filter_confidence(ms: MaskSet, sigma: float) -> MaskSet:
    """Retain masks with confidence >= sigma (equality survives)."""
    if not 0.0 <= sigma <= 1.0:
        raise InvalidArgument(f"sigma {sigma} outside [0, 1]")
    kept = tuple(m for m in ms.masks if m.confidence >= sigma)
    return MaskSet(ms.image_height, ms.image_width, kept).canonical()


def iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter) / float(union) if union else 0.0


def dedup_by_iou(ms: MaskSet, threshold: float) -> MaskSet:
    """Greedy pass in MaskSet order; drop a mask whose IoU with any kept mask exceeds threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidArgument(f"iou threshold {threshold} outside [0, 1]")
    kept: list[ObjectMask] = []
    for m in ms.masks:
        if all(iou(m.bitmap, k.bitmap) <= threshold for k in kept):
            kept.append(m)
    return MaskSet(ms.image_height, ms.image_width, tuple(kept))


def run_pipeline(candidates: MaskSet, cfg: GridPromptConfig) -> MaskSet:
    """select_by_grid -> filter_confidence -> dedup_by_iou, dropping empty masks up front."""
    nonempty = MaskSet(
        candidates.image_height,
        candidates.image_width,
        tuple(m for m in candidates.masks if m.area >= 1),
    ).canonical()
    selected = select_by_grid(nonempty, cfg)
    confident = filter_confidence(selected, cfg.sigma)
    return dedup_by_iou(confident, cfg.iou_dedup_threshold)
