"""Patch-level compression baselines sharing the object-merge output type.

These are deliberately simplified single-shot comparators (no layer-wise
schedules, no token recycling): attention top-k dropping, fixed-ratio grid
pooling, and CLS-similarity clustering. Together with the retention-error
metric they form the desk-scale token-budget-vs-fidelity harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, MissingPrior, ShapeError
from .mask_pipeline import GridPromptConfig, MaskSet, run_pipeline
from .object_merge import (
    CompressedTokenSet,
    FeatureGrid,
    Origin,
    TokenMeta,
    mask_patch_weights,
    merge_fast,
)

DROPPED = -1  # assignment sink for patches no token represents

STRATEGY_NAMES = ("object_merge", "topk_drop", "grid_pool", "cls_merge")


def _patch_origin(fg: FeatureGrid) -> Origin:
    # patch-level strategies have no pixel context; image dims default to grid dims
    return Origin(fg.grid_height, fg.grid_width, fg.grid_height, fg.grid_width)


def topk_drop(fg: FeatureGrid, budget: int) -> CompressedTokenSet:
    """Keep the `budget` highest-attention patches unchanged, ascending-index ties."""
    if fg.attention_scores is None:
        raise MissingPrior("topk_drop needs attention_scores on the feature grid")
    n = fg.num_patches
    if not 1 <= budget <= n:
        raise InvalidArgument(f"budget must be in [1, {n}], got {budget}")
    scores = np.asarray(fg.attention_scores, dtype=np.float64)
    # sort by (-score, index): stable ascending-index tie-break, then canonical order
    order = np.lexsort((np.arange(n), -scores))[:budget]
    kept = np.sort(order)
    flat = fg.values.reshape(n, fg.dim)
    meta = tuple(TokenMeta(int(i), 1, members=(int(i),)) for i in kept)
    return CompressedTokenSet(flat[kept].copy(), meta, _patch_origin(fg))


def grid_pool(fg: FeatureGrid, out_h: int, out_w: int) -> CompressedTokenSet:
    """Non-overlapping block averages; token count is out_h*out_w regardless of content."""
    hp, wp = fg.grid_height, fg.grid_width
    if out_h < 1 or out_w < 1:
        raise InvalidArgument(f"output dims must be positive, got {out_h}x{out_w}")
    if hp % out_h or wp % out_w:
        raise InvalidArgument(f"output dims {out_h}x{out_w} must divide grid dims {hp}x{wp}")
    bh, bw = hp // out_h, wp // out_w
    blocks = fg.values.reshape(out_h, bh, out_w, bw, fg.dim).astype(np.float64)
    tokens = blocks.mean(axis=(1, 3)).reshape(out_h * out_w, fg.dim)
    meta = []
    for by in range(out_h):
        for bx in range(out_w):
            members = tuple(
                int((by * bh + y) * wp + (bx * bw + x)) for y in range(bh) for x in range(bw)
            )
            meta.append(TokenMeta(by * out_w + bx, bh * bw, members=members))
    return CompressedTokenSet(tokens, tuple(meta), _patch_origin(fg))


def cls_merge(fg: FeatureGrid, budget: int) -> CompressedTokenSet:
    """Seed `budget` centers from the most CLS-similar patches, then mean each cluster."""
    if fg.cls_vector is None:
        raise MissingPrior("cls_merge needs a cls_vector on the feature grid")
    n = fg.num_patches
    if not 1 <= budget <= n:
        raise InvalidArgument(f"budget must be in [1, {n}], got {budget}")
    flat = fg.values.reshape(n, fg.dim).astype(np.float64)
    cls_vec = np.asarray(fg.cls_vector, dtype=np.float64)
    norms = np.linalg.norm(flat, axis=1) * np.linalg.norm(cls_vec)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, flat @ cls_vec / np.where(norms > 0, norms, 1.0), 0.0)
    seeds = np.lexsort((np.arange(n), -sims))[:budget]
    centers = flat[seeds]
    # nearest center by Euclidean distance; argmin takes the lowest center index on ties
    d2 = ((flat[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    tokens = np.empty((budget, fg.dim), dtype=np.float64)
    meta = []
    for c in range(budget):
        members = np.flatnonzero(assign == c)
        if members.size:
            tokens[c] = flat[members].mean(axis=0)
        else:
            tokens[c] = centers[c]  # empty cluster collapses to its seed patch
        meta.append(
            TokenMeta(int(seeds[c]), int(members.size), members=tuple(int(m) for m in members))
        )
    return CompressedTokenSet(tokens, tuple(meta), _patch_origin(fg))


def patch_assignment(cts: CompressedTokenSet, num_patches: int) -> np.ndarray:
    """Rebuild the patch -> token map from per-token member lists (DROPPED where absent)."""
    assign = np.full(num_patches, DROPPED, dtype=np.int64)
    for t, m in enumerate(cts.meta):
        if m.members is None:
            raise InvalidArgument(f"token {t} has no member list; cannot derive assignment")
        assign[list(m.members)] = t
    return assign


def object_assignment(fg: FeatureGrid, ms: MaskSet, cts: CompressedTokenSet) -> np.ndarray:
    """Patch -> token map for object merging: dominant pixel weight wins, earlier token on ties.

    Patches covered by no mask map to the residual token when one was emitted,
    else to DROPPED.
    """
    weights = mask_patch_weights(ms, fg.grid_height, fg.grid_width)
    assign = np.full(fg.num_patches, DROPPED, dtype=np.int64)
    covered = weights.sum(axis=0) > 0
    if len(ms.masks):
        assign[covered] = weights[:, covered].argmax(axis=0)
    if cts.residual_included:
        assign[~covered] = cts.count - 1
    return assign


def retention_error(
    fg: FeatureGrid,
    cts: CompressedTokenSet,
    assignment: np.ndarray,
    dropped_target: str = "zero",
) -> float:
    """Mean squared error per (patch, channel) between features and their tokens.

    Dropped patches compare against the zero vector by default, or the global
    patch mean with dropped_target="mean".
    """
    n = fg.num_patches
    assignment = np.asarray(assignment)
    if assignment.shape != (n,):
        raise ShapeError(f"assignment must have shape ({n},), got {assignment.shape}")
    if dropped_target not in ("zero", "mean"):
        raise InvalidArgument(f"dropped_target must be 'zero' or 'mean', got {dropped_target!r}")
    flat = fg.values.reshape(n, fg.dim).astype(np.float64)
    sink = np.zeros(fg.dim) if dropped_target == "zero" else flat.mean(axis=0)
    targets = np.where(
        (assignment == DROPPED)[:, None],
        sink[None, :],
        np.asarray(cts.tokens, dtype=np.float64)[np.where(assignment == DROPPED, 0, assignment)],
    )
    return float(((flat - targets) ** 2).mean())


def grid_pool_dims_for_budget(grid_h: int, grid_w: int, budget: int) -> tuple[int, int]:
    """Largest achievable pooled shape with out_h*out_w <= budget and divisible dims.

    Ties prefer the most square shape, then the smaller out_h. Always solvable:
    1x1 pools to a single token.
    """
    if budget < 1:
        raise InvalidArgument(f"budget must be >= 1, got {budget}")
    best = None
    for dh in range(1, grid_h + 1):
        if grid_h % dh:
            continue
        for dw in range(1, grid_w + 1):
            if grid_w % dw or dh * dw > budget:
                continue
            key = (dh * dw, -abs(dh - dw), -dh)
            if best is None or key > best[0]:
                best = (key, (dh, dw))
    assert best is not None
    return best[1]


@dataclass(frozen=True)
class CompareRow:
    strategy: str
    tokens: int
    retention_error: float
    ratio: float


def compare_rows(
    fg: FeatureGrid,
    candidates: MaskSet,
    cfg: GridPromptConfig,
    budgets: Sequence[int],
    warn: Callable[[str], None] | None = None,
) -> list[CompareRow]:
    """Run every strategy on one fixture and report (tokens, retention error, ratio) rows.

    The object-merge row is budget-free (its token count is the surviving mask
    count); each baseline runs once per requested budget. Budgets beyond the
    patch count are clamped; strategies missing their prior are skipped. Both
    conditions emit a warning instead of failing the harness.
    """

    def note(msg: str) -> None:
        if warn is not None:
            warn(msg)

    n = fg.num_patches
    rows: list[CompareRow] = []

    ms = run_pipeline(candidates, cfg)
    if len(ms):
        cts = merge_fast(fg, ms)
        err = retention_error(fg, cts, object_assignment(fg, ms, cts))
        rows.append(CompareRow("object_merge", cts.count, err, cts.count / n))
    else:
        note("object_merge: no masks survived the pipeline; row skipped")

    for requested in budgets:
        budget = min(requested, n)
        if budget != requested:
            note(f"budget {requested} exceeds patch count {n}; clamped to {n}")
        if fg.attention_scores is not None:
            cts = topk_drop(fg, budget)
            err = retention_error(fg, cts, patch_assignment(cts, n))
            rows.append(CompareRow("topk_drop", cts.count, err, cts.count / n))
        else:
            note(f"topk_drop: attention_scores missing; budget {budget} row skipped")
        out_h, out_w = grid_pool_dims_for_budget(fg.grid_height, fg.grid_width, budget)
        cts = grid_pool(fg, out_h, out_w)
        err = retention_error(fg, cts, patch_assignment(cts, n))
        rows.append(CompareRow("grid_pool", cts.count, err, cts.count / n))
        if fg.cls_vector is not None:
            cts = cls_merge(fg, budget)
            err = retention_error(fg, cts, patch_assignment(cts, n))
            rows.append(CompareRow("cls_merge", cts.count, err, cts.count / n))
        else:
            note(f"cls_merge: cls_vector missing; budget {budget} row skipped")
    return rows
