"""Object-level token merging: align patch features to pixels, average per mask.

`merge` materializes the pixel-resolution feature field and averages it under
each mask. `merge_fast` is an exact algebraic rewrite for nearest-neighbor
upsampling: each token is a patch-weighted mean, where a patch's weight is the
number of mask pixels that map to it. The two agree to float associativity.

Token count equals surviving mask count (plus one optional residual token for
uncovered pixels); no token budget exists anywhere in this path.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMaskError, InvalidArgument, ShapeError, UnsupportedMode
from .mask_pipeline import MaskSet
from .tensor_io import TensorFile, read_tensor

UPSAMPLE_MODES = ("nearest", "bilinear")


@dataclass(frozen=True)
class FeatureGrid:
    """Patch-grid visual features, optionally with baseline priors attached."""

    values: np.ndarray  # (grid_height, grid_width, dim)
    cls_vector: np.ndarray | None = None  # (dim,)
    attention_scores: np.ndarray | None = None  # (grid_height * grid_width,)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ShapeError(f"feature grid must be (H_p, W_p, d), got shape {v.shape}")
        object.__setattr__(self, "values", v)
        if self.cls_vector is not None:
            c = np.asarray(self.cls_vector).reshape(-1)
            if c.shape[0] != v.shape[2]:
                raise ShapeError(f"cls_vector dim {c.shape[0]} != feature dim {v.shape[2]}")
            object.__setattr__(self, "cls_vector", c)
        if self.attention_scores is not None:
            a = np.asarray(self.attention_scores).reshape(-1)
            if a.shape[0] != v.shape[0] * v.shape[1]:
                raise ShapeError(
                    f"attention_scores length {a.shape[0]} != patch count {v.shape[0] * v.shape[1]}"
                )
            object.__setattr__(self, "attention_scores", a)

    @property
    def grid_height(self) -> int:
        return self.values.shape[0]

    @property
    def grid_width(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def num_patches(self) -> int:
        return self.grid_height * self.grid_width


@dataclass(frozen=True)
class Origin:
    image_height: int
    image_width: int
    grid_height: int
    grid_width: int


@dataclass(frozen=True)
class TokenMeta:
    """Provenance for one token: source mask index, pixel area, optional patch members."""

    mask_source_index: int  # -1 for the residual token
    mask_area_pixels: int
    members: tuple[int, ...] | None = None  # patch indices, filled by patch-level strategies


@dataclass(frozen=True)
class CompressedTokenSet:
    tokens: np.ndarray  # (k, dim)
    meta: tuple[TokenMeta, ...]
    origin: Origin
    residual_included: bool = False

    def __post_init__(self):
        t = np.asarray(self.tokens)
        if t.ndim != 2:
            raise ShapeError(f"tokens must be (k, d), got shape {t.shape}")
        if len(self.meta) != t.shape[0]:
            raise ShapeError(f"{len(self.meta)} meta records for {t.shape[0]} tokens")
        object.__setattr__(self, "tokens", t)
        object.__setattr__(self, "meta", tuple(self.meta))

    @property
    def count(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])


def load_feature_grid(features_path, cls_path=None, attn_path=None) -> FeatureGrid:
    """Assemble a FeatureGrid from ATSR files (features rank 3; priors rank 2)."""
    feats = read_tensor(features_path)
    if feats.values.ndim != 3:
        raise ShapeError(f"{features_path}: feature tensor must be rank 3")
    cls_vec = read_tensor(cls_path).working().reshape(-1) if cls_path else None
    attn = read_tensor(attn_path).working().reshape(-1) if attn_path else None
    return FeatureGrid(values=feats.working(), cls_vector=cls_vec, attention_scores=attn)


def upsample_features(fg: FeatureGrid, h: int, w: int, mode: str = "nearest") -> np.ndarray:
    """Spatially align the patch grid to (h, w) pixels; returns an (h, w, d) field."""
    if mode not in UPSAMPLE_MODES:
        raise UnsupportedMode(f"upsample mode {mode!r} not in {UPSAMPLE_MODES}")
    hp, wp = fg.grid_height, fg.grid_width
    if h < hp or w < wp:
        raise InvalidArgument(f"cannot upsample {hp}x{wp} grid down to {h}x{w}")
    if mode == "nearest":
        rows = (np.arange(h) * hp) // h
        cols = (np.arange(w) * wp) // w
        return fg.values[rows][:, cols]
    # bilinear, align-corners-false: sample at (dst + 0.5) * scale - 0.5, clamped
    src_y = np.clip((np.arange(h) + 0.5) * (hp / h) - 0.5, 0.0, hp - 1.0)
    src_x = np.clip((np.arange(w) + 0.5) * (wp / w) - 0.5, 0.0, wp - 1.0)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, hp - 1)
    x1 = np.minimum(x0 + 1, wp - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]
    v = fg.values
    top = v[y0][:, x0] * (1 - wx) + v[y0][:, x1] * wx
    bot = v[y1][:, x0] * (1 - wx) + v[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _thread_count() -> int:
    raw = os.environ.get("ADATOK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    """Apply fn preserving order; parallel across ADATOK_THREADS when > 1."""
    workers = _thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _validate_merge_inputs(fg: FeatureGrid, ms: MaskSet) -> None:
    for m in ms.masks:
        if m.bitmap.shape != (ms.image_height, ms.image_width):
            raise ShapeError(
                f"mask {m.source_index} shape {m.bitmap.shape} does not match image "
                f"({ms.image_height}, {ms.image_width})"
            )
        if m.area == 0:
            raise EmptyMaskError(f"mask {m.source_index} has zero area")


def _uncovered(ms: MaskSet) -> np.ndarray:
    covered = np.zeros((ms.image_height, ms.image_width), dtype=bool)
    for m in ms.masks:
        covered |= m.bitmap
    return ~covered


def merge(
    fg: FeatureGrid,
    ms: MaskSet,
    mode: str = "nearest",
    residual_token: bool = False,
) -> CompressedTokenSet:
    """Masked average merging over the upsampled feature field.

    Token i is the arithmetic mean of the pixel-aligned features over mask i;
    accumulation is widened to float64 so wide grids stay within 1e-6 of the
    fast path.
    """
    _validate_merge_inputs(fg, ms)
    field_hw = upsample_features(fg, ms.image_height, ms.image_width, mode)

    def token_for(bitmap: np.ndarray) -> np.ndarray:
        return field_hw[bitmap].mean(axis=0, dtype=np.float64)

    bitmaps = [m.bitmap for m in ms.masks]
    meta = [TokenMeta(m.source_index, m.area) for m in ms.masks]
    residual_included = False
    if residual_token:
        uncovered = _uncovered(ms)
        n_uncovered = int(uncovered.sum())
        if n_uncovered > 0:
            bitmaps.append(uncovered)
            meta.append(TokenMeta(-1, n_uncovered))
            residual_included = True
    tokens = _ordered_map(token_for, bitmaps)
    stacked = np.stack(tokens) if tokens else np.zeros((0, fg.dim), dtype=np.float64)
    origin = Origin(ms.image_height, ms.image_width, fg.grid_height, fg.grid_width)
    return CompressedTokenSet(stacked, tuple(meta), origin, residual_included)


def pixel_patch_index(grid_h: int, grid_w: int, h: int, w: int) -> np.ndarray:
    """(h, w) int array: flat patch index each pixel maps to under nearest upsampling."""
    rows = (np.arange(h) * grid_h) // h
    cols = (np.arange(w) * grid_w) // w
    return (rows[:, None] * grid_w + cols[None, :]).astype(np.int64)


def mask_patch_weights(ms: MaskSet, grid_h: int, grid_w: int) -> np.ndarray:
    """(k, grid_h*grid_w) array: per mask, how many of its pixels land on each patch."""
    idx = pixel_patch_index(grid_h, grid_w, ms.image_height, ms.image_width)
    out = np.zeros((len(ms.masks), grid_h * grid_w), dtype=np.int64)
    for i, m in enumerate(ms.masks):
        out[i] = np.bincount(idx[m.bitmap], minlength=grid_h * grid_w)
    return out


def merge_fast(
    fg: FeatureGrid,
    ms: MaskSet,
    mode: str = "nearest",
    residual_token: bool = False,
) -> CompressedTokenSet:
    """Weighted-patch-mean rewrite of merge; never materializes the h*w*d field."""
    if mode != "nearest":
        raise UnsupportedMode("merge_fast supports nearest upsampling only")
    _validate_merge_inputs(fg, ms)
    hp, wp = fg.grid_height, fg.grid_width
    idx = pixel_patch_index(hp, wp, ms.image_height, ms.image_width)
    flat = fg.values.reshape(hp * wp, fg.dim).astype(np.float64)

    def token_for(bitmap: np.ndarray) -> np.ndarray:
        weights = np.bincount(idx[bitmap], minlength=hp * wp).astype(np.float64)
        return (weights @ flat) / weights.sum()

    bitmaps = [m.bitmap for m in ms.masks]
    meta = [TokenMeta(m.source_index, m.area) for m in ms.masks]
    residual_included = False
    if residual_token:
        uncovered = _uncovered(ms)
        n_uncovered = int(uncovered.sum())
        if n_uncovered > 0:
            bitmaps.append(uncovered)
            meta.append(TokenMeta(-1, n_uncovered))
            residual_included = True
    tokens = _ordered_map(token_for, bitmaps)
    stacked = np.stack(tokens) if tokens else np.zeros((0, fg.dim), dtype=np.float64)
    origin = Origin(ms.image_height, ms.image_width, hp, wp)
    return CompressedTokenSet(stacked, tuple(meta), origin, residual_included)


def compression_ratio(cts: CompressedTokenSet) -> float:
    """Realized ratio r = token count / pre-compression patch count."""
    return cts.count / (cts.origin.grid_height * cts.origin.grid_width)
