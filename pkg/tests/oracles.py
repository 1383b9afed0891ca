"""Independent oracle implementations and random-instance generators.

The oracles here deliberately avoid the library's vectorized code paths:
merging is recomputed with explicit per-pixel loops, bilinear sampling with
scalar arithmetic. Tests compare library output against these.
"""

from __future__ import annotations

import numpy as np

from adatok.mask_pipeline import MaskSet, ObjectMask
from adatok.object_merge import FeatureGrid


def scalar_bilinear(values: np.ndarray, h: int, w: int) -> np.ndarray:
    """Align-corners-false bilinear upsampling, one output pixel at a time."""
    hp, wp, d = values.shape
    out = np.zeros((h, w, d), dtype=np.float64)
    for y in range(h):
        sy = min(max((y + 0.5) * hp / h - 0.5, 0.0), hp - 1.0)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, hp - 1)
        fy = sy - y0
        for x in range(w):
            sx = min(max((x + 0.5) * wp / w - 0.5, 0.0), wp - 1.0)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, wp - 1)
            fx = sx - x0
            for c in range(d):
                top = values[y0, x0, c] * (1 - fx) + values[y0, x1, c] * fx
                bot = values[y1, x0, c] * (1 - fx) + values[y1, x1, c] * fx
                out[y, x, c] = top * (1 - fy) + bot * fy
    return out


def brute_force_merge(
    fg: FeatureGrid,
    ms: MaskSet,
    mode: str = "nearest",
    residual_token: bool = False,
) -> np.ndarray:
    """Masked averaging via explicit pixel loops over the upsampled field."""
    h, w = ms.image_height, ms.image_width
    hp, wp, d = fg.values.shape
    if mode == "nearest":
        field = np.zeros((h, w, d), dtype=np.float64)
        for y in range(h):
            for x in range(w):
                field[y, x] = fg.values[(y * hp) // h, (x * wp) // w]
    else:
        field = scalar_bilinear(fg.values, h, w)
    bitmaps = [m.bitmap for m in ms.masks]
    if residual_token:
        uncovered = np.ones((h, w), dtype=bool)
        for b in bitmaps:
            uncovered &= ~b
        if uncovered.any():
            bitmaps = bitmaps + [uncovered]
    tokens = np.zeros((len(bitmaps), d), dtype=np.float64)
    for i, bitmap in enumerate(bitmaps):
        acc = np.zeros(d, dtype=np.float64)
        count = 0
        for y in range(h):
            for x in range(w):
                if bitmap[y, x]:
                    acc += field[y, x]
                    count += 1
        tokens[i] = acc / count
    return tokens


def random_instance(rng: np.random.Generator, max_masks: int = 10):
    """One random (FeatureGrid, MaskSet): grid <= 8x8, image <= 64x64, d <= 16."""
    hp = int(rng.integers(1, 9))
    wp = int(rng.integers(1, 9))
    d = int(rng.integers(1, 17))
    h = int(rng.integers(hp, 65))
    w = int(rng.integers(wp, 65))
    values = rng.standard_normal((hp, wp, d)).astype(np.float32)
    fg = FeatureGrid(values=values)
    k = int(rng.integers(1, max_masks + 1))
    masks = []
    for i in range(k):
        density = rng.uniform(0.05, 0.6)
        bitmap = rng.random((h, w)) < density
        if not bitmap.any():
            bitmap[rng.integers(0, h), rng.integers(0, w)] = True
        masks.append(ObjectMask(bitmap=bitmap, confidence=float(rng.uniform(0, 1)), source_index=i))
    return fg, MaskSet(h, w, tuple(masks))


def rel_max_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| scaled by the magnitude of the pair."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 and b.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float((np.abs(a - b) / scale).max())
