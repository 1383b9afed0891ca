"""Deterministic synthetic fixtures: feature grids, candidate masks, sidecars.

Two families:

* ``bundled`` — a 24x24x8 grid over a 96x96 image with five disjoint
  rectangular masks, all confidences exactly 0.9. The smoke fixture for the
  merge command (k=5, r=5/576 at defaults).
* ``piecewise_NN`` — features constant inside each of NN seeded Voronoi cells
  of a 12x12 patch grid, masks aligned to patch blocks at image scale. Object
  merging reconstructs these exactly; budgeted baselines cannot, which is what
  the compare harness and the adaptivity checks exercise.

Everything is seeded; regenerating a fixture set yields byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mask_pipeline import MaskSet, ObjectMask, mask_set_from_tensor
from .object_merge import FeatureGrid, load_feature_grid
from .tensor_io import TensorFile, read_sidecar, read_tensor, validate_sidecar, write_sidecar, write_tensor

PIECEWISE_OBJECT_COUNTS = (1, 3, 5, 12)

_BUNDLED_SEED = 93101
_PIECEWISE_SEED = 48203

# (top, left, bottom, right) pixel rectangles on the 96x96 bundled image; disjoint,
# distinct areas, and each larger than the p=32 prompt spacing so all five survive
_BUNDLED_RECTS = (
    (4, 4, 28, 28),
    (8, 40, 24, 88),
    (48, 8, 92, 32),
    (48, 48, 72, 72),
    (60, 76, 88, 92),
)


def bundled_fixture() -> tuple[FeatureGrid, MaskSet]:
    rng = np.random.default_rng(_BUNDLED_SEED)
    values = rng.standard_normal((24, 24, 8)).astype(np.float32)
    cls_vec = rng.standard_normal(8).astype(np.float32)
    attn = rng.uniform(0.0, 1.0, 24 * 24).astype(np.float32)
    fg = FeatureGrid(values=values, cls_vector=cls_vec, attention_scores=attn)
    masks = []
    for i, (top, left, bottom, right) in enumerate(_BUNDLED_RECTS):
        bitmap = np.zeros((96, 96), dtype=bool)
        bitmap[top:bottom, left:right] = True
        masks.append(ObjectMask(bitmap=bitmap, confidence=0.9, source_index=i))
    return fg, MaskSet(96, 96, tuple(masks)).canonical()


def piecewise_fixture(
    num_objects: int,
    grid_h: int = 12,
    grid_w: int = 12,
    scale: int = 4,
    dim: int = 8,
) -> tuple[FeatureGrid, MaskSet]:
    """Voronoi-cell piecewise-constant features with patch-aligned pixel masks."""
    rng = np.random.default_rng(_PIECEWISE_SEED + num_objects)
    n = grid_h * grid_w
    seeds = rng.choice(n, size=num_objects, replace=False)
    seed_yx = np.stack([seeds // grid_w, seeds % grid_w], axis=1)
    ys, xs = np.mgrid[0:grid_h, 0:grid_w]
    cells = np.stack([ys.ravel(), xs.ravel()], axis=1)
    d2 = ((cells[:, None, :] - seed_yx[None, :, :]) ** 2).sum(axis=2)
    owner = d2.argmin(axis=1).reshape(grid_h, grid_w)  # ties go to the lower seed index

    region_vectors = rng.uniform(0.5, 1.5, size=(num_objects, dim)).astype(np.float32)
    values = region_vectors[owner]
    cls_vec = values.reshape(n, dim).mean(axis=0).astype(np.float32)
    attn = rng.uniform(0.0, 1.0, n).astype(np.float32)
    fg = FeatureGrid(values=values, cls_vector=cls_vec, attention_scores=attn)

    confidences = rng.uniform(0.82, 0.99, size=num_objects)
    masks = []
    for i in range(num_objects):
        patch_bitmap = owner == i
        pixel_bitmap = np.kron(patch_bitmap, np.ones((scale, scale), dtype=bool))
        masks.append(
            ObjectMask(bitmap=pixel_bitmap, confidence=float(confidences[i]), source_index=i)
        )
    return fg, MaskSet(grid_h * scale, grid_w * scale, tuple(masks)).canonical()


def write_fixture(dir_path: Path, fg: FeatureGrid, ms: MaskSet) -> None:
    """Write one fixture directory: features/cls/attn/masks tensors plus the sidecar."""
    dir_path.mkdir(parents=True, exist_ok=True)
    write_tensor(TensorFile.from_array(fg.values.astype(np.float32)), dir_path / "features.atsr")
    write_tensor(
        TensorFile.from_array(fg.cls_vector.reshape(1, -1).astype(np.float32)),
        dir_path / "cls.atsr",
    )
    write_tensor(
        TensorFile.from_array(
            fg.attention_scores.reshape(fg.grid_height, fg.grid_width).astype(np.float32)
        ),
        dir_path / "attn.atsr",
    )
    # masks are stored in source_index order so sidecar indices line up
    ordered = sorted(ms.masks, key=lambda m: m.source_index)
    stack = np.stack([m.bitmap for m in ordered]).astype(np.uint8)
    write_tensor(TensorFile.from_array(stack), dir_path / "masks.atsr")
    write_sidecar([m.confidence for m in ordered], dir_path / "scores.txt")


def load_fixture(dir_path: Path) -> tuple[FeatureGrid, MaskSet]:
    dir_path = Path(dir_path)
    fg = load_feature_grid(
        dir_path / "features.atsr",
        cls_path=dir_path / "cls.atsr" if (dir_path / "cls.atsr").exists() else None,
        attn_path=dir_path / "attn.atsr" if (dir_path / "attn.atsr").exists() else None,
    )
    mask_tensor = read_tensor(dir_path / "masks.atsr")
    scores = read_sidecar(dir_path / "scores.txt")
    validate_sidecar(scores, mask_tensor.dims[0])
    return fg, mask_set_from_tensor(mask_tensor, scores)


def write_fixture_set(out_dir: Path) -> dict:
    """Generate the full fixture set and a manifest; returns the manifest dict."""
    out_dir = Path(out_dir)
    entries = []

    fg, ms = bundled_fixture()
    write_fixture(out_dir / "bundled", fg, ms)
    entries.append(
        {
            "name": "bundled",
            "objects": len(ms),
            "grid": [fg.grid_height, fg.grid_width],
            "image": [ms.image_height, ms.image_width],
            "dim": fg.dim,
        }
    )

    for count in PIECEWISE_OBJECT_COUNTS:
        name = f"piecewise_{count:02d}"
        fg, ms = piecewise_fixture(count)
        write_fixture(out_dir / name, fg, ms)
        entries.append(
            {
                "name": name,
                "objects": count,
                "grid": [fg.grid_height, fg.grid_width],
                "image": [ms.image_height, ms.image_width],
                "dim": fg.dim,
            }
        )

    manifest = {"fixtures": entries}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
