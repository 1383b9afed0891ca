/**
 * Feature encoders producing patch-grid embeddings in a vision-transformer
 * layout: a square grid of d-dimensional vectors plus a global summary vector
 * and per-patch saliency scores.
 *
 * The bundled "patch-stats-v1" backend is a deterministic analytic stand-in
 * for a real ViT (no model weights ship with this adapter): per-patch color
 * and gradient statistics pushed through a seeded random projection. The
 * `layer` knob selects between the raw-statistics family ("penultimate", the
 * default consumers conventionally take) and the normalized family ("final").
 */

import { RgbImage, resizeNearest } from "./image.js";
import { fnv1a, mulberry32 } from "./prng.js";

export type EncoderLayer = "penultimate" | "final";

export interface EncoderConfig {
  encoderId: string;
  patchSize: number;
  gridSize: number;
  dim: number;
  layer: EncoderLayer;
}

export const DEFAULT_ENCODER: EncoderConfig = {
  encoderId: "patch-stats-v1",
  patchSize: 14,
  gridSize: 24,
  dim: 1024,
  layer: "penultimate",
};

export interface EncodedFeatures {
  gridHeight: number;
  gridWidth: number;
  dim: number;
  /** Row-major (gridSize * gridSize * dim). */
  features: Float32Array;
  /** Global summary vector, length dim. */
  clsVector: Float32Array;
  /** Per-patch saliency in [0, 1], length gridSize * gridSize. */
  attentionScores: Float32Array;
}

const STAT_COUNT = 8;

function patchStats(img: RgbImage, px: number, py: number, patch: number): number[] {
  const sums = [0, 0, 0];
  const sqs = [0, 0, 0];
  let gradX = 0;
  let gradY = 0;
  const n = patch * patch;
  for (let y = py; y < py + patch; y++) {
    for (let x = px; x < px + patch; x++) {
      const d = (y * img.width + x) * 3;
      for (let c = 0; c < 3; c++) {
        const v = img.data[d + c] / 255;
        sums[c] += v;
        sqs[c] += v * v;
      }
      const gray = (img.data[d] + img.data[d + 1] + img.data[d + 2]) / (3 * 255);
      if (x + 1 < px + patch) {
        const r = (y * img.width + x + 1) * 3;
        const grayR = (img.data[r] + img.data[r + 1] + img.data[r + 2]) / (3 * 255);
        gradX += Math.abs(grayR - gray);
      }
      if (y + 1 < py + patch) {
        const b = ((y + 1) * img.width + x) * 3;
        const grayB = (img.data[b] + img.data[b + 1] + img.data[b + 2]) / (3 * 255);
        gradY += Math.abs(grayB - gray);
      }
    }
  }
  const means = sums.map((s) => s / n);
  const stds = sqs.map((s, c) => Math.sqrt(Math.max(0, s / n - means[c] * means[c])));
  return [...means, ...stds, gradX / n, gradY / n];
}

function projectionMatrix(cfg: EncoderConfig): Float32Array {
  const seed = fnv1a(`${cfg.encoderId}:${cfg.layer}:${cfg.dim}`);
  const rand = mulberry32(seed);
  const scale = 1 / Math.sqrt(STAT_COUNT);
  const matrix = new Float32Array(STAT_COUNT * cfg.dim);
  for (let i = 0; i < matrix.length; i++) {
    matrix[i] = (rand() * 2 - 1) * scale;
  }
  return matrix;
}

export function encodeImage(img: RgbImage, cfg: EncoderConfig = DEFAULT_ENCODER): EncodedFeatures {
  const side = cfg.gridSize * cfg.patchSize;
  const resized =
    img.width === side && img.height === side ? img : resizeNearest(img, side, side);
  const projection = projectionMatrix(cfg);
  const patches = cfg.gridSize * cfg.gridSize;
  const features = new Float32Array(patches * cfg.dim);
  const attention = new Float32Array(patches);

  for (let gy = 0; gy < cfg.gridSize; gy++) {
    for (let gx = 0; gx < cfg.gridSize; gx++) {
      const stats = patchStats(resized, gx * cfg.patchSize, gy * cfg.patchSize, cfg.patchSize);
      if (cfg.layer === "final") {
        const norm = Math.sqrt(stats.reduce((a, s) => a + s * s, 0));
        if (norm > 0) for (let i = 0; i < stats.length; i++) stats[i] /= norm;
      }
      const p = gy * cfg.gridSize + gx;
      attention[p] = stats[6] + stats[7]; // gradient energy as the saliency prior
      const base = p * cfg.dim;
      for (let j = 0; j < cfg.dim; j++) {
        let acc = 0;
        for (let i = 0; i < STAT_COUNT; i++) acc += stats[i] * projection[i * cfg.dim + j];
        features[base + j] = acc;
      }
    }
  }

  let maxAttention = 0;
  for (const a of attention) maxAttention = Math.max(maxAttention, a);
  if (maxAttention > 0) {
    for (let p = 0; p < patches; p++) attention[p] /= maxAttention;
  }

  const cls = new Float32Array(cfg.dim);
  for (let p = 0; p < patches; p++) {
    const base = p * cfg.dim;
    for (let j = 0; j < cfg.dim; j++) cls[j] += features[base + j];
  }
  for (let j = 0; j < cfg.dim; j++) cls[j] /= patches;

  return {
    gridHeight: cfg.gridSize,
    gridWidth: cfg.gridSize,
    dim: cfg.dim,
    features,
    clsVector: cls,
    attentionScores: attention,
  };
}
