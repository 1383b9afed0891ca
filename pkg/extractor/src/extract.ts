/**
 * Extraction jobs: run an encoder and/or a segmenter over an image and write
 * the toolkit's input files (features/cls/attn tensors, mask stack, sidecar).
 * The adapter never filters or merges masks; threshold and dedup semantics
 * live in the toolkit so results do not depend on adapter versions.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { writeTensorFile } from "./atsr.js";
import { DEFAULT_ENCODER, EncoderConfig, EncoderLayer, encodeImage } from "./encoder.js";
import { loadImage } from "./image.js";
import { DEFAULT_SEGMENTER, SegmenterConfig, segmentImage } from "./segmenter.js";
import { writeSidecarFile } from "./sidecar.js";

export class AdapterError extends Error {}

export interface ExtractionJob {
  imagePath: string;
  outDir: string;
  encoderId?: string;
  segmenterId?: string;
  pointsPerSide?: number;
  layer?: EncoderLayer;
  patchSize?: number;
  gridSize?: number;
  dim?: number;
  colorTolerance?: number;
}

const KNOWN_ENCODERS = new Set(["patch-stats-v1"]);
const KNOWN_SEGMENTERS = new Set(["region-grow-v1"]);

function encoderConfig(job: ExtractionJob): EncoderConfig {
  const encoderId = job.encoderId ?? DEFAULT_ENCODER.encoderId;
  if (!KNOWN_ENCODERS.has(encoderId)) {
    throw new AdapterError(`unknown encoder ${encoderId}; available: patch-stats-v1`);
  }
  return {
    encoderId,
    patchSize: job.patchSize ?? DEFAULT_ENCODER.patchSize,
    gridSize: job.gridSize ?? DEFAULT_ENCODER.gridSize,
    dim: job.dim ?? DEFAULT_ENCODER.dim,
    layer: job.layer ?? DEFAULT_ENCODER.layer,
  };
}

function segmenterConfig(job: ExtractionJob): SegmenterConfig {
  const segmenterId = job.segmenterId ?? DEFAULT_SEGMENTER.segmenterId;
  if (!KNOWN_SEGMENTERS.has(segmenterId)) {
    throw new AdapterError(`unknown segmenter ${segmenterId}; available: region-grow-v1`);
  }
  return {
    segmenterId,
    pointsPerSide: job.pointsPerSide ?? DEFAULT_SEGMENTER.pointsPerSide,
    colorTolerance: job.colorTolerance ?? DEFAULT_SEGMENTER.colorTolerance,
  };
}

export interface FeatureResult {
  gridHeight: number;
  gridWidth: number;
  dim: number;
  files: { features: string; cls: string; attn: string };
}

export async function extractFeatures(job: ExtractionJob): Promise<FeatureResult> {
  const cfg = encoderConfig(job);
  let img;
  try {
    img = await loadImage(job.imagePath);
  } catch (err) {
    throw new AdapterError(`cannot load ${job.imagePath}: ${(err as Error).message}`);
  }
  const encoded = encodeImage(img, cfg);
  await fs.mkdir(job.outDir, { recursive: true });
  const files = {
    features: path.join(job.outDir, "features.atsr"),
    cls: path.join(job.outDir, "cls.atsr"),
    attn: path.join(job.outDir, "attn.atsr"),
  };
  await writeTensorFile(files.features, {
    dims: [encoded.gridHeight, encoded.gridWidth, encoded.dim],
    dtype: "f32",
    data: encoded.features,
  });
  await writeTensorFile(files.cls, {
    dims: [1, encoded.dim],
    dtype: "f32",
    data: encoded.clsVector,
  });
  await writeTensorFile(files.attn, {
    dims: [encoded.gridHeight, encoded.gridWidth],
    dtype: "f32",
    data: encoded.attentionScores,
  });
  return { gridHeight: encoded.gridHeight, gridWidth: encoded.gridWidth, dim: encoded.dim, files };
}

export interface MaskResult {
  count: number;
  imageHeight: number;
  imageWidth: number;
  files: { masks: string; scores: string };
}

export async function extractMasks(job: ExtractionJob): Promise<MaskResult> {
  const cfg = segmenterConfig(job);
  let img;
  try {
    img = await loadImage(job.imagePath);
  } catch (err) {
    throw new AdapterError(`cannot load ${job.imagePath}: ${(err as Error).message}`);
  }
  const proposals = segmentImage(img, cfg);
  await fs.mkdir(job.outDir, { recursive: true });
  const files = {
    masks: path.join(job.outDir, "masks.atsr"),
    scores: path.join(job.outDir, "scores.txt"),
  };
  const stack = new Uint8Array(proposals.length * img.height * img.width);
  proposals.forEach((p, i) => stack.set(p.bitmap, i * img.height * img.width));
  await writeTensorFile(files.masks, {
    dims: [proposals.length, img.height, img.width],
    dtype: "u8",
    data: stack,
  });
  await writeSidecarFile(
    files.scores,
    proposals.map((p) => p.confidence),
  );
  return { count: proposals.length, imageHeight: img.height, imageWidth: img.width, files };
}

export async function extractAll(job: ExtractionJob) {
  const features = await extractFeatures(job);
  const masks = await extractMasks(job);
  return { features, masks };
}
