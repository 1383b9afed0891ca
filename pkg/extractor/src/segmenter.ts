/**
 * Grid-prompted segmentation backends. The bundled "region-grow-v1" floods a
 * color-coherent region from every prompt point (p points per side, same
 * placement formula the toolkit uses). A region's confidence is its color
 * homogeneity damped by a frame-coverage prior, so a region swallowing the
 * whole frame (e.g. on a blank image) scores near zero while compact coherent
 * regions score near one. Everything a prompt discovers is emitted; only
 * exact-duplicate regions (the same pixel set reached from several prompts)
 * collapse to one mask, as a segmenter would collapse identical proposals.
 * Confidence/area filtering is the toolkit's job, not the adapter's.
 */

import { createHash } from "node:crypto";
import { RgbImage } from "./image.js";

export interface SegmenterConfig {
  segmenterId: string;
  pointsPerSide: number;
  /** L1 RGB distance (0..765) within which a pixel joins the region. */
  colorTolerance: number;
}

export const DEFAULT_SEGMENTER: SegmenterConfig = {
  segmenterId: "region-grow-v1",
  pointsPerSide: 32,
  colorTolerance: 60,
};

export interface MaskProposal {
  /** Row-major H*W bitmap, 1 = inside. */
  bitmap: Uint8Array;
  confidence: number;
  /** The prompt point that produced the region. */
  seed: { x: number; y: number };
}

export function gridPoints(p: number, h: number, w: number): Array<{ x: number; y: number }> {
  if (p < 1 || h < 1 || w < 1) throw new Error(`p, h, w must all be >= 1`);
  const points: Array<{ x: number; y: number }> = [];
  for (let i = 0; i < p; i++) {
    const y = Math.floor(((2 * i + 1) * h) / (2 * p));
    for (let j = 0; j < p; j++) {
      points.push({ x: Math.floor(((2 * j + 1) * w) / (2 * p)), y });
    }
  }
  return points;
}

function growRegion(
  img: RgbImage,
  seedX: number,
  seedY: number,
  tolerance: number,
): { bitmap: Uint8Array; meanDistance: number; area: number } {
  const { width, height, data } = img;
  const bitmap = new Uint8Array(width * height);
  const s = (seedY * width + seedX) * 3;
  const sr = data[s];
  const sg = data[s + 1];
  const sb = data[s + 2];
  const queue: number[] = [seedY * width + seedX];
  bitmap[seedY * width + seedX] = 1;
  let area = 0;
  let distanceSum = 0;
  while (queue.length) {
    const idx = queue.pop() as number;
    const x = idx % width;
    const y = (idx - x) / width;
    const d = idx * 3;
    const dist =
      Math.abs(data[d] - sr) + Math.abs(data[d + 1] - sg) + Math.abs(data[d + 2] - sb);
    area++;
    distanceSum += dist;
    const tryPush = (nx: number, ny: number) => {
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) return;
      const nidx = ny * width + nx;
      if (bitmap[nidx]) return;
      const nd = nidx * 3;
      const ndist =
        Math.abs(data[nd] - sr) + Math.abs(data[nd + 1] - sg) + Math.abs(data[nd + 2] - sb);
      if (ndist <= tolerance) {
        bitmap[nidx] = 1;
        queue.push(nidx);
      }
    };
    tryPush(x - 1, y);
    tryPush(x + 1, y);
    tryPush(x, y - 1);
    tryPush(x, y + 1);
  }
  return { bitmap, meanDistance: distanceSum / area, area };
}

/** All prompt-discovered regions in first-seen order, exact duplicates collapsed. */
export function segmentImage(
  img: RgbImage,
  cfg: SegmenterConfig = DEFAULT_SEGMENTER,
): MaskProposal[] {
  const proposals: MaskProposal[] = [];
  const seen = new Set<string>();
  const pixels = img.width * img.height;
  for (const point of gridPoints(cfg.pointsPerSide, img.height, img.width)) {
    const region = growRegion(img, point.x, point.y, cfg.colorTolerance);
    const digest = createHash("sha256").update(region.bitmap).digest("hex");
    if (seen.has(digest)) continue;
    seen.add(digest);
    const homogeneity = 1 - region.meanDistance / cfg.colorTolerance;
    const coverage = region.area / pixels;
    const confidence = Math.max(0, Math.min(1, homogeneity * (1 - coverage * coverage)));
    proposals.push({ bitmap: region.bitmap, confidence, seed: point });
  }
  return proposals;
}
