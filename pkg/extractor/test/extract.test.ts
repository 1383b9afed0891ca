import { mkdtempSync } from "node:fs";
import { promises as fs } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { decodeTensor } from "../src/atsr.js";
import { encodeImage, DEFAULT_ENCODER } from "../src/encoder.js";
import { demoScene, encodePpm, renderScene, resizeNearest } from "../src/image.js";
import { segmentImage, DEFAULT_SEGMENTER } from "../src/segmenter.js";
import { extractAll, extractFeatures, extractMasks } from "../src/extract.js";

let workDir: string;
let demoPath: string;

beforeAll(async () => {
  workDir = mkdtempSync(path.join(tmpdir(), "extractor-"));
  demoPath = path.join(workDir, "demo.ppm");
  await fs.writeFile(demoPath, encodePpm(demoScene()));
});

describe("encoder", () => {
  it("produces the 24x24x1024 vision-transformer geometry", () => {
    const out = encodeImage(demoScene());
    expect([out.gridHeight, out.gridWidth, out.dim]).toEqual([24, 24, 1024]);
    expect(out.features.length).toBe(24 * 24 * 1024);
    expect(out.clsVector.length).toBe(1024);
    expect(out.attentionScores.length).toBe(576);
  });

  it("handles non-square inputs via resize, dims unchanged", () => {
    const wide = renderScene(200, 60, [{ kind: "rect", geom: [20, 10, 80, 50], color: [220, 40, 40] }]);
    const out = encodeImage(wide);
    expect([out.gridHeight, out.gridWidth, out.dim]).toEqual([24, 24, 1024]);
  });

  it("is deterministic across calls", () => {
    const a = encodeImage(demoScene());
    const b = encodeImage(demoScene());
    expect(Buffer.from(a.features.buffer).equals(Buffer.from(b.features.buffer))).toBe(true);
    expect(Buffer.from(a.clsVector.buffer).equals(Buffer.from(b.clsVector.buffer))).toBe(true);
  });

  it("keeps attention scores in [0, 1] with a salient max", () => {
    const out = encodeImage(demoScene());
    let max = 0;
    for (const a of out.attentionScores) {
      expect(a).toBeGreaterThanOrEqual(0);
      expect(a).toBeLessThanOrEqual(1);
      max = Math.max(max, a);
    }
    expect(max).toBe(1);
  });

  it("distinguishes the layer families", () => {
    const pen = encodeImage(demoScene(), { ...DEFAULT_ENCODER, layer: "penultimate" });
    const fin = encodeImage(demoScene(), { ...DEFAULT_ENCODER, layer: "final" });
    expect(Buffer.from(pen.features.buffer).equals(Buffer.from(fin.features.buffer))).toBe(false);
  });
});

describe("segmenter", () => {
  it("finds the scene's objects and background regions", () => {
    const proposals = segmentImage(demoScene());
    // 6 shapes + 2 background tones, exact-duplicate regions collapsed
    expect(proposals.length).toBe(8);
    for (const p of proposals) {
      expect(p.confidence).toBeGreaterThanOrEqual(0);
      expect(p.confidence).toBeLessThanOrEqual(1);
    }
  });

  it("discovers no fewer regions with denser prompting", () => {
    const img = demoScene();
    const p8 = segmentImage(img, { ...DEFAULT_SEGMENTER, pointsPerSide: 8 });
    const p32 = segmentImage(img, { ...DEFAULT_SEGMENTER, pointsPerSide: 32 });
    expect(p8.length).toBeLessThanOrEqual(p32.length);
    expect(p8.length).toBeLessThan(p32.length); // the small circle needs the dense grid
  });

  it("gives a blank image one near-zero-confidence region", () => {
    const blank = renderScene(64, 64, [], [
      [90, 90, 90],
      [90, 90, 90],
    ]);
    const proposals = segmentImage(blank);
    expect(proposals.length).toBe(1);
    expect(proposals[0].confidence).toBeLessThan(0.1);
  });
});

describe("extraction jobs", () => {
  it("writes index-aligned tensors and sidecars", async () => {
    const outDir = path.join(workDir, "full");
    const res = await extractAll({ imagePath: demoPath, outDir });
    const masks = decodeTensor(await fs.readFile(res.masks.files.masks));
    expect(masks.dims[0]).toBe(res.masks.count);
    expect(masks.dims.slice(1)).toEqual([96, 120]);
    const sidecar = await fs.readFile(res.masks.files.scores, "utf-8");
    const lines = sidecar.trim().split("\n");
    expect(lines.length).toBe(res.masks.count);
    lines.forEach((line, i) => expect(line.startsWith(`${i} `)).toBe(true));

    const features = decodeTensor(await fs.readFile(res.features.files.features));
    expect(features.dims).toEqual([24, 24, 1024]);
    const cls = decodeTensor(await fs.readFile(res.features.files.cls));
    expect(cls.dims).toEqual([1, 1024]);
    const attn = decodeTensor(await fs.readFile(res.features.files.attn));
    expect(attn.dims).toEqual([24, 24]);
  });

  it("emits byte-identical files for the same image", async () => {
    const dirA = path.join(workDir, "detA");
    const dirB = path.join(workDir, "detB");
    await extractAll({ imagePath: demoPath, outDir: dirA, dim: 64 });
    await extractAll({ imagePath: demoPath, outDir: dirB, dim: 64 });
    for (const name of ["features.atsr", "cls.atsr", "attn.atsr", "masks.atsr", "scores.txt"]) {
      const a = await fs.readFile(path.join(dirA, name));
      const b = await fs.readFile(path.join(dirB, name));
      expect(a.equals(b), name).toBe(true);
    }
  });

  it("rejects unknown backend ids", async () => {
    await expect(
      extractFeatures({ imagePath: demoPath, outDir: workDir, encoderId: "vit-nope" }),
    ).rejects.toThrow(/unknown encoder/);
    await expect(
      extractMasks({ imagePath: demoPath, outDir: workDir, segmenterId: "segnet-nope" }),
    ).rejects.toThrow(/unknown segmenter/);
  });

  it("fails cleanly on a missing image", async () => {
    await expect(
      extractFeatures({ imagePath: path.join(workDir, "nope.ppm"), outDir: workDir }),
    ).rejects.toThrow(/cannot load/);
  });
});

describe("image io", () => {
  it("nearest resize preserves flat regions", () => {
    const img = renderScene(10, 10, [], [
      [5, 5, 5],
      [5, 5, 5],
    ]);
    const big = resizeNearest(img, 30, 20);
    expect(big.width).toBe(30);
    expect([...big.data.slice(0, 3)]).toEqual([5, 5, 5]);
  });
});
