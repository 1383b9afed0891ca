#!/usr/bin/env node
/**
 * adatok-extract: produce toolkit input files from a real image.
 *
 *   adatok-extract extract --image photo.png --out dir [options]
 *   adatok-extract demo-image --out scene.ppm [--width 120] [--height 96]
 *
 * extract options: --encoder patch-stats-v1, --segmenter region-grow-v1,
 * --p N (prompt points per side, default 32), --layer penultimate|final,
 * --grid N, --patch N, --dim N, --tolerance N, --features-only, --masks-only.
 */

import { promises as fs } from "node:fs";
import { parseArgs } from "node:util";

import { AdapterError, extractAll, extractFeatures, extractMasks } from "./extract.js";
import { demoScene, encodePpm } from "./image.js";

function usage(): never {
  console.error(
    "usage: adatok-extract extract --image PATH --out DIR [--p N] [--encoder ID] " +
      "[--segmenter ID] [--layer penultimate|final] [--grid N] [--patch N] [--dim N] " +
      "[--tolerance N] [--features-only|--masks-only]\n" +
      "       adatok-extract demo-image --out PATH [--width N] [--height N]",
  );
  process.exit(2);
}

async function runExtract(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      image: { type: "string" },
      out: { type: "string" },
      encoder: { type: "string" },
      segmenter: { type: "string" },
      p: { type: "string" },
      layer: { type: "string" },
      grid: { type: "string" },
      patch: { type: "string" },
      dim: { type: "string" },
      tolerance: { type: "string" },
      "features-only": { type: "boolean", default: false },
      "masks-only": { type: "boolean", default: false },
    },
  });
  if (!values.image || !values.out) usage();
  if (values.layer && values.layer !== "penultimate" && values.layer !== "final") usage();
  const job = {
    imagePath: values.image,
    outDir: values.out,
    encoderId: values.encoder,
    segmenterId: values.segmenter,
    pointsPerSide: values.p ? Number(values.p) : undefined,
    layer: values.layer as "penultimate" | "final" | undefined,
    gridSize: values.grid ? Number(values.grid) : undefined,
    patchSize: values.patch ? Number(values.patch) : undefined,
    dim: values.dim ? Number(values.dim) : undefined,
    colorTolerance: values.tolerance ? Number(values.tolerance) : undefined,
  };
  if (values["features-only"] && values["masks-only"]) usage();
  if (values["features-only"]) {
    const res = await extractFeatures(job);
    console.log(`features grid=${res.gridHeight}x${res.gridWidth} dim=${res.dim}`);
  } else if (values["masks-only"]) {
    const res = await extractMasks(job);
    console.log(`masks=${res.count} image=${res.imageHeight}x${res.imageWidth}`);
  } else {
    const res = await extractAll(job);
    console.log(
      `features grid=${res.features.gridHeight}x${res.features.gridWidth} ` +
        `dim=${res.features.dim} masks=${res.masks.count}`,
    );
  }
}

async function runDemoImage(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      out: { type: "string" },
      width: { type: "string", default: "120" },
      height: { type: "string", default: "96" },
    },
  });
  if (!values.out) usage();
  const img = demoScene(Number(values.width), Number(values.height));
  await fs.writeFile(values.out, encodePpm(img));
  console.log(`wrote ${values.out} (${img.width}x${img.height})`);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "extract") await runExtract(rest);
    else if (command === "demo-image") await runDemoImage(rest);
    else usage();
  } catch (err) {
    if (err instanceof AdapterError) {
      console.error(`AdapterError: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}

main();
