/**
 * Score sidecar writer: one "index confidence" line per mask, ascending index.
 * Confidences use JS's shortest round-trip decimal form, which the toolkit's
 * parser reads back exactly.
 */

import { promises as fs } from "node:fs";

export function encodeSidecar(confidences: number[]): string {
  return confidences
    .map((c, i) => {
      if (!(c >= 0 && c <= 1)) throw new Error(`confidence ${c} for mask ${i} outside [0, 1]`);
      return `${i} ${c}\n`;
    })
    .join("");
}

export async function writeSidecarFile(path: string, confidences: number[]): Promise<void> {
  await fs.writeFile(path, encodeSidecar(confidences), "utf-8");
}
