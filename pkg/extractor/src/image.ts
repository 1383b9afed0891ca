/**
 * Minimal image IO: PNG (via pngjs) and binary PPM (P6), plus nearest-neighbor
 * resizing and a deterministic synthetic-scene renderer used by tests and the
 * demo-image command.
 */

import { promises as fs } from "node:fs";
import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB, 3 bytes per pixel. */
  data: Uint8Array;
}

export function decodePpm(buf: Buffer): RgbImage {
  // header: "P6" <ws> width <ws> height <ws> maxval <single ws> payload
  let pos = 0;
  const token = (): string => {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) {
      // comment line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      return token();
    }
    const start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    return buf.toString("ascii", start, pos);
  };
  if (token() !== "P6") throw new Error("not a binary PPM (P6) file");
  const width = Number(token());
  const height = Number(token());
  const maxval = Number(token());
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error("bad PPM dimensions");
  }
  if (maxval !== 255) throw new Error(`unsupported PPM maxval ${maxval}`);
  pos += 1; // single whitespace after maxval
  const need = width * height * 3;
  if (buf.length - pos < need) throw new Error("PPM payload truncated");
  return { width, height, data: new Uint8Array(buf.subarray(pos, pos + need)) };
}

export function encodePpm(img: RgbImage): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.data)]);
}

function fromPng(buf: Buffer): RgbImage {
  const png = PNG.sync.read(buf);
  const data = new Uint8Array(png.width * png.height * 3);
  for (let i = 0, j = 0; i < png.data.length; i += 4, j += 3) {
    data[j] = png.data[i];
    data[j + 1] = png.data[i + 1];
    data[j + 2] = png.data[i + 2];
  }
  return { width: png.width, height: png.height, data };
}

export async function loadImage(path: string): Promise<RgbImage> {
  const buf = await fs.readFile(path);
  if (buf.length >= 8 && buf[0] === 0x89 && buf.toString("ascii", 1, 4) === "PNG") {
    return fromPng(buf);
  }
  if (buf.length >= 2 && buf.toString("ascii", 0, 2) === "P6") {
    return decodePpm(buf);
  }
  throw new Error(`${path}: unsupported image format (png and binary ppm are handled)`);
}

export function resizeNearest(img: RgbImage, width: number, height: number): RgbImage {
  const out = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const sy = Math.floor((y * img.height) / height);
    for (let x = 0; x < width; x++) {
      const sx = Math.floor((x * img.width) / width);
      const s = (sy * img.width + sx) * 3;
      const d = (y * width + x) * 3;
      out[d] = img.data[s];
      out[d + 1] = img.data[s + 1];
      out[d + 2] = img.data[s + 2];
    }
  }
  return { width, height, data: out };
}

export type Rgb = [number, number, number];

export interface SceneShape {
  kind: "rect" | "circle";
  /** rect: [x0, y0, x1, y1); circle: [cx, cy, radius]. */
  geom: number[];
  color: Rgb;
}

/** Flat-shaded shapes over a two-tone background split; later shapes paint over earlier. */
export function renderScene(
  width: number,
  height: number,
  shapes: SceneShape[],
  background: [Rgb, Rgb] = [
    [40, 44, 52],
    [58, 62, 70],
  ],
): RgbImage {
  const data = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const base = y < height / 2 ? background[0] : background[1];
      const d = (y * width + x) * 3;
      data[d] = base[0];
      data[d + 1] = base[1];
      data[d + 2] = base[2];
    }
  }
  for (const shape of shapes) {
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let inside = false;
        if (shape.kind === "rect") {
          const [x0, y0, x1, y1] = shape.geom;
          inside = x >= x0 && x < x1 && y >= y0 && y < y1;
        } else {
          const [cx, cy, r] = shape.geom;
          inside = (x - cx) ** 2 + (y - cy) ** 2 <= r * r;
        }
        if (inside) {
          const d = (y * width + x) * 3;
          data[d] = shape.color[0];
          data[d + 1] = shape.color[1];
          data[d + 2] = shape.color[2];
        }
      }
    }
  }
  return { width, height, data };
}

/** The shared demo scene: distinct flat-colored objects on a two-tone backdrop.

The two background tones are farther apart than the default grow tolerance
(so they segment separately), and the small circle sits between the p=8
prompt points but on the p=32 grid, so denser prompting discovers it. */
export function demoScene(width = 120, height = 96): RgbImage {
  return renderScene(
    width,
    height,
    [
      { kind: "rect", geom: [8, 8, 36, 32], color: [200, 60, 50] },
      { kind: "rect", geom: [70, 10, 112, 40], color: [60, 180, 90] },
      { kind: "circle", geom: [30, 68, 14], color: [70, 90, 210] },
      { kind: "rect", geom: [58, 56, 84, 88], color: [230, 200, 70] },
      { kind: "circle", geom: [100, 72, 10], color: [190, 90, 190] },
      { kind: "circle", geom: [14, 47, 5], color: [240, 240, 240] },
    ],
    [
      [30, 30, 40],
      [120, 120, 140],
    ],
  );
}
