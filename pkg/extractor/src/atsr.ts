/**
 * Writer (and a validation reader) for the ATSR tensor container consumed by
 * the adatok toolkit. All integers little-endian; layout:
 *
 *   magic "ATSR" | version u8 | dtype u8 (0=f16,1=f32,2=u8) | rank u8 | pad u8
 *   | dims rank*u32 | row-major payload
 *
 * The 8-byte prologue and the exact field order are a frozen cross-component
 * contract; see the toolkit's docs/formats.md.
 */

import { promises as fs } from "node:fs";

export type Dtype = "f16" | "f32" | "u8";

const MAGIC = "ATSR";
const VERSION = 1;
const DTYPE_TAGS: Record<Dtype, number> = { f16: 0, f32: 1, u8: 2 };
const ELEMENT_SIZE: Record<Dtype, number> = { f16: 2, f32: 4, u8: 1 };

export interface Tensor {
  dims: number[];
  dtype: Dtype;
  /** Row-major values; Float32Array for f32, Uint8Array for u8. */
  data: Float32Array | Uint8Array;
}

function product(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

function checkDims(dims: number[]): void {
  if (dims.length !== 2 && dims.length !== 3) {
    throw new Error(`rank must be 2 or 3, got ${dims.length}`);
  }
  dims.forEach((d, i) => {
    if (!Number.isInteger(d) || d < 0 || d > 0xffffffff) {
      throw new Error(`dim ${i} out of u32 range: ${d}`);
    }
    if (d === 0 && !(dims.length === 3 && i === 0)) {
      throw new Error(`dim ${i} is zero`);
    }
  });
}

export function encodeTensor(t: Tensor): Buffer {
  checkDims(t.dims);
  const n = product(t.dims);
  if (t.data.length !== n) {
    throw new Error(`payload has ${t.data.length} values, dims declare ${n}`);
  }
  const header = Buffer.alloc(8 + 4 * t.dims.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt8(VERSION, 4);
  header.writeUInt8(DTYPE_TAGS[t.dtype], 5);
  header.writeUInt8(t.dims.length, 6);
  header.writeUInt8(0, 7);
  t.dims.forEach((d, i) => header.writeUInt32LE(d, 8 + 4 * i));

  const payload = Buffer.alloc(n * ELEMENT_SIZE[t.dtype]);
  if (t.dtype === "u8") {
    payload.set(t.data as Uint8Array);
  } else if (t.dtype === "f32") {
    const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
    const values = t.data as Float32Array;
    for (let i = 0; i < n; i++) view.setFloat32(4 * i, values[i], true);
  } else {
    throw new Error("this adapter does not emit f16 tensors");
  }
  return Buffer.concat([header, payload]);
}

export async function writeTensorFile(path: string, t: Tensor): Promise<void> {
  await fs.writeFile(path, encodeTensor(t));
}

/** Parse an ATSR buffer back (f32/u8 only); used by the adapter's self-checks. */
export function decodeTensor(buf: Buffer): Tensor {
  if (buf.length < 8) throw new Error("shorter than the 8-byte prologue");
  if (buf.toString("ascii", 0, 4) !== MAGIC) throw new Error("bad magic");
  if (buf.readUInt8(4) !== VERSION) throw new Error("unsupported version");
  const tag = buf.readUInt8(5);
  const rank = buf.readUInt8(6);
  if (buf.readUInt8(7) !== 0) throw new Error("prologue pad byte must be 0");
  if (rank !== 2 && rank !== 3) throw new Error(`bad rank ${rank}`);
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) dims.push(buf.readUInt32LE(8 + 4 * i));
  checkDims(dims);
  const n = product(dims);
  const offset = 8 + 4 * rank;
  if (tag === DTYPE_TAGS.u8) {
    if (buf.length !== offset + n) throw new Error("payload size mismatch");
    return { dims, dtype: "u8", data: new Uint8Array(buf.subarray(offset)) };
  }
  if (tag === DTYPE_TAGS.f32) {
    if (buf.length !== offset + 4 * n) throw new Error("payload size mismatch");
    const view = new DataView(buf.buffer, buf.byteOffset + offset, 4 * n);
    const out = new Float32Array(n);
    for (let i = 0; i < n; i++) out[i] = view.getFloat32(4 * i, true);
    return { dims, dtype: "f32", data: out };
  }
  throw new Error(`dtype tag ${tag} not handled by this adapter`);
}
