import { describe, expect, it } from "vitest";

import { decodeTensor, encodeTensor } from "../src/atsr.js";
import { encodeSidecar } from "../src/sidecar.js";

describe("atsr container", () => {
  it("emits the frozen header layout", () => {
    const buf = encodeTensor({ dims: [2, 3], dtype: "f32", data: new Float32Array(6) });
    expect(buf.subarray(0, 4).toString("ascii")).toBe("ATSR");
    expect([...buf.subarray(4, 8)]).toEqual([1, 1, 2, 0]); // version, f32, rank 2, pad
    expect(buf.readUInt32LE(8)).toBe(2);
    expect(buf.readUInt32LE(12)).toBe(3);
    expect(buf.length).toBe(8 + 8 + 6 * 4);
  });

  it("writes f32 payloads little-endian", () => {
    const buf = encodeTensor({ dims: [1, 2], dtype: "f32", data: new Float32Array([1.0, 2.0]) });
    expect([...buf.subarray(16, 24)]).toEqual([0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40]);
  });

  it("round-trips f32 and u8", () => {
    const f32 = { dims: [3, 4, 2], dtype: "f32" as const, data: new Float32Array(24).map((_, i) => i / 7) };
    const back32 = decodeTensor(encodeTensor(f32));
    expect(back32.dims).toEqual([3, 4, 2]);
    expect([...(back32.data as Float32Array)]).toEqual([...f32.data]);

    const u8 = { dims: [2, 2, 2], dtype: "u8" as const, data: new Uint8Array([0, 1, 2, 3, 255, 254, 253, 252]) };
    const back8 = decodeTensor(encodeTensor(u8));
    expect([...(back8.data as Uint8Array)]).toEqual([...u8.data]);
  });

  it("allows an empty rank-3 mask stack but no other zero dims", () => {
    expect(() => encodeTensor({ dims: [0, 4, 4], dtype: "u8", data: new Uint8Array(0) })).not.toThrow();
    expect(() => encodeTensor({ dims: [4, 0], dtype: "u8", data: new Uint8Array(0) })).toThrow();
  });

  it("rejects rank outside 2..3 and payload mismatches", () => {
    expect(() => encodeTensor({ dims: [4], dtype: "u8", data: new Uint8Array(4) })).toThrow();
    expect(() => encodeTensor({ dims: [2, 2], dtype: "u8", data: new Uint8Array(3) })).toThrow();
  });

  it("is byte-deterministic", () => {
    const t = { dims: [5, 5], dtype: "f32" as const, data: new Float32Array(25).map(() => 0.25) };
    expect(encodeTensor(t).equals(encodeTensor(t))).toBe(true);
  });
});

describe("score sidecar", () => {
  it("writes index-confidence lines that round-trip decimally", () => {
    expect(encodeSidecar([0.9, 0.5])).toBe("0 0.9\n1 0.5\n");
    expect(encodeSidecar([0.8775123])).toBe("0 0.8775123\n");
  });

  it("rejects out-of-range confidences", () => {
    expect(() => encodeSidecar([1.2])).toThrow();
    expect(() => encodeSidecar([-0.1])).toThrow();
  });
});
