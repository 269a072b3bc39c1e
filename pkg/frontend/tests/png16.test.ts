import { describe, expect, it } from "vitest";

import {
  adler32,
  crc32,
  decodePng16,
  encodePng16,
  inflateStored,
  zlibStored,
} from "../src/png16.js";

describe("checksums", () => {
  it("crc32 matches the known IEND value", () => {
    // CRC of the bytes "IEND" is a published constant (ae 42 60 82)
    expect(crc32(new Uint8Array([0x49, 0x45, 0x4e, 0x44]))).toBe(0xae426082);
  });

  it("adler32 of empty data is one", () => {
    expect(adler32(new Uint8Array(0))).toBe(1);
  });

  it("adler32 matches the classic 'Wikipedia' example", () => {
    const data = new TextEncoder().encode("Wikipedia");
    expect(adler32(data)).toBe(0x11e60398);
  });
});

describe("zlib stored blocks", () => {
  it("round-trips arbitrary bytes", () => {
    const raw = new Uint8Array(200000).map((_, i) => (i * 31 + 7) & 0xff);
    expect(inflateStored(zlibStored(raw))).toEqual(raw);
  });

  it("detects checksum corruption", () => {
    const z = zlibStored(new Uint8Array([1, 2, 3]));
    z[z.length - 1] ^= 0xff;
    expect(() => inflateStored(z)).toThrow(/checksum/);
  });
});

describe("png16 codec", () => {
  it("round-trips within 16-bit quantization", () => {
    const w = 17;
    const h = 13;
    const values = new Float32Array(w * h).map(() => Math.random());
    const decoded = decodePng16(encodePng16(values, w, h));
    expect(decoded.width).toBe(w);
    expect(decoded.height).toBe(h);
    for (let i = 0; i < values.length; i++) {
      expect(Math.abs(decoded.values[i] - values[i])).toBeLessThanOrEqual(0.5 / 65535);
    }
  });

  it("round-trips exact 16-bit levels losslessly", () => {
    const values = Float32Array.from(
      [0, 1, 100, 32768, 54321, 65535].map((k) => k / 65535),
    );
    const decoded = decodePng16(encodePng16(values, 3, 2));
    expect([...decoded.values]).toEqual([...values]);
  });

  it("clamps out-of-range values", () => {
    const decoded = decodePng16(encodePng16(Float32Array.from([-1, 2, 0, 0]), 2, 2));
    expect(decoded.values[0]).toBe(0);
    expect(decoded.values[1]).toBe(1);
  });

  it("emits a valid PNG signature and IHDR", () => {
    const png = encodePng16(new Float32Array(4), 2, 2);
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(String.fromCharCode(...png.subarray(12, 16))).toBe("IHDR");
  });

  it("rejects size mismatches and non-PNG input", () => {
    expect(() => encodePng16(new Float32Array(3), 2, 2)).toThrow(/expected 4/);
    expect(() => decodePng16(new Uint8Array([1, 2, 3]))).toThrow(/not a PNG/);
  });
});
