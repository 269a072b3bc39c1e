/**
 * Minimal 16-bit grayscale PNG codec with zero dependencies.
 *
 * The encoder emits a zlib stream of stored (uncompressed) deflate blocks,
 * which every PNG reader accepts; the decoder handles exactly that subset
 * (enough for round-trip tests). Values are [0,1] floats quantized to
 * 16-bit big-endian samples, filter type 0 on every scanline.
 */

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export function encodePng16(values: Float32Array, width: number, height: number): Uint8Array {
  if (values.length !== width * height) {
    throw new Error(`expected ${width * height} values, got ${values.length}`);
  }
  // raw scanlines: filter byte + 2 bytes per pixel, big-endian
  const stride = 1 + width * 2;
  const raw = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    let o = y * stride;
    raw[o++] = 0; // filter: none
    for (let x = 0; x < width; x++) {
      const v = values[y * width + x];
      const q = Math.round(Math.min(1, Math.max(0, v)) * 65535);
      raw[o++] = q >> 8;
      raw[o++] = q & 0xff;
    }
  }

  const ihdr = new Uint8Array(13);
  const dv = new DataView(ihdr.buffer);
  dv.setUint32(0, width);
  dv.setUint32(4, height);
  ihdr[8] = 16; // bit depth
  ihdr[9] = 0;  // color type: grayscale
  ihdr[10] = 0; // compression
  ihdr[11] = 0; // filter
  ihdr[12] = 0; // interlace

  const out: number[] = [...PNG_SIGNATURE];
  pushChunk(out, "IHDR", ihdr);
  pushChunk(out, "IDAT", zlibStored(raw));
  pushChunk(out, "IEND", new Uint8Array(0));
  return Uint8Array.from(out);
}

export interface DecodedPng16 {
  width: number;
  height: number;
  values: Float32Array; // [0,1]
}

export function decodePng16(bytes: Uint8Array): DecodedPng16 {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: number[] = [];
  while (pos < bytes.length) {
    const view = new DataView(bytes.buffer, bytes.byteOffset + pos);
    const len = view.getUint32(0);
    const type = String.fromCharCode(...bytes.subarray(pos + 4, pos + 8));
    const data = bytes.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      const hv = new DataView(data.buffer, data.byteOffset);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      if (data[8] !== 16 || data[9] !== 0) {
        throw new Error(`unsupported PNG: bit depth ${data[8]}, color type ${data[9]}`);
      }
      if (data[12] !== 0) throw new Error("interlaced PNG not supported");
    } else if (type === "IDAT") {
      idat.push(...data);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const raw = inflateStored(Uint8Array.from(idat));
  const stride = 1 + width * 2;
  const values = new Float32Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * stride] !== 0) {
      throw new Error(`scanline filter ${raw[y * stride]} not supported`);
    }
    for (let x = 0; x < width; x++) {
      const o = y * stride + 1 + x * 2;
      values[y * width + x] = ((raw[o] << 8) | raw[o + 1]) / 65535;
    }
  }
  return { width, height, values };
}

function pushChunk(out: number[], type: string, data: Uint8Array): void {
  const len = data.length;
  out.push((len >>> 24) & 0xff, (len >>> 16) & 0xff, (len >>> 8) & 0xff, len & 0xff);
  const body = new Uint8Array(4 + len);
  for (let i = 0; i < 4; i++) body[i] = type.charCodeAt(i);
  body.set(data, 4);
  for (const b of body) out.push(b);
  const crc = crc32(body);
  out.push((crc >>> 24) & 0xff, (crc >>> 16) & 0xff, (crc >>> 8) & 0xff, crc & 0xff);
}

/** Wrap raw bytes in a zlib stream of stored deflate blocks (max 65535 each). */
export function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: number[] = [0x78, 0x01]; // CMF/FLG: deflate, 32k window
  const max = 65535;
  for (let off = 0; off < raw.length || off === 0; off += max) {
    const chunk = raw.subarray(off, Math.min(off + max, raw.length));
    const final = off + max >= raw.length ? 1 : 0;
    blocks.push(final, chunk.length & 0xff, chunk.length >> 8,
      ~chunk.length & 0xff, (~chunk.length >> 8) & 0xff);
    for (const b of chunk) blocks.push(b);
    if (raw.length === 0) break;
  }
  const a = adler32(raw);
  blocks.push((a >>> 24) & 0xff, (a >>> 16) & 0xff, (a >>> 8) & 0xff, a & 0xff);
  return Uint8Array.from(blocks);
}

export function inflateStored(z: Uint8Array): Uint8Array {
  if ((z[0] & 0x0f) !== 8) throw new Error("not a zlib/deflate stream");
  let pos = 2;
  const out: number[] = [];
  for (;;) {
    const header = z[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("compressed deflate blocks not supported by this decoder");
    }
    const len = z[pos + 1] | (z[pos + 2] << 8);
    const nlen = z[pos + 3] | (z[pos + 4] << 8);
    if ((len ^ nlen) !== 0xffff) throw new Error("corrupt stored block length");
    pos += 5;
    for (let i = 0; i < len; i++) out.push(z[pos + i]);
    pos += len;
    if (header & 1) break;
  }
  const raw = Uint8Array.from(out);
  const expect = new DataView(z.buffer, z.byteOffset + pos).getUint32(0);
  if (adler32(raw) !== expect) throw new Error("zlib checksum mismatch");
  return raw;
}

export function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}
