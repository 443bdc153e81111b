/**
 * Reader for the VIPC clip dump format: 4-byte magic "VIPC", four u32
 * little-endian fields {length, height, width, channels}, then raw samples
 * (one byte per sample for uint8 clips, little-endian float32 otherwise —
 * the payload size tells them apart).
 */

export interface ClipArray {
  length: number;
  height: number;
  width: number;
  channels: number;
  dtype: "uint8" | "float32";
  /** Row-major samples, shape (length, height, width, channels). */
  data: Uint8Array | Float32Array;
}

const MAGIC = "VIPC";
const HEADER_BYTES = 4 + 4 * 4;

/**
 * Decode a dump buffer. The returned array is a view over the input buffer
 * whenever alignment permits; otherwise the payload is copied once.
 */
export function decodeClipDump(buf: Buffer): ClipArray {
  if (buf.length < HEADER_BYTES || buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`not a VIPC clip dump (magic ${buf.toString("latin1", 0, 4)})`);
  }
  const length = buf.readUInt32LE(4);
  const height = buf.readUInt32LE(8);
  const width = buf.readUInt32LE(12);
  const channels = buf.readUInt32LE(16);
  const n = length * height * width * channels;
  const payload = buf.length - HEADER_BYTES;
  if (payload === n) {
    const data = new Uint8Array(buf.buffer, buf.byteOffset + HEADER_BYTES, n);
    return { length, height, width, channels, dtype: "uint8", data };
  }
  if (payload === 4 * n) {
    const byteOffset = buf.byteOffset + HEADER_BYTES;
    let data: Float32Array;
    if (byteOffset % 4 === 0) {
      data = new Float32Array(buf.buffer, byteOffset, n);
    } else {
      const copy = Buffer.alloc(4 * n);
      buf.copy(copy, 0, HEADER_BYTES);
      data = new Float32Array(copy.buffer, 0, n);
    }
    return { length, height, width, channels, dtype: "float32", data };
  }
  throw new Error(`VIPC payload of ${payload} bytes matches neither uint8 (${n}) nor float32 (${4 * n})`);
}
