/**
 * EMB1 container: little-endian header (24 bytes) + row-major float32 payload.
 *
 * Layout: magic "EMB1" | u16 version=1 | u16 mode tag | u64 rows | u32 dim |
 * 4 reserved zero bytes | rows*dim float32 values. Written bit-exactly; the
 * screening toolkit reads these files directly.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

export const EMB1_MAGIC = "EMB1";
export const EMB1_VERSION = 1;
export const HEADER_SIZE = 24;

export enum ModeTag {
  Raw = 0,
  TwoD = 1,
  ThreeD = 2,
  Concat = 3,
}

export interface EmbeddingMatrix {
  modeTag: ModeTag;
  rows: number;
  dim: number;
  data: Float32Array; // length rows*dim, row-major
}

export function encodeEmb1(matrix: EmbeddingMatrix): Buffer {
  const { modeTag, rows, dim, data } = matrix;
  if (data.length !== rows * dim) {
    throw new Error(`payload length ${data.length} != rows*dim ${rows * dim}`);
  }
  const buffer = Buffer.alloc(HEADER_SIZE + rows * dim * 4);
  buffer.write(EMB1_MAGIC, 0, "ascii");
  buffer.writeUInt16LE(EMB1_VERSION, 4);
  buffer.writeUInt16LE(modeTag, 6);
  buffer.writeBigUInt64LE(BigInt(rows), 8);
  buffer.writeUInt32LE(dim, 16);
  // bytes 20..23 stay zero (reserved)
  for (let i = 0; i < data.length; i++) {
    buffer.writeFloatLE(data[i], HEADER_SIZE + i * 4);
  }
  return buffer;
}

export function decodeEmb1(buffer: Buffer): EmbeddingMatrix {
  if (buffer.length < HEADER_SIZE) {
    throw new Error(`file is ${buffer.length} bytes, header needs ${HEADER_SIZE}`);
  }
  if (buffer.toString("ascii", 0, 4) !== EMB1_MAGIC) {
    throw new Error("bad magic");
  }
  if (buffer.readUInt16LE(4) !== EMB1_VERSION) {
    throw new Error("bad version");
  }
  const modeTag = buffer.readUInt16LE(6) as ModeTag;
  const rows = Number(buffer.readBigUInt64LE(8));
  const dim = buffer.readUInt32LE(16);
  const expected = rows * dim * 4;
  if (buffer.length - HEADER_SIZE !== expected) {
    throw new Error(`payload: expected ${expected} bytes, found ${buffer.length - HEADER_SIZE}`);
  }
  const data = new Float32Array(rows * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buffer.readFloatLE(HEADER_SIZE + i * 4);
  }
  return { modeTag, rows, dim, data };
}

/** Write atomically: temp file in the target directory, then rename. */
export async function writeEmb1(matrix: EmbeddingMatrix, outPath: string): Promise<void> {
  const dir = path.dirname(outPath);
  const temp = path.join(dir, `.${path.basename(outPath)}.${process.pid}.tmp`);
  await fs.writeFile(temp, encodeEmb1(matrix));
  await fs.rename(temp, outPath);
}

export async function readEmb1(filePath: string): Promise<EmbeddingMatrix> {
  return decodeEmb1(await fs.readFile(filePath));
}
