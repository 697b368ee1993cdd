/**
 * SAFV binary feature files.
 *
 * Layout: magic "SAFV" (4 bytes) | u16 LE version=1 | u32 LE count |
 * u32 LE dim | count*dim little-endian float32 values, row-major.
 * File size is always 14 + 4*count*dim bytes. A sibling
 * `<prefix>.manifest.json` maps image ids to row indices.
 */

import { promises as fs } from "fs";

export const MAGIC = "SAFV";
export const VERSION = 1;
export const HEADER_BYTES = 14;

export interface FeatureManifest {
  count: number;
  dim: number;
  rows: Record<string, number>;
  [extra: string]: unknown;
}

export function encodeFeatures(matrix: Float32Array, count: number, dim: number): Buffer {
  if (matrix.length !== count * dim) {
    throw new Error(`matrix has ${matrix.length} values, expected ${count * dim}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * count * dim);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(VERSION, 4);
  buf.writeUInt32LE(count, 6);
  buf.writeUInt32LE(dim, 10);
  for (let i = 0; i < matrix.length; i++) {
    buf.writeFloatLE(matrix[i], HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function decodeFeatures(buf: Buffer): { count: number; dim: number; values: Float32Array } {
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("not a SAFV feature file (bad magic)");
  }
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported SAFV version ${version}`);
  }
  const count = buf.readUInt32LE(6);
  const dim = buf.readUInt32LE(10);
  const expected = HEADER_BYTES + 4 * count * dim;
  if (buf.length !== expected) {
    throw new Error(`SAFV payload truncated: ${buf.length} bytes, expected ${expected}`);
  }
  const values = new Float32Array(count * dim);
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return { count, dim, values };
}

export async function writeFeatures(
  prefix: string,
  matrix: Float32Array,
  imageIds: string[],
  dim: number,
  extraManifest: Record<string, unknown> = {},
): Promise<{ featurePath: string; manifestPath: string }> {
  const count = imageIds.length;
  const featurePath = `${prefix}.safv`;
  const manifestPath = `${prefix}.manifest.json`;
  await fs.writeFile(featurePath, encodeFeatures(matrix, count, dim));
  const rows: Record<string, number> = {};
  imageIds.forEach((id, i) => {
    rows[id] = i;
  });
  const merged: FeatureManifest = { count, dim, rows, ...extraManifest };
  const manifest = Object.fromEntries(
    Object.keys(merged).sort().map((k) => [k, merged[k]]),
  ) as FeatureManifest;
  await fs.writeFile(manifestPath, JSON.stringify(manifest, null, 1) + "\n");
  return { featurePath, manifestPath };
}

export async function readFeatures(path: string) {
  return decodeFeatures(await fs.readFile(path));
}
