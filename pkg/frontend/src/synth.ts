/**
 * Seeded synthetic feature files: standard-normal vectors in the SAFV
 * format, for exercising the downstream pipeline without a pretrained
 * network. Deterministic for a given (count, dim, seed).
 */

import { writeFeatures } from "./safv";

/** mulberry32: tiny deterministic PRNG over a 32-bit state. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Box-Muller standard normals from a uniform source. */
export function gaussianSource(seed: number): () => number {
  const uniform = mulberry32(seed);
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const v = spare;
      spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u === 0) u = uniform();
    v = uniform();
    const r = Math.sqrt(-2.0 * Math.log(u));
    spare = r * Math.sin(2.0 * Math.PI * v);
    return r * Math.cos(2.0 * Math.PI * v);
  };
}

export function synthMatrix(count: number, dim: number, seed: number): Float32Array {
  const gauss = gaussianSource(seed);
  const values = new Float32Array(count * dim);
  for (let i = 0; i < values.length; i++) {
    values[i] = gauss();
  }
  return values;
}

export async function synth(prefix: string, count: number, dim: number, seed: number) {
  if (count < 0 || dim < 1) {
    throw new Error(`invalid synth shape: count=${count} dim=${dim}`);
  }
  const ids = Array.from({ length: count }, (_, i) => `synth_${String(i).padStart(6, "0")}`);
  return writeFeatures(prefix, synthMatrix(count, dim, seed), ids, dim, {
    source: "synth",
    seed,
  });
}
