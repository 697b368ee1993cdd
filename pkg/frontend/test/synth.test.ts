import { mkdtempSync, readFileSync, rmSync } from "fs";
import { tmpdir } from "os";
import * as path from "path";
import { afterAll, describe, expect, it } from "vitest";
import { decodeFeatures } from "../src/safv";
import { gaussianSource, synth, synthMatrix } from "../src/synth";

const tmp = mkdtempSync(path.join(tmpdir(), "synth-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

describe("synth", () => {
  it("is byte-deterministic for a given seed", async () => {
    const a = await synth(path.join(tmp, "a"), 6, 10, 42);
    const b = await synth(path.join(tmp, "b"), 6, 10, 42);
    const c = await synth(path.join(tmp, "c"), 6, 10, 43);
    expect(readFileSync(a.featurePath)).toEqual(readFileSync(b.featurePath));
    expect(readFileSync(a.featurePath)).not.toEqual(readFileSync(c.featurePath));
  });

  it("writes a valid empty file for count=0", async () => {
    const { featurePath } = await synth(path.join(tmp, "empty"), 0, 8, 1);
    const back = decodeFeatures(readFileSync(featurePath));
    expect(back.count).toBe(0);
    expect(back.dim).toBe(8);
  });

  it("names rows synth_000000, synth_000001, ...", async () => {
    const { manifestPath } = await synth(path.join(tmp, "ids"), 3, 4, 0);
    const manifest = JSON.parse(readFileSync(manifestPath, "utf-8"));
    expect(Object.keys(manifest.rows).sort()).toEqual([
      "synth_000000",
      "synth_000001",
      "synth_000002",
    ]);
  });

  it("rejects invalid shapes", async () => {
    await expect(synth(path.join(tmp, "bad"), -1, 4, 0)).rejects.toThrow();
    await expect(synth(path.join(tmp, "bad"), 1, 0, 0)).rejects.toThrow();
  });

  it("produces roughly standard-normal values", () => {
    const values = synthMatrix(100, 100, 7);
    const n = values.length;
    let sum = 0;
    let sumSq = 0;
    for (const v of values) {
      sum += v;
      sumSq += v * v;
    }
    const mean = sum / n;
    const variance = sumSq / n - mean * mean;
    expect(Math.abs(mean)).toBeLessThan(0.05);
    expect(Math.abs(variance - 1)).toBeLessThan(0.1);
  });

  it("gaussian source is reproducible", () => {
    const a = gaussianSource(5);
    const b = gaussianSource(5);
    for (let i = 0; i < 50; i++) {
      expect(a()).toBe(b());
    }
  });
});
