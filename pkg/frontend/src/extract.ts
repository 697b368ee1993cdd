/**
 * Batch image -> feature extraction.
 *
 * Images are decoded (JPEG/PNG), bilinearly resized so the shorter side
 * is 256, center-cropped to the model's input size, scaled to [0,1] and
 * normalized with the ImageNet channel statistics -- the canonical
 * preprocessing for ImageNet-pretrained classifiers. The feature is the
 * model's pooled penultimate activation (2048-d for the default
 * ResNet-family extractor). Unreadable images are skipped with a
 * warning and listed under `missing` in the manifest.
 */

import { promises as fs } from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";
import * as jpeg from "jpeg-js";
import { PNG } from "pngjs";
import { writeFeatures } from "./safv";

export const IMAGENET_MEAN = [0.485, 0.456, 0.406];
export const IMAGENET_STD = [0.229, 0.224, 0.225];
export const RESIZE_SHORTER = 256;

/** The extractor contract: a pooled feature vector per input image. */
export interface FeatureModel {
  /** square input edge in pixels, e.g. 224 */
  inputSize: number;
  /** feature dimensionality, e.g. 2048 */
  outputDim: number;
  /** [batch, inputSize, inputSize, 3] -> [batch, outputDim] */
  apply(batch: tf.Tensor4D): tf.Tensor2D;
  name: string;
}

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA, 4 bytes per pixel */
  data: Uint8Array;
}

export function decodeImage(file: string, raw: Buffer): DecodedImage {
  const ext = path.extname(file).toLowerCase();
  if (ext === ".jpg" || ext === ".jpeg") {
    const out = jpeg.decode(raw, { useTArray: true, maxMemoryUsageInMB: 512 });
    return { width: out.width, height: out.height, data: out.data };
  }
  if (ext === ".png") {
    const out = PNG.sync.read(raw);
    return { width: out.width, height: out.height, data: new Uint8Array(out.data) };
  }
  throw new Error(`unsupported image type: ${file}`);
}

/** decode -> resize(shorter=256) -> center-crop -> [0,1] -> normalize */
export function preprocess(image: DecodedImage, inputSize: number): tf.Tensor3D {
  return tf.tidy(() => {
    const rgba = tf.tensor3d(image.data, [image.height, image.width, 4], "int32");
    const rgb = rgba.slice([0, 0, 0], [image.height, image.width, 3]).toFloat();
    const scaleFactor = RESIZE_SHORTER / Math.min(image.height, image.width);
    const h = Math.round(image.height * scaleFactor);
    const w = Math.round(image.width * scaleFactor);
    const resized = tf.image.resizeBilinear(rgb as tf.Tensor3D, [h, w], true);
    const top = Math.floor((h - inputSize) / 2);
    const left = Math.floor((w - inputSize) / 2);
    const cropped = resized.slice([top, left, 0], [inputSize, inputSize, 3]);
    const unit = cropped.div(255.0);
    const mean = tf.tensor1d(IMAGENET_MEAN);
    const std = tf.tensor1d(IMAGENET_STD);
    return unit.sub(mean).div(std) as tf.Tensor3D;
  });
}

const IMAGE_EXTS = new Set([".jpg", ".jpeg", ".png"]);

export interface ExtractResult {
  featurePath: string;
  manifestPath: string;
  extracted: string[];
  missing: string[];
}

export async function extract(
  imageDir: string,
  outPrefix: string,
  model: FeatureModel,
  batchSize = 8,
  warn: (msg: string) => void = (m) => console.warn(m),
): Promise<ExtractResult> {
  const entries = (await fs.readdir(imageDir))
    .filter((f) => IMAGE_EXTS.has(path.extname(f).toLowerCase()))
    .sort();
  const ids: string[] = [];
  const missing: string[] = [];
  const rows: Float32Array[] = [];

  for (let start = 0; start < entries.length; start += batchSize) {
    const batchFiles = entries.slice(start, start + batchSize);
    const tensors: tf.Tensor3D[] = [];
    const batchIds: string[] = [];
    for (const file of batchFiles) {
      try {
        const raw = await fs.readFile(path.join(imageDir, file));
        tensors.push(preprocess(decodeImage(file, raw), model.inputSize));
        batchIds.push(file);
      } catch (err) {
        warn(`featext: skipping unreadable image ${file}: ${String(err)}`);
        missing.push(file);
      }
    }
    if (tensors.length === 0) continue;
    const features = tf.tidy(() => model.apply(tf.stack(tensors) as tf.Tensor4D));
    const data = (await features.data()) as Float32Array;
    for (let i = 0; i < batchIds.length; i++) {
      rows.push(data.slice(i * model.outputDim, (i + 1) * model.outputDim));
      ids.push(batchIds[i]);
    }
    features.dispose();
    tensors.forEach((t) => t.dispose());
  }

  const matrix = new Float32Array(rows.length * model.outputDim);
  rows.forEach((row, i) => matrix.set(row, i * model.outputDim));
  const { featurePath, manifestPath } = await writeFeatures(outPrefix, matrix, ids, model.outputDim, {
    source: "extract",
    model: model.name,
    preprocessing: {
      resize_shorter: RESIZE_SHORTER,
      crop: model.inputSize,
      mean: IMAGENET_MEAN,
      std: IMAGENET_STD,
    },
    missing,
  });
  return { featurePath, manifestPath, extracted: ids, missing };
}

/**
 * Load a tfjs graph model from a local directory (model.json + shards)
 * and wrap it as a FeatureModel emitting its pooled output.
 */
export async function loadLocalModel(
  dir: string,
  inputSize = 224,
  outputDim = 2048,
): Promise<FeatureModel> {
  const modelJson = path.join(dir, "model.json");
  const handler: tf.io.IOHandler = {
    load: async () => {
      const spec = JSON.parse(await fs.readFile(modelJson, "utf-8"));
      const buffers: Buffer[] = [];
      const specs: tf.io.WeightsManifestEntry[] = [];
      for (const group of spec.weightsManifest) {
        for (const p of group.paths) {
          buffers.push(await fs.readFile(path.join(dir, p)));
        }
        specs.push(...group.weights);
      }
      const weightData = Buffer.concat(buffers);
      return {
        modelTopology: spec.modelTopology,
        format: spec.format,
        generatedBy: spec.generatedBy,
        convertedBy: spec.convertedBy,
        weightSpecs: specs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      };
    },
  };
  const graph = await tf.loadGraphModel(handler);
  return {
    inputSize,
    outputDim,
    name: path.basename(dir),
    apply: (batch) => tf.tidy(() => {
      let out = graph.predict(batch) as tf.Tensor;
      if (out.rank === 4) {
        out = tf.mean(out, [1, 2]); // global average pool spatial maps
      }
      return out as tf.Tensor2D;
    }),
  };
}
