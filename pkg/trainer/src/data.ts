/**
 * MNIST access and the split rules the exported artifacts follow. The IDX
 * files ship inside the mnist-data npm package; selection is by file
 * order, so the same inputs always produce the same splits.
 */

import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";

import { IdxImages, IdxLabels, readIdxImages, readIdxLabels } from "./idx.js";

const DATA_DIR = new URL("../node_modules/mnist-data/data/", import.meta.url);

export function mnistTrain(): { images: IdxImages; labels: IdxLabels } {
  return {
    images: readIdxImages(fileURLToPath(new URL("train-images-idx3-ubyte", DATA_DIR))),
    labels: readIdxLabels(fileURLToPath(new URL("train-labels-idx1-ubyte", DATA_DIR))),
  };
}

export function mnistTest(): { images: IdxImages; labels: IdxLabels } {
  return {
    images: readIdxImages(fileURLToPath(new URL("t10k-images-idx3-ubyte", DATA_DIR))),
    labels: readIdxLabels(fileURLToPath(new URL("t10k-labels-idx1-ubyte", DATA_DIR))),
  };
}

/**
 * Disjoint split over the train file: the first `streamPerDigit`
 * occurrences of every digit feed the online stream; the next
 * `trainPerDigit` occurrences of the digits in `trainDigits` train the
 * frozen model. The stream must not reuse the frozen model's samples.
 */
export function splitTrainFile(
  labels: IdxLabels,
  opts: { streamPerDigit: number; trainPerDigit: number; trainDigits: Set<number> }
): { streamIdx: number[]; frozenTrainIdx: number[] } {
  const seen = new Map<number, number>();
  const streamIdx: number[] = [];
  const frozenTrainIdx: number[] = [];
  for (let i = 0; i < labels.count; i++) {
    const d = labels.values[i];
    const k = seen.get(d) ?? 0;
    seen.set(d, k + 1);
    if (k < opts.streamPerDigit) {
      streamIdx.push(i);
    } else if (
      opts.trainDigits.has(d) &&
      k < opts.streamPerDigit + opts.trainPerDigit
    ) {
      frozenTrainIdx.push(i);
    }
  }
  for (let d = 0; d < 10; d++) {
    const need =
      opts.streamPerDigit + (opts.trainDigits.has(d) ? opts.trainPerDigit : 0);
    if ((seen.get(d) ?? 0) < need) {
      throw new Error(`digit ${d} has fewer than ${need} samples`);
    }
  }
  return { streamIdx, frozenTrainIdx };
}

/** First `perDigit` occurrences of each wanted digit, in file order. */
export function selectPerDigit(
  labels: IdxLabels,
  digits: Set<number>,
  perDigit: number
): number[] {
  const seen = new Map<number, number>();
  const out: number[] = [];
  for (let i = 0; i < labels.count; i++) {
    const d = labels.values[i];
    if (!digits.has(d)) continue;
    const k = seen.get(d) ?? 0;
    if (k < perDigit) {
      seen.set(d, k + 1);
      out.push(i);
    }
  }
  return out;
}

/** Selected images as a [n, 28, 28, 1] float tensor scaled to [0, 1]. */
export function imagesToTensor(images: IdxImages, indices: number[]): tf.Tensor4D {
  const size = images.rows * images.cols;
  const data = new Float32Array(indices.length * size);
  indices.forEach((src, i) => {
    for (let p = 0; p < size; p++) data[i * size + p] = images.pixels[src * size + p] / 255;
  });
  return tf.tensor4d(data, [indices.length, images.rows, images.cols, 1]);
}

/** One-hot targets for the selected samples over `classes` label values. */
export function labelsToOneHot(
  labels: IdxLabels,
  indices: number[],
  classes: number[]
): tf.Tensor2D {
  const lookup = new Map(classes.map((c, i) => [c, i]));
  const data = new Float32Array(indices.length * classes.length);
  indices.forEach((src, i) => {
    const row = lookup.get(labels.values[src]);
    if (row === undefined) {
      throw new Error(`sample ${src} has label ${labels.values[src]}, not in ${classes}`);
    }
    data[i * classes.length + row] = 1;
  });
  return tf.tensor2d(data, [indices.length, classes.length]);
}
