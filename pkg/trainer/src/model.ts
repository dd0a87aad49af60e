/**
 * TensorFlow.js model construction, deterministic training, and the
 * conversion between tf.LayersModel and the text-format ModelSpec.
 *
 * Backend note: the WASM backend lacks the conv2d gradient kernels, so CNN
 * training runs on the plain JS "cpu" backend (slow but correct); use WASM
 * for dense training and for inference-only work.
 */

import * as path from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";

import type { HeadSpec, InputShape, LayerSpec, ModelSpec } from "./modelText.js";

export async function initBackend(prefer: "wasm" | "cpu"): Promise<string> {
  if (prefer === "wasm") {
    const dist = fileURLToPath(
      new URL("../node_modules/@tensorflow/tfjs-backend-wasm/dist/", import.meta.url)
    );
    setWasmPaths(dist + path.sep);
    if (await tf.setBackend("wasm").catch(() => false)) {
      await tf.ready();
      return tf.getBackend();
    }
  }
  await tf.setBackend("cpu");
  await tf.ready();
  return tf.getBackend();
}

function glorot(seed: number) {
  return tf.initializers.glorotUniform({ seed });
}

export function buildMnistCnn(nClasses: number, seed: number): tf.Sequential {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [28, 28, 1],
      filters: 8,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: glorot(seed),
    })
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  model.add(
    tf.layers.conv2d({
      filters: 8,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: glorot(seed + 1),
    })
  );
  model.add(tf.layers.maxPooling2d({ poolSize: 2 }));
  // No dense feature layer: the classifier head sits directly on the flattened
  // conv maps, so those 392 activations double as the transfer features.
  model.add(tf.layers.dropout({ rate: 0.25 }));
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: nClasses,
      activation: "softmax",
      kernelInitializer: glorot(seed + 2),
    })
  );
  return model;
}

export function buildDenseMlp(
  featureLen: number,
  nClasses: number,
  seed: number
): tf.Sequential {
  const model = tf.sequential();
  model.add(
    tf.layers.dense({
      inputShape: [featureLen],
      units: 128,
      activation: "relu",
      kernelInitializer: glorot(seed),
    })
  );
  model.add(
    tf.layers.dense({ units: 128, activation: "relu", kernelInitializer: glorot(seed + 1) })
  );
  model.add(
    tf.layers.dense({
      units: nClasses,
      activation: "softmax",
      kernelInitializer: glorot(seed + 2),
    })
  );
  return model;
}

export async function trainClassifier(
  model: tf.Sequential,
  xs: tf.Tensor,
  ys: tf.Tensor,
  opts: { epochs: number; batchSize: number; optimizer: "adam" | "sgd" },
  onEpoch?: (epoch: number, logs: tf.Logs | undefined) => void
): Promise<void> {
  model.compile({
    optimizer: opts.optimizer === "adam" ? tf.train.adam() : tf.train.sgd(0.05),
    loss: "categoricalCrossentropy",
    metrics: ["accuracy"],
  });
  // shuffle:false keeps runs deterministic; callers pre-shuffle with a
  // seeded permutation instead.
  await model.fit(xs, ys, {
    epochs: opts.epochs,
    batchSize: opts.batchSize,
    shuffle: false,
    verbose: 0,
    callbacks: onEpoch ? { onEpochEnd: onEpoch } : undefined,
  });
}

export function evaluateAccuracy(model: tf.LayersModel, xs: tf.Tensor, ys: tf.Tensor): number {
  return tf.tidy(() => {
    const pred = (model.predict(xs, { batchSize: 512 }) as tf.Tensor).argMax(-1);
    const truth = ys.argMax(-1);
    return pred.equal(truth).mean().dataSync()[0];
  });
}

/** Seeded Fisher-Yates permutation (mulberry32 stream). */
export function seededShuffle(n: number, seed: number): number[] {
  let s = seed | 0;
  const rnd = () => {
    s = (s + 0x6d2b79f5) | 0;
    let t = Math.imul(s ^ (s >>> 15), 1 | s);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const order = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rnd() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  return order;
}

/**
 * Convert a trained classifier into the text-format spec: every layer but
 * the final softmax Dense becomes part of the frozen extractor, and that
 * final layer becomes the head block ("truncated" export).
 */
export function tfToModelSpec(
  model: tf.LayersModel,
  input: InputShape,
  headLabels: string[]
): ModelSpec {
  const layers: LayerSpec[] = [];
  let head: HeadSpec | null = null;
  const last = model.layers.length - 1;
  model.layers.forEach((layer, i) => {
    const cls = layer.getClassName();
    const cfg = layer.getConfig() as Record<string, unknown>;
    if (cls === "Conv2D") {
      const [kernel, bias] = layer.getWeights();
      const [kh, kw, cin, cout] = kernel.shape as [number, number, number, number];
      layers.push({
        kind: "conv2d",
        kh,
        kw,
        cin,
        cout,
        padding: cfg.padding as "same" | "valid",
        filters: kernel.dataSync() as Float32Array,
        biases: bias.dataSync() as Float32Array,
      });
      if (cfg.activation === "relu") layers.push({ kind: "relu" });
      else if (cfg.activation !== "linear") {
        throw new Error(`unsupported conv activation ${cfg.activation}`);
      }
    } else if (cls === "MaxPooling2D") {
      const pool = cfg.poolSize as [number, number];
      if (pool[0] !== 2 || pool[1] !== 2) {
        throw new Error(`only 2x2 max pooling exports, got ${pool.join("x")}`);
      }
      layers.push({ kind: "maxpool2x2" });
    } else if (cls === "Flatten") {
      layers.push({ kind: "flatten" });
    } else if (cls === "Dropout") {
      layers.push({ kind: "dropout", rate: cfg.rate as number });
    } else if (cls === "Dense") {
      const [kernel, bias] = layer.getWeights();
      const [inSize, outSize] = kernel.shape as [number, number];
      // text format stores one row per output unit: transpose [in,out]
      const weights = tf.tidy(() => kernel.transpose().dataSync() as Float32Array);
      const biases = bias.dataSync() as Float32Array;
      if (i === last) {
        if (cfg.activation !== "softmax") {
          throw new Error("final layer must be a softmax Dense to become the head");
        }
        if (outSize !== headLabels.length) {
          throw new Error(`head has ${outSize} units for ${headLabels.length} labels`);
        }
        head = { labels: headLabels, featureLen: inSize, weights, biases };
      } else {
        layers.push({ kind: "dense", outSize, inSize, weights, biases });
        if (cfg.activation === "relu") layers.push({ kind: "relu" });
        else if (cfg.activation !== "linear") {
          throw new Error(`unsupported dense activation ${cfg.activation}`);
        }
      }
    } else {
      throw new Error(`cannot export layer type ${cls}`);
    }
  });
  if (!head) throw new Error("model has no final softmax Dense layer");
  return { input, layers, head };
}

/**
 * Rebuild a tf model from a parsed spec. With includeHead the head becomes
 * a final linear Dense (logits); without it the model ends at the feature
 * vector, which is the extractor the benchmark consumes.
 */
export function specToTf(spec: ModelSpec, opts: { includeHead: boolean }): tf.Sequential {
  const model = tf.sequential();
  const inputShape =
    spec.input.kind === "flat"
      ? [spec.input.len]
      : [spec.input.rows, spec.input.cols, spec.input.channels];
  let first = true;
  const add = (layer: tf.layers.Layer) => {
    model.add(layer);
    first = false;
  };
  const shapeArg = () => (first ? { inputShape } : {});
  const pending: Array<{ layer: tf.layers.Layer; weights: tf.Tensor[] }> = [];
  for (const l of spec.layers) {
    switch (l.kind) {
      case "conv2d": {
        const layer = tf.layers.conv2d({
          ...shapeArg(),
          filters: l.cout,
          kernelSize: [l.kh, l.kw],
          padding: l.padding,
        });
        add(layer);
        pending.push({
          layer,
          weights: [
            tf.tensor4d(l.filters, [l.kh, l.kw, l.cin, l.cout]),
            tf.tensor1d(l.biases),
          ],
        });
        break;
      }
      case "dense": {
        const layer = tf.layers.dense({ ...shapeArg(), units: l.outSize });
        add(layer);
        pending.push({
          layer,
          weights: [
            tf.tidy(() => tf.tensor2d(l.weights, [l.outSize, l.inSize]).transpose()),
            tf.tensor1d(l.biases),
          ],
        });
        break;
      }
      case "relu":
        add(tf.layers.reLU(shapeArg()));
        break;
      case "softmax":
        add(tf.layers.softmax(shapeArg()));
        break;
      case "maxpool2x2":
        add(tf.layers.maxPooling2d({ ...shapeArg(), poolSize: 2 }));
        break;
      case "flatten":
        add(tf.layers.flatten(shapeArg()));
        break;
      case "dropout":
        add(tf.layers.dropout({ ...shapeArg(), rate: l.rate }));
        break;
    }
  }
  if (opts.includeHead) {
    const h = spec.head;
    const layer = tf.layers.dense({ ...shapeArg(), units: h.labels.length });
    add(layer);
    pending.push({
      layer,
      weights: [
        tf.tidy(() => tf.tensor2d(h.weights, [h.labels.length, h.featureLen]).transpose()),
        tf.tensor1d(h.biases),
      ],
    });
    add(tf.layers.softmax({}));
  }
  if (first) {
    // zero-layer identity extractor: give the model a concrete input
    add(tf.layers.inputLayer({ inputShape }));
  }
  for (const { layer, weights } of pending) layer.setWeights(weights);
  return model;
}

/** Forward pass to the feature vector, one Float32Array per sample. */
export function extractFeatures(extractor: tf.LayersModel, xs: tf.Tensor): Float32Array[] {
  const out = tf.tidy(() => extractor.predict(xs, { batchSize: 256 }) as tf.Tensor);
  const flat = out.dataSync() as Float32Array;
  const n = out.shape[0] as number;
  const m = flat.length / n;
  out.dispose();
  return Array.from({ length: n }, (_, i) => flat.slice(i * m, (i + 1) * m));
}
