/**
 * Offline-training CLI. Three commands:
 *
 *   export-mnist-artifacts  train the small CNN on a subset of digits and
 *                           write everything the benchmark's MNIST scenario
 *                           consumes (model text file, stream IDX pair,
 *                           held-out IDX pair, metrics.json)
 *   train-dense             train the 128x128 MLP on a feature CSV and
 *                           export the truncated model
 *   extract-features        run a text-format model file forward over IDX
 *                           or CSV inputs and write a feature CSV
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import {
  imagesToTensor,
  labelsToOneHot,
  mnistTest,
  mnistTrain,
  selectPerDigit,
  splitTrainFile,
} from "./data.js";
import { readIdxImages, readIdxLabels, writeIdxSubset } from "./idx.js";
import {
  buildDenseMlp,
  buildMnistCnn,
  evaluateAccuracy,
  extractFeatures,
  initBackend,
  seededShuffle,
  specToTf,
  tfToModelSpec,
  trainClassifier,
} from "./model.js";
import { loadFeatureCsv, loadModel, saveFeatureCsv, saveModel } from "./modelText.js";
import { TrainSpec, validateTrainSpec } from "./trainSpec.js";

function pick<T>(items: T[], order: number[]): T[] {
  return order.map((i) => items[i]);
}

async function exportMnistArtifacts(args: {
  out: string;
  epochs: number;
  batch: number;
  seed: number;
  streamPerDigit: number;
  trainPerDigit: number;
  heldPerDigit: number;
  sanityFloor: number;
}): Promise<number> {
  const trainDigits = [0, 1, 2, 3, 4, 5];
  const spec: TrainSpec = {
    architecture: "mnist_cnn",
    epochs: args.epochs,
    batchSize: args.batch,
    optimizer: "adam",
    trainLabels: trainDigits.map(String),
    fullLabels: Array.from({ length: 10 }, (_, d) => String(d)),
    seed: args.seed,
    sanityFloor: args.sanityFloor,
  };
  validateTrainSpec(spec);
  // conv gradients only exist on the plain cpu backend
  const backend = await initBackend("cpu");

  const train = mnistTrain();
  const test = mnistTest();
  const { streamIdx, frozenTrainIdx } = splitTrainFile(train.labels, {
    streamPerDigit: args.streamPerDigit,
    trainPerDigit: args.trainPerDigit,
    trainDigits: new Set(trainDigits),
  });
  const heldIdx = selectPerDigit(test.labels, new Set(trainDigits), args.heldPerDigit);
  const order = seededShuffle(frozenTrainIdx.length, args.seed);
  const fitIdx = pick(frozenTrainIdx, order);
  console.log(
    `backend=${backend} train=${fitIdx.length} stream=${streamIdx.length} ` +
      `held-out=${heldIdx.length}`
  );

  const xs = imagesToTensor(train.images, fitIdx);
  const ys = labelsToOneHot(train.labels, fitIdx, trainDigits);
  const hx = imagesToTensor(test.images, heldIdx);
  const hy = labelsToOneHot(test.labels, heldIdx, trainDigits);

  const model = buildMnistCnn(trainDigits.length, args.seed);
  await trainClassifier(model, xs, ys, spec, (epoch) => {
    console.log(`epoch ${epoch + 1}/${spec.epochs}: held-out ${evaluateAccuracy(model, hx, hy).toFixed(4)}`);
  });
  const heldOut = evaluateAccuracy(model, hx, hy);
  if (heldOut < spec.sanityFloor) {
    console.warn(
      `warning: held-out accuracy ${heldOut.toFixed(4)} is below the ` +
        `sanity floor ${spec.sanityFloor}; exporting anyway`
    );
  }

  fs.mkdirSync(args.out, { recursive: true });
  const modelSpec = tfToModelSpec(
    model,
    { kind: "image", rows: 28, cols: 28, channels: 1 },
    spec.trainLabels
  );
  saveModel(path.join(args.out, "mnist_cnn.model.txt"), modelSpec);
  writeIdxSubset(
    path.join(args.out, "stream-images.idx"),
    path.join(args.out, "stream-labels.idx"),
    train.images,
    train.labels,
    streamIdx
  );
  writeIdxSubset(
    path.join(args.out, "heldout-images.idx"),
    path.join(args.out, "heldout-labels.idx"),
    test.images,
    test.labels,
    heldIdx
  );
  fs.writeFileSync(
    path.join(args.out, "metrics.json"),
    JSON.stringify(
      {
        architecture: spec.architecture,
        held_out_accuracy: heldOut,
        train_samples: fitIdx.length,
        stream_samples: streamIdx.length,
        heldout_samples: heldIdx.length,
        epochs: spec.epochs,
        batch_size: spec.batchSize,
        optimizer: spec.optimizer,
        seed: spec.seed,
        feature_len: modelSpec.head.featureLen,
      },
      null,
      2
    ) + "\n"
  );
  console.log(`held-out accuracy ${heldOut.toFixed(4)}; artifacts in ${args.out}/`);
  return 0;
}

async function trainDense(args: {
  data: string;
  trainLabels: string;
  out: string;
  epochs: number;
  batch: number;
  seed: number;
  sanityFloor: number;
  holdout: number;
}): Promise<number> {
  const { features, labels } = loadFeatureCsv(args.data);
  const full = [...new Set(labels)].sort();
  const subset = args.trainLabels.split(",");
  const spec: TrainSpec = {
    architecture: "dense_mlp_600_128_128",
    epochs: args.epochs,
    batchSize: args.batch,
    optimizer: "adam",
    trainLabels: subset,
    fullLabels: full,
    seed: args.seed,
    sanityFloor: args.sanityFloor,
  };
  validateTrainSpec(spec);
  const backend = await initBackend("wasm");

  const wanted = new Set(subset);
  const rows = labels.map((lb, i) => ({ lb, i })).filter((r) => wanted.has(r.lb));
  const order = seededShuffle(rows.length, args.seed);
  const shuffled = pick(rows, order);
  const nHold = Math.max(1, Math.floor(args.holdout * shuffled.length));
  const fit = shuffled.slice(nHold);
  const held = shuffled.slice(0, nHold);
  const m = features[0].length;

  const toTensors = (part: typeof shuffled) => {
    const x = new Float32Array(part.length * m);
    const y = new Float32Array(part.length * subset.length);
    part.forEach((r, i) => {
      x.set(features[r.i], i * m);
      y[i * subset.length + subset.indexOf(r.lb)] = 1;
    });
    return [
      tf.tensor2d(x, [part.length, m]),
      tf.tensor2d(y, [part.length, subset.length]),
    ] as const;
  };
  const [xs, ys] = toTensors(fit);
  const [hx, hy] = toTensors(held);
  console.log(`backend=${backend} train=${fit.length} held-out=${held.length} features=${m}`);

  const model = buildDenseMlp(m, subset.length, args.seed);
  await trainClassifier(model, xs, ys, spec);
  const heldOut = evaluateAccuracy(model, hx, hy);
  if (heldOut < spec.sanityFloor) {
    console.warn(
      `warning: held-out accuracy ${heldOut.toFixed(4)} is below the ` +
        `sanity floor ${spec.sanityFloor}; exporting anyway`
    );
  }
  saveModel(args.out, tfToModelSpec(model, { kind: "flat", len: m }, subset));
  console.log(`held-out accuracy ${heldOut.toFixed(4)}; model in ${args.out}`);
  return 0;
}

async function extractFeaturesCmd(args: {
  model: string;
  out: string;
  images?: string;
  labels?: string;
  inputCsv?: string;
  keep?: string;
}): Promise<number> {
  await initBackend("cpu");
  const spec = loadModel(args.model);
  const extractor = specToTf(spec, { includeHead: false });
  let xs: tf.Tensor;
  let outLabels: string[];
  if (args.inputCsv) {
    const { features, labels } = loadFeatureCsv(args.inputCsv);
    const m = features[0].length;
    const data = new Float32Array(features.length * m);
    features.forEach((f, i) => data.set(f, i * m));
    xs = tf.tensor2d(data, [features.length, m]);
    outLabels = labels;
  } else if (args.images && args.labels) {
    const images = readIdxImages(args.images);
    const labels = readIdxLabels(args.labels);
    let indices = Array.from({ length: labels.count }, (_, i) => i);
    if (args.keep) {
      const keep = new Set(args.keep.split(",").map(Number));
      indices = indices.filter((i) => keep.has(labels.values[i]));
    }
    xs = imagesToTensor(images, indices);
    outLabels = indices.map((i) => String(labels.values[i]));
  } else {
    throw new Error("extract-features needs --images/--labels or --input-csv");
  }
  saveFeatureCsv(args.out, extractFeatures(extractor, xs), outLabels);
  console.log(`wrote ${outLabels.length} feature rows -> ${args.out}`);
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  let code = 0;
  await yargs(argv)
    .scriptName("olbench-trainer")
    .command(
      "export-mnist-artifacts",
      "train the MNIST CNN on digits 0-5 and export the benchmark artifacts",
      (y) =>
        y
          .option("out", { type: "string", default: "artifacts" })
          .option("epochs", { type: "number", default: 10 })
          .option("batch", { type: "number", default: 64 })
          .option("seed", { type: "number", default: 2024 })
          .option("stream-per-digit", { type: "number", default: 500 })
          .option("train-per-digit", { type: "number", default: 1000 })
          .option("held-per-digit", { type: "number", default: 300 })
          .option("sanity-floor", { type: "number", default: 0.98 }),
      async (a) => {
        code = await exportMnistArtifacts({
          out: a.out,
          epochs: a.epochs,
          batch: a.batch,
          seed: a.seed,
          streamPerDigit: a["stream-per-digit"],
          trainPerDigit: a["train-per-digit"],
          heldPerDigit: a["held-per-digit"],
          sanityFloor: a["sanity-floor"],
        });
      }
    )
    .command(
      "train-dense",
      "train the dense 128x128 MLP on a feature CSV and export it",
      (y) =>
        y
          .option("data", { type: "string", demandOption: true })
          .option("train-labels", {
            type: "string",
            demandOption: true,
            describe: "comma-separated class subset to train on",
          })
          .option("out", { type: "string", demandOption: true })
          .option("epochs", { type: "number", default: 20 })
          .option("batch", { type: "number", default: 16 })
          .option("seed", { type: "number", default: 7 })
          .option("holdout", { type: "number", default: 0.15 })
          .option("sanity-floor", { type: "number", default: 0.9 }),
      async (a) => {
        code = await trainDense({
          data: a.data,
          trainLabels: a["train-labels"],
          out: a.out,
          epochs: a.epochs,
          batch: a.batch,
          seed: a.seed,
          holdout: a.holdout,
          sanityFloor: a["sanity-floor"],
        });
      }
    )
    .command(
      "extract-features",
      "forward a text-format model over IDX or CSV inputs, write feature CSV",
      (y) =>
        y
          .option("model", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("images", { type: "string" })
          .option("labels", { type: "string" })
          .option("input-csv", { type: "string" })
          .option("keep", { type: "string", describe: "comma-separated digits to keep" }),
      async (a) => {
        code = await extractFeaturesCmd({
          model: a.model,
          out: a.out,
          images: a.images,
          labels: a.labels,
          inputCsv: a["input-csv"],
          keep: a.keep,
        });
      }
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`olbench-trainer: error: ${msg ?? err?.message}`);
      process.exit(2);
    })
    .parseAsync();
  return code;
}

const isMain =
  process.argv[1] && path.resolve(process.argv[1]) === path.resolve(fileURLToPath(import.meta.url));
if (isMain) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(`olbench-trainer: error: ${err.message}`);
      process.exit(1);
    });
}
