/**
 * Description of one offline training job. The label subset invariant is
 * the point: the exported model must leave some classes unseen, otherwise
 * the downstream class-incremental stream has nothing novel in it.
 */

export type Architecture = "mnist_cnn" | "dense_mlp_600_128_128";

export interface TrainSpec {
  architecture: Architecture;
  epochs: number;
  batchSize: number;
  optimizer: "adam" | "sgd";
  /** classes the frozen model trains on; strict subset of fullLabels */
  trainLabels: string[];
  /** every class the downstream stream may contain */
  fullLabels: string[];
  seed: number;
  /** held-out accuracy below this prints a warning; export proceeds */
  sanityFloor: number;
}

export function validateTrainSpec(spec: TrainSpec): void {
  if (spec.epochs < 1 || !Number.isInteger(spec.epochs)) {
    throw new Error(`epochs must be a positive integer, got ${spec.epochs}`);
  }
  if (spec.batchSize < 1 || !Number.isInteger(spec.batchSize)) {
    throw new Error(`batchSize must be a positive integer, got ${spec.batchSize}`);
  }
  if (spec.trainLabels.length === 0) {
    throw new Error("trainLabels must not be empty");
  }
  if (new Set(spec.trainLabels).size !== spec.trainLabels.length) {
    throw new Error("trainLabels contains duplicates");
  }
  if (spec.trainLabels.length < 2) {
    throw new Error("a classifier needs at least two classes to train on");
  }
  const full = new Set(spec.fullLabels);
  const missing = spec.trainLabels.filter((lb) => !full.has(lb));
  if (missing.length > 0) {
    throw new Error(`trainLabels not in the full label set: ${missing.join(", ")}`);
  }
  if (spec.trainLabels.length >= full.size) {
    throw new Error(
      "trainLabels must be a strict subset of the full label set " +
        "(the stream needs novel classes)"
    );
  }
}
