/**
 * Writer/parser for the benchmark's plain-text model format, and for its
 * feature CSV. The representation here is framework-neutral arrays; the
 * TensorFlow.js conversion lives in export.ts.
 *
 * Format sketch (floats one block per layer, '#' comments allowed):
 *
 *   olmodel v1
 *   input image 28 28 1          (or: input flat 600)
 *   layer conv2d 8 3 3 1 same    one row per filter (kh*kw*cin), + bias row
 *   layer relu | maxpool2x2 | flatten | dropout 0.25 | softmax
 *   layer dense 128 392          out*in rows of in values, + bias row
 *   head 6 128 0 1 2 3 4 5       n rows of m weights, + bias row
 */

import * as fs from "node:fs";

export const MAGIC = "olmodel v1";

export type InputShape =
  | { kind: "flat"; len: number }
  | { kind: "image"; rows: number; cols: number; channels: number };

export type LayerSpec =
  | {
      kind: "conv2d";
      kh: number;
      kw: number;
      cin: number;
      cout: number;
      padding: "same" | "valid";
      /** [kh, kw, cin, cout] in C order */
      filters: Float32Array;
      biases: Float32Array;
    }
  | {
      kind: "dense";
      outSize: number;
      inSize: number;
      /** [out, in] in C order: one row per output unit */
      weights: Float32Array;
      biases: Float32Array;
    }
  | { kind: "relu" }
  | { kind: "softmax" }
  | { kind: "maxpool2x2" }
  | { kind: "flatten" }
  | { kind: "dropout"; rate: number };

export interface HeadSpec {
  labels: string[];
  featureLen: number;
  /** [n, m] in C order */
  weights: Float32Array;
  biases: Float32Array;
}

export interface ModelSpec {
  input: InputShape;
  layers: LayerSpec[];
  head: HeadSpec;
}

/**
 * Shortest decimal that round-trips the float64 value. Our weights come out
 * of float32 tensors, so parsing back to float32 is exact as well.
 */
export function formatFloat(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite weight ${v}`);
  return String(v);
}

function row(values: ArrayLike<number>): string {
  return Array.from(values, formatFloat).join(" ");
}

export function serializeModel(spec: ModelSpec): string {
  const lines: string[] = [MAGIC];
  const inp = spec.input;
  lines.push(
    inp.kind === "flat"
      ? `input flat ${inp.len}`
      : `input image ${inp.rows} ${inp.cols} ${inp.channels}`
  );
  for (const layer of spec.layers) {
    switch (layer.kind) {
      case "conv2d": {
        const { kh, kw, cin, cout } = layer;
        lines.push(`layer conv2d ${cout} ${kh} ${kw} ${cin} ${layer.padding}`);
        const per = kh * kw * cin;
        for (let f = 0; f < cout; f++) {
          const filter = new Float32Array(per);
          // stored [kh, kw, cin, cout]; emit one filter's [kh, kw, cin] block
          for (let i = 0; i < per; i++) filter[i] = layer.filters[i * cout + f];
          lines.push(row(filter));
        }
        lines.push(row(layer.biases));
        break;
      }
      case "dense": {
        lines.push(`layer dense ${layer.outSize} ${layer.inSize}`);
        for (let o = 0; o < layer.outSize; o++) {
          lines.push(row(layer.weights.subarray(o * layer.inSize, (o + 1) * layer.inSize)));
        }
        lines.push(row(layer.biases));
        break;
      }
      case "dropout":
        lines.push(`layer dropout ${formatFloat(layer.rate)}`);
        break;
      default:
        lines.push(`layer ${layer.kind}`);
    }
  }
  const head = spec.head;
  lines.push(`head ${head.labels.length} ${head.featureLen} ${head.labels.join(" ")}`);
  for (let o = 0; o < head.labels.length; o++) {
    lines.push(row(head.weights.subarray(o * head.featureLen, (o + 1) * head.featureLen)));
  }
  lines.push(row(head.biases));
  return lines.join("\n") + "\n";
}

export function saveModel(path: string, spec: ModelSpec): void {
  fs.writeFileSync(path, serializeModel(spec), "utf-8");
}

class LineReader {
  private i = 0;
  constructor(private lines: string[], private name: string) {}

  next(): string | null {
    while (this.i < this.lines.length) {
      const line = this.lines[this.i++].split("#", 1)[0].trim();
      if (line) return line;
    }
    return null;
  }

  require(what: string): string {
    const line = this.next();
    if (line === null) throw this.error(`unexpected end of file, expected ${what}`);
    return line;
  }

  error(msg: string): Error {
    return new Error(`${this.name}:${this.i}: ${msg}`);
  }
}

function parseFloats(reader: LineReader, count: number, what: string): Float32Array {
  const line = reader.require(what);
  const parts = line.split(/\s+/);
  if (parts.length !== count) {
    throw reader.error(`${what}: expected ${count} values, got ${parts.length}`);
  }
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const v = Number(parts[i]);
    if (Number.isNaN(v) && parts[i].toLowerCase() !== "nan") {
      throw reader.error(`${what}: bad float ${parts[i]!}`);
    }
    out[i] = v;
  }
  return out;
}

export function parseModelText(text: string, name = "model.txt"): ModelSpec {
  const reader = new LineReader(text.split(/\r?\n/), name);
  if (reader.require("magic") !== MAGIC) {
    throw reader.error(`bad magic line, expected '${MAGIC}'`);
  }
  const inputParts = reader.require("input line").split(/\s+/);
  let input: InputShape;
  if (inputParts[0] !== "input") throw reader.error("expected 'input ...'");
  if (inputParts[1] === "flat" && inputParts.length === 3) {
    input = { kind: "flat", len: Number(inputParts[2]) };
  } else if (inputParts[1] === "image" && inputParts.length === 5) {
    input = {
      kind: "image",
      rows: Number(inputParts[2]),
      cols: Number(inputParts[3]),
      channels: Number(inputParts[4]),
    };
  } else {
    throw reader.error(`bad input line '${inputParts.join(" ")}'`);
  }

  const layers: LayerSpec[] = [];
  let head: HeadSpec | null = null;
  for (;;) {
    const line = reader.require("'layer ...' or 'head ...'");
    const parts = line.split(/\s+/);
    if (parts[0] === "head") {
      const n = Number(parts[1]);
      const m = Number(parts[2]);
      const labels = parts.slice(3);
      if (labels.length !== n) {
        throw reader.error(`head declares ${n} classes but lists ${labels.length} labels`);
      }
      const weights = new Float32Array(n * m);
      for (let o = 0; o < n; o++) {
        weights.set(parseFloats(reader, m, `head row ${o}`), o * m);
      }
      head = { labels, featureLen: m, weights, biases: parseFloats(reader, n, "head biases") };
      break;
    }
    if (parts[0] !== "layer") throw reader.error(`expected 'layer' or 'head', got '${parts[0]}'`);
    const kind = parts[1];
    if (kind === "dense") {
      const outSize = Number(parts[2]);
      const inSize = Number(parts[3]);
      const weights = new Float32Array(outSize * inSize);
      for (let o = 0; o < outSize; o++) {
        weights.set(parseFloats(reader, inSize, `dense row ${o}`), o * inSize);
      }
      layers.push({
        kind: "dense",
        outSize,
        inSize,
        weights,
        biases: parseFloats(reader, outSize, "dense biases"),
      });
    } else if (kind === "conv2d") {
      const cout = Number(parts[2]);
      const kh = Number(parts[3]);
      const kw = Number(parts[4]);
      const cin = Number(parts[5]);
      const padding = parts[6];
      if (padding !== "same" && padding !== "valid") {
        throw reader.error(`bad padding '${padding}'`);
      }
      const per = kh * kw * cin;
      const filters = new Float32Array(per * cout);
      for (let f = 0; f < cout; f++) {
        const block = parseFloats(reader, per, `filter ${f}`);
        for (let i = 0; i < per; i++) filters[i * cout + f] = block[i];
      }
      layers.push({
        kind: "conv2d",
        kh,
        kw,
        cin,
        cout,
        padding,
        filters,
        biases: parseFloats(reader, cout, "conv biases"),
      });
    } else if (kind === "dropout") {
      layers.push({ kind: "dropout", rate: Number(parts[2]) });
    } else if (kind === "relu" || kind === "softmax" || kind === "maxpool2x2" || kind === "flatten") {
      layers.push({ kind });
    } else {
      throw reader.error(`unknown layer kind '${kind}'`);
    }
  }
  if (reader.next() !== null) throw reader.error("trailing content after head block");
  return { input, layers, head: head! };
}

export function loadModel(path: string): ModelSpec {
  return parseModelText(fs.readFileSync(path, "utf-8"), path);
}

/** Feature CSV in the harness format: header `label,f0,...`, one sample per row. */
export function saveFeatureCsv(
  path: string,
  features: Float32Array[],
  labels: string[]
): void {
  if (features.length !== labels.length) {
    throw new Error(`${features.length} feature rows for ${labels.length} labels`);
  }
  if (features.length === 0) throw new Error("refusing to write an empty feature CSV");
  const m = features[0].length;
  const header = "label," + Array.from({ length: m }, (_, i) => `f${i}`).join(",");
  const lines = [header];
  features.forEach((rowVals, i) => {
    if (rowVals.length !== m) {
      throw new Error(`row ${i} has ${rowVals.length} features, expected ${m}`);
    }
    lines.push(labels[i] + "," + Array.from(rowVals, formatFloat).join(","));
  });
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function loadFeatureCsv(path: string): { features: Float32Array[]; labels: string[] } {
  const lines = fs
    .readFileSync(path, "utf-8")
    .split(/\r?\n/)
    .filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty file`);
  const m = lines[0].split(",").length - 1;
  const features: Float32Array[] = [];
  const labels: string[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== m + 1) {
      throw new Error(`${path}:${i + 1}: expected ${m + 1} cells, got ${cells.length}`);
    }
    labels.push(cells[0]);
    const rowVals = new Float32Array(m);
    for (let j = 0; j < m; j++) {
      const v = Number(cells[j + 1]);
      if (Number.isNaN(v)) throw new Error(`${path}:${i + 1}: bad float ${cells[j + 1]}`);
      rowVals[j] = v;
    }
    features.push(rowVals);
  }
  return { features, labels };
}
