/**
 * Reader/writer for the IDX binary format (the MNIST container): a
 * big-endian header of magic + dimension sizes, then raw uint8 payload.
 */

import * as fs from "node:fs";

export const IMAGES_MAGIC = 0x00000803;
export const LABELS_MAGIC = 0x00000801;

export interface IdxImages {
  count: number;
  rows: number;
  cols: number;
  /** count * rows * cols bytes, row-major per image */
  pixels: Uint8Array;
}

export interface IdxLabels {
  count: number;
  values: Uint8Array;
}

export function readIdxImages(path: string): IdxImages {
  const buf = fs.readFileSync(path);
  if (buf.length < 16) throw new Error(`${path}: truncated IDX header`);
  const magic = buf.readUInt32BE(0);
  if (magic !== IMAGES_MAGIC) {
    throw new Error(
      `${path}: bad images magic 0x${magic.toString(16)}, expected 0x803`
    );
  }
  const count = buf.readUInt32BE(4);
  const rows = buf.readUInt32BE(8);
  const cols = buf.readUInt32BE(12);
  const need = 16 + count * rows * cols;
  if (buf.length < need) {
    throw new Error(`${path}: payload is ${buf.length - 16} bytes, need ${need - 16}`);
  }
  return { count, rows, cols, pixels: buf.subarray(16, need) };
}

export function readIdxLabels(path: string): IdxLabels {
  const buf = fs.readFileSync(path);
  if (buf.length < 8) throw new Error(`${path}: truncated IDX header`);
  const magic = buf.readUInt32BE(0);
  if (magic !== LABELS_MAGIC) {
    throw new Error(
      `${path}: bad labels magic 0x${magic.toString(16)}, expected 0x801`
    );
  }
  const count = buf.readUInt32BE(4);
  if (buf.length < 8 + count) {
    throw new Error(`${path}: payload is ${buf.length - 8} bytes, need ${count}`);
  }
  return { count, values: buf.subarray(8, 8 + count) };
}

export function writeIdxImages(
  path: string,
  images: Pick<IdxImages, "rows" | "cols" | "pixels">
): void {
  const { rows, cols, pixels } = images;
  const count = pixels.length / (rows * cols);
  if (!Number.isInteger(count)) {
    throw new Error(`pixel buffer (${pixels.length}) is not a multiple of ${rows}x${cols}`);
  }
  const buf = Buffer.alloc(16 + pixels.length);
  buf.writeUInt32BE(IMAGES_MAGIC, 0);
  buf.writeUInt32BE(count, 4);
  buf.writeUInt32BE(rows, 8);
  buf.writeUInt32BE(cols, 12);
  buf.set(pixels, 16);
  fs.writeFileSync(path, buf);
}

export function writeIdxLabels(path: string, values: Uint8Array): void {
  const buf = Buffer.alloc(8 + values.length);
  buf.writeUInt32BE(LABELS_MAGIC, 0);
  buf.writeUInt32BE(values.length, 4);
  buf.set(values, 8);
  fs.writeFileSync(path, buf);
}

/** Copy the selected sample indices into a fresh IDX pair on disk. */
export function writeIdxSubset(
  imagesOut: string,
  labelsOut: string,
  images: IdxImages,
  labels: IdxLabels,
  indices: number[]
): void {
  const size = images.rows * images.cols;
  const pixels = new Uint8Array(indices.length * size);
  const values = new Uint8Array(indices.length);
  indices.forEach((src, i) => {
    pixels.set(images.pixels.subarray(src * size, (src + 1) * size), i * size);
    values[i] = labels.values[src];
  });
  writeIdxImages(imagesOut, { rows: images.rows, cols: images.cols, pixels });
  writeIdxLabels(labelsOut, values);
}
