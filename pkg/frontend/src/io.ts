/**
 * Interchange with the extraction toolkit: reads the raw planar-RGB clip
 * format its crop command emits (frames named <nnnnnn>.<W>x<H>.rgb), and
 * writes float64 .npy arrays plus a metrics JSON for downstream checks.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Tensor } from "./tensor.js";

const RAW_NAME = /\.(\d+)x(\d+)\.rgb$/;

/** Load one clip directory into a grayscale (1, 1, T, H, W) tensor in [0, 1]. */
export function readRawClip(dir: string): Tensor {
  const names = fs
    .readdirSync(dir)
    .filter((n) => RAW_NAME.test(n))
    .sort();
  if (names.length === 0) throw new Error(`${dir}: no .<W>x<H>.rgb frames found`);

  const frames: Float64Array[] = [];
  let width = 0;
  let height = 0;
  for (const name of names) {
    const m = RAW_NAME.exec(name)!;
    const w = parseInt(m[1], 10);
    const h = parseInt(m[2], 10);
    if (width === 0) {
      width = w;
      height = h;
    } else if (w !== width || h !== height) {
      throw new Error(`${name}: frame size ${w}x${h} differs from ${width}x${height}`);
    }
    const bytes = fs.readFileSync(path.join(dir, name));
    if (bytes.length !== 3 * w * h) {
      throw new Error(`${name}: expected ${3 * w * h} bytes, got ${bytes.length}`);
    }
    const plane = w * h;
    const gray = new Float64Array(plane);
    for (let i = 0; i < plane; i++) {
      // Rec. 601 luma over the planar R, G, B layout.
      gray[i] = (0.299 * bytes[i] + 0.587 * bytes[plane + i] + 0.114 * bytes[2 * plane + i]) / 255;
    }
    frames.push(gray);
  }

  const t = frames.length;
  const out = Tensor.zeros([1, 1, t, height, width]);
  for (let f = 0; f < t; f++) out.data.set(frames[f], f * height * width);
  return out;
}

/** Serialize to .npy (format 1.0, little-endian float64, C order). */
export function writeNpy(file: string, data: Float64Array, shape: number[]): void {
  const dict = `{'descr': '<f8', 'fortran_order': False, 'shape': (${shape.join(", ")}${
    shape.length === 1 ? "," : ""
  }), }`;
  let header = dict;
  const unpadded = 10 + header.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  header = header + " ".repeat(pad) + "\n";

  const buf = Buffer.alloc(10 + header.length + data.length * 8);
  buf.write("\x93NUMPY", 0, "latin1");
  buf.writeUInt8(1, 6);
  buf.writeUInt8(0, 7);
  buf.writeUInt16LE(header.length, 8);
  buf.write(header, 10, "latin1");
  for (let i = 0; i < data.length; i++) buf.writeDoubleLE(data[i], 10 + header.length + i * 8);
  fs.writeFileSync(file, buf);
}

export function writeJson(file: string, value: unknown): void {
  fs.writeFileSync(file, JSON.stringify(value, null, 2) + "\n");
}
